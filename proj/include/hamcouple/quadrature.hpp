#pragma once

#include <functional>
#include <span>

namespace hamcouple {

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;
};

/// Adaptive Gauss-Kronrod (15-point) on [a, b] to absolute error abs_tol.
QuadratureResult integrate_adaptive(const std::function<double(double)>& f, double a, double b, double abs_tol);

/// Sum of adaptive integrals over consecutive pieces [breaks[i], breaks[i+1]].
QuadratureResult integrate_piecewise(const std::function<double(double)>& f, std::span<const double> breaks,
                                     double abs_tol);

/// Composite trapezoid rule on uniformly spaced samples (first to last).
double trapezoid(std::span<const double> samples, double h);

}  // namespace hamcouple
