#include "hamcouple/quadrature.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>

namespace hamcouple {

namespace {
using Kronrod = boost::math::quadrature::gauss_kronrod<double, 15>;
constexpr unsigned kMaxDepth = 30;
}  // namespace

QuadratureResult integrate_adaptive(const std::function<double(double)>& f, double a, double b, double abs_tol) {
  // Boost terminates on a relative criterion; derive it from a coarse L1 estimate.
  double coarse_l1 = 0.0;
  Kronrod::integrate(f, a, b, 0, 0.0, nullptr, &coarse_l1);
  const double rel = coarse_l1 > 0.0 ? std::max(abs_tol / coarse_l1, 1e-15) : 1e-15;
  QuadratureResult out;
  out.value = Kronrod::integrate(f, a, b, kMaxDepth, rel, &out.error);
  return out;
}

QuadratureResult integrate_piecewise(const std::function<double(double)>& f, std::span<const double> breaks,
                                     double abs_tol) {
  QuadratureResult out;
  if (breaks.size() < 2) return out;
  const double share = abs_tol / static_cast<double>(breaks.size() - 1);
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    const auto piece = integrate_adaptive(f, breaks[i], breaks[i + 1], share);
    out.value += piece.value;
    out.error += piece.error;
  }
  return out;
}

double trapezoid(std::span<const double> samples, double h) {
  if (samples.size() < 2) return 0.0;
  double sum = 0.5 * (samples.front() + samples.back());
  for (std::size_t i = 1; i + 1 < samples.size(); ++i) sum += samples[i];
  return sum * h;
}

}  // namespace hamcouple
