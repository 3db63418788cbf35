#pragma once

// Positive, positively 2-homogeneous planar Hamiltonians H(u, v): isochronous
// centers whose orbits all share the minimal period
//     tau = integral over [0, 2 pi] of dtheta / (2 H(cos theta, sin theta)).
// The flow J w' = grad H(w) turns clockwise; rotation counts are reported as
// positive clockwise turns.

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "hamcouple/dynamics.hpp"
#include "hamcouple/exprlang.hpp"

namespace hamcouple {

using Vec2 = Eigen::Vector2d;

struct PlanarHamiltonian {
  std::string name;
  std::function<double(const Vec2&)> value;
  std::function<Vec2(const Vec2&)> gradient;
  bool claims_homogeneous2 = false;
  bool claims_positive = false;

  double operator()(const Vec2& w) const { return value(w); }
  Vec2 grad(const Vec2& w) const { return gradient(w); }
};

struct AsymmetricParams {
  double mu = 1.0;
  double nu = 1.0;
};

/// 1/2 |w|^2.
PlanarHamiltonian harmonic_hamiltonian();
/// 1/2 [mu (u+)^2 + nu (u-)^2 + v^2]; throws Error unless mu, nu > 0.
PlanarHamiltonian asymmetric_hamiltonian(AsymmetricParams p);
/// 1/2 (a u^2 + 2 b u v + c v^2); throws Error unless positive definite.
PlanarHamiltonian quadratic_form_hamiltonian(double a, double b, double c);
/// H from an expression in u, v; other free variables come from `params`.
PlanarHamiltonian expr_hamiltonian(const expr::Expr& e, const expr::Binding& params, bool claims_homogeneous2,
                                   bool claims_positive);
PlanarHamiltonian scaled_hamiltonian(const PlanarHamiltonian& h, double c);

struct HomogeneityReport {
  std::size_t samples = 0;
  double max_euler_residual = 0.0;        // |<grad H(w), w> - 2 H(w)| / |w|^2
  double max_homogeneity_residual = 0.0;  // |H(l w) - l^2 H(w)| / (l |w|)^2
  std::size_t positivity_violations = 0;
  bool pass = false;
};

/// Random w on the annulus 0.1 <= |w| <= 10, lambda in {0.5, 2, 10}.
HomogeneityReport check_homogeneous(const PlanarHamiltonian& h, std::size_t n_samples, double tol,
                                    std::uint64_t seed = 0);

/// Throws NonpositiveHamiltonian if H(cos, sin) <= 0 at a quadrature node.
double minimal_period(const PlanarHamiltonian& h, double quad_tol = 1e-12);

double asym_period(AsymmetricParams p);

struct HalfPeriods {
  double tau_plus = 0.0;   // time spent in the half-plane v > 0
  double tau_minus = 0.0;  // time spent in v < 0
};

HalfPeriods half_periods(const PlanarHamiltonian& h, double quad_tol = 1e-12);

/// Orbit phi with H(phi) = 1/2 starting on the positive u-axis, over one
/// period, together with a monotone angle-to-time table.
class ReferenceOrbit {
 public:
  double period() const { return tau_; }
  const PlanarHamiltonian& hamiltonian() const { return h_; }
  const Trajectory& trajectory() const { return *traj_; }

  /// phi(t) for any real t (periodic extension).
  Vec2 at(double t) const;
  /// Unwrapped clockwise angle of phi(s) for s in [0, tau]; 0 at s = 0.
  double clockwise_angle(double s) const;

  double max_energy_drift() const { return energy_drift_; }
  double closure_error() const { return closure_error_; }

 private:
  friend ReferenceOrbit reference_orbit(const PlanarHamiltonian& h, double tol);
  friend double angle_to_orbit_time(const ReferenceOrbit& orbit, double angle);

  PlanarHamiltonian h_;
  double tau_ = 0.0;
  std::shared_ptr<const Trajectory> traj_;
  std::vector<double> table_s_;
  std::vector<double> table_angle_;  // clockwise, strictly increasing
  double energy_drift_ = 0.0;
  double closure_error_ = 0.0;
};

/// Throws IntegrationFailure if energy drift or closure exceeds tol.
ReferenceOrbit reference_orbit(const PlanarHamiltonian& h, double tol);

/// The s in [0, tau) with phi(s) pointing along (cos angle, sin angle).
double angle_to_orbit_time(const ReferenceOrbit& orbit, double angle);

/// Planar field w' = -J grad H(w) = (H_v, -H_u) of the autonomous system.
VectorField planar_flow(const PlanarHamiltonian& h);

}  // namespace hamcouple
