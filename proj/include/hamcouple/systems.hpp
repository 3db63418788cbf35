#pragma once

// Coupled systems
//     x' =  grad_y H(t,x,y) + grad_y P(t,x,y,w)
//     y' = -grad_x H(t,x,y) - grad_x P(t,x,y,w)
//     J w' = F(t,w) + grad_w P(t,x,y,w),        J = [[0,-1],[1,0]],
// with state layout z = (x_1..x_M, y_1..y_M, u, v), plus the structural
// decomposition F = (1-gamma) grad H1 + gamma grad H2 + grad Q and the
// large-|w| cutoff modification.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hamcouple/dynamics.hpp"
#include "hamcouple/exprlang.hpp"
#include "hamcouple/homogeneous.hpp"

namespace hamcouple {

/// Scalar function of (t, z) on the full state; the gradient is written
/// into a vector of size 2M+2 (components it does not depend on are 0).
struct StateFunction {
  std::function<double(double, const State&)> value;
  std::function<void(double, const State&, State&)> gradient;
  bool identically_zero = false;
};

struct PlanarField {
  std::function<Vec2(double, const Vec2&)> eval;
  Vec2 operator()(double t, const Vec2& w) const { return eval(t, w); }
};

struct PlanarScalar {
  std::function<double(double, const Vec2&)> value;
  std::function<Vec2(double, const Vec2&)> gradient;
  bool identically_zero = false;
};

enum class SystemMode { Periodic, Neumann };
enum class DecompositionMode { Global, Quadrant };

struct DecompositionData {
  PlanarHamiltonian H1;
  PlanarHamiltonian H2;
  PlanarScalar Q;
  DecompositionMode mode = DecompositionMode::Global;
  double q_gradient_bound = 0.0;  // sup |grad_w Q|
};

struct CoupledSystem {
  int M = 1;
  SystemMode mode = SystemMode::Periodic;
  double T = 0.0;  // periodic mode
  double a = 0.0;  // Neumann interval [a, b]
  double b = 0.0;
  StateFunction hamiltonian;  // depends on (t, x, y) only
  StateFunction coupling;     // P(t, x, y, w)
  PlanarField F;
  std::optional<DecompositionData> decomposition;
  std::string name;

  int dim() const { return 2 * M + 2; }
  int u_index() const { return 2 * M; }
  int v_index() const { return 2 * M + 1; }
};

// Block constructors -------------------------------------------------------

StateFunction zero_state_function(int M);
/// Expression over t, x1..xM, y1..yM, u, v; remaining free variables are
/// taken from `params` (UnboundVariable otherwise).
StateFunction expr_state_function(const expr::Expr& e, int M, const expr::Binding& params);
/// Field components (F_u, F_v) as expressions over t, u, v.
PlanarField expr_planar_field(const expr::Expr& fu, const expr::Expr& fv, const expr::Binding& params);
PlanarScalar expr_planar_scalar(const expr::Expr& e, const expr::Binding& params);
PlanarScalar zero_planar_scalar();
/// F = grad H.
PlanarField gradient_field(const PlanarHamiltonian& h);

/// State-variable names in slot order: t, x1..xM, y1..yM, u, v.
std::vector<std::string> state_slot_names(int M);

// Assembly -----------------------------------------------------------------

/// Throws DimensionMismatch if M < 0 or a block is missing.
VectorField assemble_field(const CoupledSystem& sys);

/// The (x, y) subsystem with w frozen to a prescribed path W(t).
VectorField frozen_xy_field(const CoupledSystem& sys, std::function<Vec2(double)> W);

// Validation ---------------------------------------------------------------

struct GammaSample {
  double t = 0.0;
  Vec2 w = Vec2::Zero();
  double gamma = 0.0;
  double residual = 0.0;
};

struct DecompositionReport {
  std::size_t samples = 0;
  double max_residual = 0.0;  // |F - grad Q - (1-g) grad H1 - g grad H2| / (1 + |w|)
  std::size_t gamma_range_violations = 0;
  std::size_t ordering_violations = 0;  // H1 > H2 on the unit circle
  std::size_t q_bound_violations = 0;   // |grad Q| > C~
  double max_q_gradient = 0.0;
  std::vector<GammaSample> gamma_samples;
  bool pass = false;
};

/// Pointwise least-squares gamma on quasi-random (t, w); in quadrant mode
/// samples avoid the coordinate axes.
DecompositionReport validate_decomposition(const CoupledSystem& sys, std::size_t n_samples, double tol,
                                           double w_radius_max = 100.0);

/// Least-squares gamma at one point, clamped to [0,1]; 1/2 where
/// grad H2 = grad H1.
double reconstruct_gamma(const DecompositionData& d, const PlanarField& F, double t, const Vec2& w);

struct PeriodicityReport {
  std::size_t samples = 0;
  double max_time_defect = 0.0;   // |g(t+T) - g(t)| over all blocks
  double max_angle_defect = 0.0;  // |g(x_i + 2 pi) - g(x_i)| for H and P
  bool pass = false;
};

/// Halton sampling, 32 points per sampled axis.
PeriodicityReport validate_periodicity(const CoupledSystem& sys, double tol, double box_radius = 5.0);

// Cutoff -------------------------------------------------------------------

/// eta(xi) = 1 for xi <= rho, 0 for xi >= rho^3, nonincreasing in between
/// with -1/(xi ln xi) <= eta'(xi) <= 0.
class CutoffProfile {
 public:
  double rho() const { return rho_; }
  double eta(double xi) const;
  double eta_prime(double xi) const;

 private:
  friend CutoffProfile build_cutoff(double rho);
  double ramp_integral(double x, double L) const;
  double ramp_rate(double x, double L) const;

  double rho_ = 0.0;
  double s0_ = 0.0;    // ln ln rho
  double s3_ = 0.0;    // ln ln rho^3
  double L0_ = 0.0;    // blending width at rho, in ln ln coordinates
  double L1_ = 0.0;    // blending width at rho^3
  double peak_ = 0.0;  // slope multiplier inside the blending zones
  double alpha_ = 0.0;
};

/// Throws RhoTooSmall unless rho > e.
CutoffProfile build_cutoff(double rho);

/// Replaces F by F_rho = grad Phi_rho + grad Q. Throws MissingDecomposition.
CoupledSystem modify_system(const CoupledSystem& sys, double rho);

/// Phi(t,w) = (1 - gamma) H1(w) + gamma H2(w) with the reconstructed gamma.
double reconstructed_phi(const DecompositionData& d, const PlanarField& F, double t, const Vec2& w);
/// Phi_rho of the three-branch interpolation.
double modified_potential(const CoupledSystem& sys, const CutoffProfile& eta, double t, const Vec2& w);
/// v_rho = eta'(|w|) (Phi - (H1 + H2)/2) w/|w| in the transition band, 0 elsewhere.
Vec2 cutoff_correction(const CoupledSystem& sys, const CutoffProfile& eta, double t, const Vec2& w);

// Presets ------------------------------------------------------------------

/// q'' + A sin q = e(t) + dP/dq,  u'' + f(u) + h(t,u) = dP/du with
/// f(u) = ((mu1+mu2)/2 + (mu2-mu1)/2 cos u) u+ - ((nu1+nu2)/2 + (nu2-nu1)/2 sin(u^3)) u-.
/// Written as x' = p + E(t), p' = -A sin q + dP/dq, u' = v,
/// v' = -f(u) - h(t,u) + dP/du with E a primitive of e.
struct PendulumOscillatorPreset {
  double A = 1.0;
  double mu1 = 1.0, mu2 = 1.0, nu1 = 1.0, nu2 = 1.0;
  double T = 2.0 * 3.14159265358979323846;
  std::function<double(double)> E;          // null means E = 0
  std::function<double(double, double)> h;  // null means h = 0
  double h_bound = 0.0;                     // sup |h|
  /// P(t, x, y, w) with the sign convention of the scalar equations above.
  StateFunction P;  // empty value means P = 0
};

CoupledSystem pendulum_oscillator_system(const PendulumOscillatorPreset& p);

/// Decoupled (P = 0) harmonic rotation w' = (v, -u) with H = y^2/2 - A cos x.
CoupledSystem pendulum_harmonic_system(double A, double T);

}  // namespace hamcouple
