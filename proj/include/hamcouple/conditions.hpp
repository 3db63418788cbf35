#pragma once

// Numerical checks of the hypotheses: resonance regime of (tau1, tau2, T),
// the bound m on |grad_w P|, Landesman-Lazer integral margins and the three
// twist conditions on the frozen (x, y) subsystem.
//
// The twist checks quantify over a finite ensemble of planar paths W, so
// they can only falsify: a violation disproves the hypothesis, a pass is
// evidence.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hamcouple/homogeneous.hpp"
#include "hamcouple/systems.hpp"

namespace hamcouple {

// Resonance --------------------------------------------------------------

enum class ResonanceTag { Nonresonant, SimpleBelow, SimpleAbove, Double, NotApplicable };

std::string to_string(ResonanceTag t);

struct ResonanceClass {
  ResonanceTag tag = ResonanceTag::NotApplicable;
  int N = 0;  // 0 for NotApplicable
  double tau1 = 0.0;
  double tau2 = 0.0;
  double T = 0.0;

  /// "Double(2)", "NotApplicable", ...
  std::string label() const;
};

/// Equalities hold when |difference| <= tol * T. When several regimes match
/// (tau1 = tau2 = T/N is both SimpleBelow(N) and SimpleAbove(N-1)) the
/// order Double, SimpleBelow, SimpleAbove, Nonresonant decides.
ResonanceClass classify_resonance(double tau1, double tau2, double T, double tol = 1e-12);

// Coupling bound ----------------------------------------------------------

struct SampleBox {
  std::pair<double, double> t{0.0, 1.0};
  std::vector<std::pair<double, double>> x;  // empty: [0, 2 pi) per coordinate
  std::vector<std::pair<double, double>> y;  // empty: [-1, 1] per coordinate
  std::pair<double, double> u{-10.0, 10.0};
  std::pair<double, double> v{-10.0, 10.0};
};

/// Empirical max of |grad_w P| over Halton samples of the box. This is a
/// lower bound for the true supremum.
double estimate_mbar(const CoupledSystem& sys, const SampleBox& box, std::size_t n_samples);
double estimate_mbar(const StateFunction& P, int M, const SampleBox& box, std::size_t n_samples);

// Landesman-Lazer ---------------------------------------------------------

enum class LLSide { Lower, Upper };  // the H1 and H2 conditions

std::string to_string(LLSide s);

struct LLOptions {
  std::size_t theta_points = 64;  // equally spaced in [0, T]
  std::vector<double> lambdas;    // empty: 9 points log-spaced in [1e2, 1e6]
  double s_halfwidth = 0.0;       // 0: tau / 64
  std::size_t s_points = 5;
  std::size_t t_nodes = 512;
  double m_bar = 0.0;
};

struct LLReport {
  LLSide side = LLSide::Lower;
  std::vector<double> theta;
  std::vector<double> lhs;         // estimated integral of the liminf, per theta
  std::vector<double> dispersion;  // integral over t of (max - min) of the tail samples
  double rhs = 0.0;                // m * integral of |phi|
  std::vector<double> margin;      // lhs - rhs
  double min_margin = 0.0;
  bool pass = false;
  std::vector<double> lambdas;
  double s_halfwidth = 0.0;
  std::size_t t_nodes = 0;
  /// The liminf is joint in (lambda, s); the estimate is a product grid of
  /// tail minima, an upper bound that may miss pathological F.
  bool joint_limit_estimated = true;
};

/// Lower: integrand <F(t, l phi(t+s)), phi(t+s)> - 2 l H1(phi(t)) along the
/// reference orbit of H1. Upper: 2 l H2(psi(t)) - <F(t, l psi(t+s)), psi(t+s)>
/// along the orbit of H2, over [0, T] or the Neumann interval [a, b]. Throws
/// IntegrationOverflow if F is not finite.
LLReport ll_margin(const CoupledSystem& sys, LLSide side, const ReferenceOrbit& orbit, const LLOptions& opts);

/// The scalar brackets' limits as functions of t, replacing the numeric
/// liminf: minus(t) for u -> -infinity, plus(t) for u -> +infinity.
struct LLAsymptotes {
  std::function<double(double)> minus;
  std::function<double(double)> plus;
};

struct ScalarLLInput {
  std::function<double(double, double)> g;  // g(t, u) in u'' + g(t, u) = 0
  double mu = 1.0;
  double nu = 1.0;
  double amplitude = 1.0;  // phi(t) = amplitude * base(t + phase)
  double phase = 0.0;
  double T = 0.0;
  std::optional<LLAsymptotes> asymptotes;
  double m_bar = 0.0;
  LLSide side = LLSide::Lower;
  std::vector<double> lambdas;  // empty: as in LLOptions
  double quad_tol = 1e-10;
};

/// Solution of phi'' + mu phi+ - nu phi- = 0 with phi(0) = 0, phi'(0) = 1,
/// extended periodically.
double asymmetric_base_solution(double mu, double nu, double s);

/// Lower: brackets [nu u - g] as u -> -inf on {phi < 0} and [g - mu u] as
/// u -> +inf on {phi > 0}; Upper mirrors them. One theta entry (the phase).
LLReport scalar_ll(const ScalarLLInput& in);

// Twist conditions ----------------------------------------------------------

struct PlanarPath {
  std::string name;
  std::function<Vec2(double)> w;
};

std::vector<PlanarPath> constant_paths(const std::vector<Vec2>& values);
/// w(t) = c + sum_k (a_k cos + b_k sin)(2 pi k t / T), coefficients uniform
/// in [-amplitude / k, amplitude / k].
std::vector<PlanarPath> random_fourier_paths(std::size_t count, double amplitude, int modes, double T,
                                             std::uint64_t seed);
/// The (u, v) components of computed trajectories.
std::vector<PlanarPath> trajectory_paths(const std::vector<Trajectory>& trajs, int M);

struct TwistOptions {
  std::size_t x_grid = 4;     // x(0) points per coordinate in [0, 2 pi)
  std::size_t face_grid = 3;  // points per free y coordinate on a face
  double x_offset = 0.0;      // added to every x(0), e.g. 2 pi k
  double integration_tol = 1e-10;
  double angle_tol = 1e-3;
  unsigned threads = 1;
};

struct TwistSample {
  std::size_t path = 0;
  std::size_t boundary = 0;  // rectangle: 2 i (y_i = a_i) or 2 i + 1 (y_i = b_i)
  State y0;
  State x0;
  State drift;  // x(T) - x(0)
  double quantity = 0.0;
  bool ok = false;
  std::string note;
};

struct TwistReport {
  std::string condition;
  std::vector<std::string> ensemble;
  std::vector<TwistSample> samples;
  std::vector<std::size_t> violations;  // sample indices
  std::size_t integration_failures = 0;
  bool pass = false;
};

struct Rectangle {
  std::vector<std::pair<double, double>> sides;  // [a_i, b_i]
};

/// Faces y_i = a_i need sigma_i drift_i < 0, faces y_i = b_i need > 0.
/// quantity is sigma_i drift_i.
TwistReport twist_check(const CoupledSystem& sys, const Rectangle& D, const std::vector<int>& sigma,
                        const std::vector<PlanarPath>& ensemble, const TwistOptions& opts = {});

struct ConvexBody {
  int M = 1;
  /// Boundary point in the given unit direction.
  std::function<State(const State&)> boundary_point;
  /// Outward unit normal at a boundary point.
  std::function<State(const State&)> normal;
};

ConvexBody ellipsoid(const State& center, const State& semi_axes);

/// Unit directions: +-1 for M = 1, n equally spaced angles for M = 2, n
/// normalized Halton points otherwise.
std::vector<State> boundary_directions(int M, std::size_t n);

struct BoundaryOptions {
  std::size_t boundary_grid = 16;
  std::size_t x_grid = 4;
  double x_offset = 0.0;
  double integration_tol = 1e-10;
  double angle_tol = 1e-3;
  unsigned threads = 1;
};

/// Violation when drift = 0 or its angle to sigma nu(y0) is below angle_tol.
/// quantity is that angle.
TwistReport avoiding_rays_check(const CoupledSystem& sys, const ConvexBody& D, int sigma,
                                const std::vector<PlanarPath>& ensemble, const BoundaryOptions& opts = {});

/// Needs <drift, A nu(y0)> > 0; quantity is the inner product. Throws
/// SingularMatrix unless A is symmetric and regular.
TwistReport indefinite_twist_check(const CoupledSystem& sys, const ConvexBody& D, const Matrix& A,
                                   const std::vector<PlanarPath>& ensemble, const BoundaryOptions& opts = {});

}  // namespace hamcouple
