#include "hamcouple/homogeneous.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "hamcouple/error.hpp"
#include "hamcouple/numfmt.hpp"
#include "hamcouple/quadrature.hpp"

namespace hamcouple {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr std::array<double, 5> kQuarterBreaks = {0.0, 0.5 * std::numbers::pi, std::numbers::pi,
                                                 1.5 * std::numbers::pi, kTwoPi};
}  // namespace

PlanarHamiltonian harmonic_hamiltonian() {
  PlanarHamiltonian h;
  h.name = "harmonic";
  h.value = [](const Vec2& w) { return 0.5 * w.squaredNorm(); };
  h.gradient = [](const Vec2& w) { return w; };
  h.claims_homogeneous2 = true;
  h.claims_positive = true;
  return h;
}

PlanarHamiltonian asymmetric_hamiltonian(AsymmetricParams p) {
  if (!(p.mu > 0.0) || !(p.nu > 0.0)) {
    throw Error("asymmetric oscillator needs mu > 0 and nu > 0 (got " + fmt17(p.mu) + ", " + fmt17(p.nu) + ")");
  }
  PlanarHamiltonian h;
  h.name = "asymmetric(" + fmt17(p.mu) + "," + fmt17(p.nu) + ")";
  h.value = [p](const Vec2& w) {
    const double up = w[0] > 0.0 ? w[0] : 0.0;
    const double um = w[0] < 0.0 ? -w[0] : 0.0;
    return 0.5 * (p.mu * up * up + p.nu * um * um + w[1] * w[1]);
  };
  h.gradient = [p](const Vec2& w) {
    const double k = w[0] > 0.0 ? p.mu : p.nu;
    return Vec2(k * w[0], w[1]);
  };
  h.claims_homogeneous2 = true;
  h.claims_positive = true;
  return h;
}

PlanarHamiltonian quadratic_form_hamiltonian(double a, double b, double c) {
  if (!(a > 0.0) || !(a * c - b * b > 0.0)) throw Error("quadratic form is not positive definite");
  PlanarHamiltonian h;
  h.name = "quadratic(" + fmt17(a) + "," + fmt17(b) + "," + fmt17(c) + ")";
  h.value = [a, b, c](const Vec2& w) { return 0.5 * (a * w[0] * w[0] + 2.0 * b * w[0] * w[1] + c * w[1] * w[1]); };
  h.gradient = [a, b, c](const Vec2& w) { return Vec2(a * w[0] + b * w[1], b * w[0] + c * w[1]); };
  h.claims_homogeneous2 = true;
  h.claims_positive = true;
  return h;
}

PlanarHamiltonian expr_hamiltonian(const expr::Expr& e, const expr::Binding& params, bool claims_homogeneous2,
                                   bool claims_positive) {
  static const std::array<std::string, 2> kSlots = {"u", "v"};
  auto compiled = std::make_shared<const expr::CompiledExpr>(e, kSlots, params);
  PlanarHamiltonian h;
  h.name = e.to_string();
  h.value = [compiled](const Vec2& w) {
    const std::array<double, 2> slots = {w[0], w[1]};
    return compiled->eval(slots);
  };
  h.gradient = [compiled](const Vec2& w) {
    static constexpr std::array<std::size_t, 2> kWrt = {0, 1};
    const std::array<double, 2> slots = {w[0], w[1]};
    std::array<double, 2> g{};
    compiled->eval_grad(slots, kWrt, g);
    return Vec2(g[0], g[1]);
  };
  h.claims_homogeneous2 = claims_homogeneous2;
  h.claims_positive = claims_positive;
  return h;
}

PlanarHamiltonian scaled_hamiltonian(const PlanarHamiltonian& h, double c) {
  PlanarHamiltonian out = h;
  out.name = fmt17(c) + "*" + h.name;
  out.value = [v = h.value, c](const Vec2& w) { return c * v(w); };
  out.gradient = [g = h.gradient, c](const Vec2& w) -> Vec2 { return c * g(w); };
  out.claims_positive = h.claims_positive && c > 0.0;
  return out;
}

HomogeneityReport check_homogeneous(const PlanarHamiltonian& h, std::size_t n_samples, double tol,
                                    std::uint64_t seed) {
  if (n_samples == 0) throw Error("check_homogeneous needs at least one sample");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> radius(0.1, 10.0);
  std::uniform_real_distribution<double> angle(0.0, kTwoPi);
  constexpr std::array<double, 3> kLambdas = {0.5, 2.0, 10.0};

  HomogeneityReport rep;
  rep.samples = n_samples;
  for (std::size_t i = 0; i < n_samples; ++i) {
    const double r = radius(rng);
    const double a = angle(rng);
    const Vec2 w(r * std::cos(a), r * std::sin(a));
    const double hw = h(w);
    const double r2 = w.squaredNorm();
    rep.max_euler_residual = std::max(rep.max_euler_residual, std::abs(h.grad(w).dot(w) - 2.0 * hw) / r2);
    for (double lam : kLambdas) {
      const double res = std::abs(h(lam * w) - lam * lam * hw) / (lam * lam * r2);
      rep.max_homogeneity_residual = std::max(rep.max_homogeneity_residual, res);
    }
    if (!(hw > 0.0)) ++rep.positivity_violations;
  }
  rep.pass = rep.max_euler_residual < tol && rep.max_homogeneity_residual < tol && rep.positivity_violations == 0;
  return rep;
}

namespace {

std::function<double(double)> period_integrand(const PlanarHamiltonian& h) {
  return [&h](double theta) {
    const double value = h(Vec2(std::cos(theta), std::sin(theta)));
    if (!(value > 0.0)) {
      throw NonpositiveHamiltonian("H(cos t, sin t) = " + fmt17(value) + " <= 0 at t = " + fmt17(theta));
    }
    return 0.5 / value;
  };
}

}  // namespace

double minimal_period(const PlanarHamiltonian& h, double quad_tol) {
  return integrate_piecewise(period_integrand(h), kQuarterBreaks, quad_tol).value;
}

double asym_period(AsymmetricParams p) {
  if (!(p.mu > 0.0) || !(p.nu > 0.0)) throw Error("asym_period needs mu > 0 and nu > 0");
  return std::numbers::pi / std::sqrt(p.mu) + std::numbers::pi / std::sqrt(p.nu);
}

HalfPeriods half_periods(const PlanarHamiltonian& h, double quad_tol) {
  const auto f = period_integrand(h);
  HalfPeriods out;
  out.tau_plus = integrate_piecewise(f, std::span(kQuarterBreaks).subspan(0, 3), 0.5 * quad_tol).value;
  out.tau_minus = integrate_piecewise(f, std::span(kQuarterBreaks).subspan(2, 3), 0.5 * quad_tol).value;
  return out;
}

VectorField planar_flow(const PlanarHamiltonian& h) {
  VectorField f;
  f.dim = 2;
  f.rhs = [g = h.gradient](double, const State& z, State& dz) {
    const Vec2 grad = g(Vec2(z[0], z[1]));
    dz[0] = grad[1];
    dz[1] = -grad[0];
  };
  return f;
}

Vec2 ReferenceOrbit::at(double t) const {
  double s = std::fmod(t, tau_);
  if (s < 0.0) s += tau_;
  const State z = traj_->query(s);
  return Vec2(z[0], z[1]);
}

double ReferenceOrbit::clockwise_angle(double s) const {
  s = std::clamp(s, 0.0, tau_);
  auto it = std::upper_bound(table_s_.begin(), table_s_.end(), s);
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(it - table_s_.begin()), table_s_.size()) - 1;
  const State z = traj_->query(s);
  const double raw = -std::atan2(z[1], z[0]);
  return table_angle_[k] + std::remainder(raw - table_angle_[k], kTwoPi);
}

ReferenceOrbit reference_orbit(const PlanarHamiltonian& h, double tol) {
  ReferenceOrbit orbit;
  orbit.h_ = h;
  orbit.tau_ = minimal_period(h, 1e-13);
  const Vec2 e(1.0, 0.0);
  State w0(2);
  w0 << 1.0 / std::sqrt(2.0 * h(e)), 0.0;

  const VectorField f = planar_flow(h);
  double inner_tol = tol * 1e-2;
  for (int attempt = 0;; ++attempt) {
    auto traj = std::make_shared<Trajectory>(integrate(f, w0, 0.0, orbit.tau_, std::max(inner_tol, 1e-15)));
    double drift = 0.0;
    const auto& mesh = traj->mesh();
    for (std::size_t k = 0; k + 1 < mesh.size(); ++k) {
      for (int j = 0; j < 4; ++j) {
        const State z = traj->query(mesh[k] + (mesh[k + 1] - mesh[k]) * j / 4.0);
        drift = std::max(drift, std::abs(h(Vec2(z[0], z[1])) - 0.5));
      }
    }
    const double closure = (traj->final_state() - w0).norm();
    if ((drift <= tol && closure <= tol) || attempt == 4 || inner_tol <= 1e-15) {
      if (drift > tol || closure > tol) {
        throw IntegrationFailure(IntegrationFailure::Kind::Accuracy,
                                 "reference orbit energy drift " + fmt17(drift) + " / closure " + fmt17(closure) +
                                     " exceeds " + fmt17(tol));
      }
      orbit.traj_ = std::move(traj);
      orbit.energy_drift_ = drift;
      orbit.closure_error_ = closure;
      break;
    }
    inner_tol *= 0.1;
  }

  // Angle table: unwrapped clockwise angle on a refined sampling of the mesh.
  const auto& mesh = orbit.traj_->mesh();
  double prev = 0.0;
  for (std::size_t k = 0; k + 1 < mesh.size(); ++k) {
    for (int j = 0; j < 4; ++j) {
      const double s = mesh[k] + (mesh[k + 1] - mesh[k]) * j / 4.0;
      const State z = orbit.traj_->query(s);
      const double raw = -std::atan2(z[1], z[0]);
      const double a = orbit.table_s_.empty() ? 0.0 : prev + std::remainder(raw - prev, kTwoPi);
      if (!orbit.table_s_.empty() && !(a > prev)) throw Error("reference orbit angle is not strictly clockwise");
      orbit.table_s_.push_back(s);
      orbit.table_angle_.push_back(a);
      prev = a;
    }
  }
  orbit.table_s_.push_back(orbit.tau_);
  orbit.table_angle_.push_back(kTwoPi);
  return orbit;
}

double angle_to_orbit_time(const ReferenceOrbit& orbit, double angle) {
  double target = std::fmod(-angle, kTwoPi);
  if (target < 0.0) target += kTwoPi;
  if (target >= kTwoPi) target = 0.0;
  if (target == 0.0) return 0.0;
  const auto& ang = orbit.table_angle_;
  auto it = std::upper_bound(ang.begin(), ang.end(), target);
  const std::size_t k = static_cast<std::size_t>(it - ang.begin()) - 1;
  double lo = orbit.table_s_[k];
  double hi = orbit.table_s_[std::min(k + 1, ang.size() - 1)];
  for (int iter = 0; iter < 80 && hi - lo > 1e-15 * orbit.tau_; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (orbit.clockwise_angle(mid) < target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace hamcouple
