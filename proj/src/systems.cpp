#include "hamcouple/systems.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <numbers>

#include "hamcouple/error.hpp"
#include "hamcouple/numfmt.hpp"
#include "hamcouple/quadrature.hpp"
#include "hamcouple/sampling.hpp"

namespace hamcouple {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Slot layout of state expressions: t, x1..xM, y1..yM, u, v.
std::vector<double>& slot_buffer(std::size_t n) {
  thread_local std::vector<double> buf;
  buf.resize(n);
  return buf;
}

}  // namespace

std::vector<std::string> state_slot_names(int M) {
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(2 * M + 3));
  names.emplace_back("t");
  for (int i = 1; i <= M; ++i) names.push_back("x" + std::to_string(i));
  for (int i = 1; i <= M; ++i) names.push_back("y" + std::to_string(i));
  names.emplace_back("u");
  names.emplace_back("v");
  return names;
}

StateFunction zero_state_function(int M) {
  StateFunction f;
  f.value = [](double, const State&) { return 0.0; };
  f.gradient = [n = 2 * M + 2](double, const State&, State& g) { g.setZero(n); };
  f.identically_zero = true;
  return f;
}

StateFunction expr_state_function(const expr::Expr& e, int M, const expr::Binding& params) {
  const auto names = state_slot_names(M);
  auto c = std::make_shared<const expr::CompiledExpr>(e, names, params);
  const std::size_t n = names.size();
  // Derivatives only for slots the tape actually reads.
  std::vector<std::size_t> wrt;
  for (std::size_t k = 1; k < n; ++k) {
    if (!c->independent_of(k)) wrt.push_back(k);
  }
  StateFunction f;
  f.identically_zero = c->is_constant_zero();
  f.value = [c, n](double t, const State& z) {
    auto& s = slot_buffer(n);
    s[0] = t;
    for (std::size_t k = 1; k < n; ++k) s[k] = z[static_cast<Eigen::Index>(k - 1)];
    return c->eval(s);
  };
  f.gradient = [c, n, wrt](double t, const State& z, State& g) {
    auto& s = slot_buffer(n);
    s[0] = t;
    for (std::size_t k = 1; k < n; ++k) s[k] = z[static_cast<Eigen::Index>(k - 1)];
    thread_local std::vector<double> out;
    out.resize(wrt.size());
    c->eval_grad(s, wrt, out);
    g.setZero(static_cast<Eigen::Index>(n - 1));
    for (std::size_t j = 0; j < wrt.size(); ++j) g[static_cast<Eigen::Index>(wrt[j] - 1)] = out[j];
  };
  return f;
}

PlanarField expr_planar_field(const expr::Expr& fu, const expr::Expr& fv, const expr::Binding& params) {
  static const std::array<std::string, 3> kSlots = {"t", "u", "v"};
  auto cu = std::make_shared<const expr::CompiledExpr>(fu, kSlots, params);
  auto cv = std::make_shared<const expr::CompiledExpr>(fv, kSlots, params);
  return {[cu, cv](double t, const Vec2& w) {
    const std::array<double, 3> s = {t, w[0], w[1]};
    return Vec2(cu->eval(s), cv->eval(s));
  }};
}

PlanarScalar expr_planar_scalar(const expr::Expr& e, const expr::Binding& params) {
  static const std::array<std::string, 3> kSlots = {"t", "u", "v"};
  auto c = std::make_shared<const expr::CompiledExpr>(e, kSlots, params);
  PlanarScalar q;
  q.identically_zero = c->is_constant_zero();
  q.value = [c](double t, const Vec2& w) {
    const std::array<double, 3> s = {t, w[0], w[1]};
    return c->eval(s);
  };
  q.gradient = [c](double t, const Vec2& w) {
    static constexpr std::array<std::size_t, 2> kWrt = {1, 2};
    const std::array<double, 3> s = {t, w[0], w[1]};
    std::array<double, 2> g{};
    c->eval_grad(s, kWrt, g);
    return Vec2(g[0], g[1]);
  };
  return q;
}

PlanarScalar zero_planar_scalar() {
  PlanarScalar q;
  q.value = [](double, const Vec2&) { return 0.0; };
  q.gradient = [](double, const Vec2&) -> Vec2 { return Vec2::Zero(); };
  q.identically_zero = true;
  return q;
}

PlanarField gradient_field(const PlanarHamiltonian& h) {
  return {[g = h.gradient](double, const Vec2& w) { return g(w); }};
}

VectorField assemble_field(const CoupledSystem& sys) {
  if (sys.M < 0) throw DimensionMismatch("M must be nonnegative, got " + std::to_string(sys.M));
  if (!sys.hamiltonian.gradient || !sys.coupling.gradient || !sys.F.eval) {
    throw DimensionMismatch("coupled system is missing a block (H, P or F)");
  }
  const int M = sys.M;
  const int n = sys.dim();
  const bool has_h = !sys.hamiltonian.identically_zero;
  const bool has_p = !sys.coupling.identically_zero;
  VectorField f;
  f.dim = n;
  f.rhs = [M, n, has_h, has_p, H = sys.hamiltonian.gradient, P = sys.coupling.gradient, F = sys.F.eval](
              double t, const State& z, State& dz) {
    thread_local State g;
    dz.setZero(n);
    if (has_h) {
      H(t, z, g);
      if (g.size() != n) throw DimensionMismatch("H gradient has size " + std::to_string(g.size()));
      dz.head(M) += g.segment(M, M);
      dz.segment(M, M) -= g.head(M);
    }
    Vec2 rhs = F(t, Vec2(z[2 * M], z[2 * M + 1]));
    if (has_p) {
      P(t, z, g);
      if (g.size() != n) throw DimensionMismatch("P gradient has size " + std::to_string(g.size()));
      dz.head(M) += g.segment(M, M);
      dz.segment(M, M) -= g.head(M);
      rhs += g.tail(2);
    }
    // J w' = rhs  <=>  w' = -J rhs = (rhs_v, -rhs_u).
    dz[2 * M] = rhs[1];
    dz[2 * M + 1] = -rhs[0];
  };
  return f;
}

VectorField frozen_xy_field(const CoupledSystem& sys, std::function<Vec2(double)> W) {
  if (sys.M < 1) throw DimensionMismatch("frozen (x, y) subsystem needs M >= 1");
  const int M = sys.M;
  VectorField f;
  f.dim = 2 * M;
  f.rhs = [M, H = sys.hamiltonian, P = sys.coupling, W = std::move(W)](double t, const State& z, State& dz) {
    thread_local State full;
    thread_local State g;
    full.resize(2 * M + 2);
    full.head(2 * M) = z;
    const Vec2 w = W(t);
    full[2 * M] = w[0];
    full[2 * M + 1] = w[1];
    dz.setZero(2 * M);
    for (const StateFunction* s : {&H, &P}) {
      if (s->identically_zero) continue;
      s->gradient(t, full, g);
      dz.head(M) += g.segment(M, M);
      dz.tail(M) -= g.head(M);
    }
  };
  return f;
}

// --- decomposition -----------------------------------------------------------

namespace {

struct LeastSquaresGamma {
  double gamma = 0.5;
  double residual = 0.0;
};

LeastSquaresGamma least_squares_gamma(const DecompositionData& d, const PlanarField& F, double t, const Vec2& w) {
  const Vec2 g1 = d.H1.grad(w);
  const Vec2 g2 = d.H2.grad(w);
  const Vec2 r = F(t, w) - d.Q.gradient(t, w) - g1;
  const Vec2 dir = g2 - g1;
  const double dd = dir.squaredNorm();
  LeastSquaresGamma out;
  if (dd <= 1e-28 * (1.0 + g1.squaredNorm() + g2.squaredNorm())) {
    out.gamma = 0.5;
    out.residual = r.norm();
  } else {
    out.gamma = r.dot(dir) / dd;
    out.residual = (r - out.gamma * dir).norm();
  }
  return out;
}

double sample_span(const CoupledSystem& sys) { return sys.mode == SystemMode::Periodic ? sys.T : sys.b - sys.a; }
double sample_start(const CoupledSystem& sys) { return sys.mode == SystemMode::Periodic ? 0.0 : sys.a; }

}  // namespace

double reconstruct_gamma(const DecompositionData& d, const PlanarField& F, double t, const Vec2& w) {
  return std::clamp(least_squares_gamma(d, F, t, w).gamma, 0.0, 1.0);
}

DecompositionReport validate_decomposition(const CoupledSystem& sys, std::size_t n_samples, double tol,
                                           double w_radius_max) {
  if (!sys.decomposition) throw MissingDecomposition();
  const DecompositionData& d = *sys.decomposition;
  DecompositionReport rep;
  rep.samples = n_samples;
  Halton halton(3);
  const double log_lo = std::log(0.1);
  const double log_hi = std::log(w_radius_max);
  for (std::size_t i = 0; i < n_samples; ++i) {
    const auto p = halton.next();
    const double t = sample_start(sys) + p[0] * sample_span(sys);
    const double r = std::exp(log_lo + p[1] * (log_hi - log_lo));
    double angle = kTwoPi * p[2];
    if (d.mode == DecompositionMode::Quadrant) {
      // Interior of the quadrant: keep away from the axes by 1% of a quarter turn.
      const double q = std::floor(angle / (0.5 * std::numbers::pi));
      const double frac = angle / (0.5 * std::numbers::pi) - q;
      angle = (q + 0.01 + 0.98 * frac) * 0.5 * std::numbers::pi;
    }
    const Vec2 w(r * std::cos(angle), r * std::sin(angle));
    const LeastSquaresGamma ls = least_squares_gamma(d, sys.F, t, w);
    const double res = ls.residual / (1.0 + r);
    rep.max_residual = std::max(rep.max_residual, res);
    if (ls.gamma < -tol || ls.gamma > 1.0 + tol) ++rep.gamma_range_violations;
    const double qg = d.Q.gradient(t, w).norm();
    rep.max_q_gradient = std::max(rep.max_q_gradient, qg);
    if (qg > d.q_gradient_bound * (1.0 + tol) + tol) ++rep.q_bound_violations;
    rep.gamma_samples.push_back({t, w, ls.gamma, res});
  }
  for (int k = 0; k < 720; ++k) {
    const double th = kTwoPi * (k + 0.5) / 720.0;
    const Vec2 e(std::cos(th), std::sin(th));
    if (d.H1(e) > d.H2(e) + tol) ++rep.ordering_violations;
  }
  rep.pass = rep.max_residual <= tol && rep.gamma_range_violations == 0 && rep.ordering_violations == 0 &&
             rep.q_bound_violations == 0;
  return rep;
}

PeriodicityReport validate_periodicity(const CoupledSystem& sys, double tol, double box_radius) {
  const int M = sys.M;
  const int n = sys.dim();
  const std::size_t axes = static_cast<std::size_t>(n + 1);
  const std::size_t count = 32 * axes;
  PeriodicityReport rep;
  rep.samples = count;
  Halton halton(axes);
  State z(n);
  State shifted(n);
  for (std::size_t i = 0; i < count; ++i) {
    const auto p = halton.next();
    const double t = sample_start(sys) + p[0] * sample_span(sys);
    for (int j = 0; j < M; ++j) z[j] = kTwoPi * p[1 + j];
    for (int j = M; j < n; ++j) z[j] = box_radius * (2.0 * p[1 + j] - 1.0);
    const Vec2 w(z[2 * M], z[2 * M + 1]);
    auto defect = [](double x, double y) { return std::abs(x - y) / (1.0 + std::abs(x)); };
    if (sys.mode == SystemMode::Periodic) {
      const double T = sys.T;
      double dt = defect(sys.hamiltonian.value(t, z), sys.hamiltonian.value(t + T, z));
      dt = std::max(dt, defect(sys.coupling.value(t, z), sys.coupling.value(t + T, z)));
      const Vec2 f0 = sys.F(t, w);
      const Vec2 f1 = sys.F(t + T, w);
      dt = std::max(dt, (f0 - f1).norm() / (1.0 + f0.norm()));
      if (sys.decomposition) {
        const Vec2 q0 = sys.decomposition->Q.gradient(t, w);
        const Vec2 q1 = sys.decomposition->Q.gradient(t + T, w);
        dt = std::max(dt, (q0 - q1).norm() / (1.0 + q0.norm()));
      }
      rep.max_time_defect = std::max(rep.max_time_defect, dt);
    }
    for (int j = 0; j < M; ++j) {
      shifted = z;
      shifted[j] += kTwoPi;
      double dx = defect(sys.hamiltonian.value(t, z), sys.hamiltonian.value(t, shifted));
      dx = std::max(dx, defect(sys.coupling.value(t, z), sys.coupling.value(t, shifted)));
      rep.max_angle_defect = std::max(rep.max_angle_defect, dx);
    }
  }
  rep.pass = rep.max_time_defect <= tol && rep.max_angle_defect <= tol;
  return rep;
}

// --- cutoff ------------------------------------------------------------------

// In s = ln ln xi the bound reads -1 <= d eta/ds <= 0 and the core profile
// has slope -1/ln 3. Near each end the slope is multiplied by a piecewise
// linear rate r(s): 0 -> R over alpha L, R on the middle, R -> 1 over the last
// alpha L. With alpha = (R - 1)/(R - 1/2) the rate integrates to L, so the
// profile rejoins the core line exactly and R / ln 3 < 1 keeps the bound.

CutoffProfile build_cutoff(double rho) {
  if (!(rho > std::numbers::e)) {
    throw RhoTooSmall("cutoff needs rho > e so that ln ln xi is defined on [rho, rho^3]; got " + fmt17(rho));
  }
  CutoffProfile c;
  c.rho_ = rho;
  const double lr = std::log(rho);
  c.s0_ = std::log(lr);
  c.s3_ = std::log(3.0 * lr);
  c.L0_ = std::log(std::log(1.01 * rho)) - c.s0_;
  c.L1_ = c.s3_ - std::log(3.0 * lr - std::log(1.01));
  c.peak_ = 1.08;
  c.alpha_ = (c.peak_ - 1.0) / (c.peak_ - 0.5);
  return c;
}

double CutoffProfile::ramp_rate(double x, double L) const {
  const double a = alpha_ * L;
  if (x <= 0.0) return 0.0;
  if (x < a) return peak_ * x / a;
  if (x <= L - a) return peak_;
  if (x < L) return peak_ + (1.0 - peak_) * (x - (L - a)) / a;
  return 1.0;
}

double CutoffProfile::ramp_integral(double x, double L) const {
  const double a = alpha_ * L;
  if (x <= 0.0) return 0.0;
  if (x <= a) return 0.5 * peak_ * x * x / a;
  const double first = 0.5 * peak_ * a;
  if (x <= L - a) return first + peak_ * (x - a);
  const double middle = first + peak_ * (L - 2.0 * a);
  if (x <= L) {
    const double y = x - (L - a);
    return middle + peak_ * y + 0.5 * (1.0 - peak_) * y * y / a;
  }
  return L;
}

double CutoffProfile::eta(double xi) const {
  if (xi <= rho_) return 1.0;
  if (xi >= rho_ * rho_ * rho_) return 0.0;
  const double s = std::log(std::log(xi));
  const double ln3 = std::log(3.0);
  double value;
  if (s < s0_ + L0_) {
    value = 1.0 - ramp_integral(s - s0_, L0_) / ln3;
  } else if (s > s3_ - L1_) {
    value = ramp_integral(s3_ - s, L1_) / ln3;
  } else {
    value = 1.0 - (s - s0_) / ln3;
  }
  return std::clamp(value, 0.0, 1.0);
}

double CutoffProfile::eta_prime(double xi) const {
  if (xi <= rho_ || xi >= rho_ * rho_ * rho_) return 0.0;
  const double lx = std::log(xi);
  const double s = std::log(lx);
  double rate;
  if (s < s0_ + L0_) {
    rate = ramp_rate(s - s0_, L0_);
  } else if (s > s3_ - L1_) {
    rate = ramp_rate(s3_ - s, L1_);
  } else {
    rate = 1.0;
  }
  return -rate / (std::log(3.0) * xi * lx);
}

double reconstructed_phi(const DecompositionData& d, const PlanarField& F, double t, const Vec2& w) {
  const double g = reconstruct_gamma(d, F, t, w);
  return (1.0 - g) * d.H1(w) + g * d.H2(w);
}

double modified_potential(const CoupledSystem& sys, const CutoffProfile& eta, double t, const Vec2& w) {
  if (!sys.decomposition) throw MissingDecomposition();
  const DecompositionData& d = *sys.decomposition;
  const double r = w.norm();
  const double avg = 0.5 * (d.H1(w) + d.H2(w));
  if (r >= eta.rho() * eta.rho() * eta.rho()) return avg;
  const double phi = reconstructed_phi(d, sys.F, t, w);
  if (r <= eta.rho()) return phi;
  const double e = eta.eta(r);
  return e * phi + (1.0 - e) * avg;
}

Vec2 cutoff_correction(const CoupledSystem& sys, const CutoffProfile& eta, double t, const Vec2& w) {
  if (!sys.decomposition) throw MissingDecomposition();
  const DecompositionData& d = *sys.decomposition;
  const double r = w.norm();
  if (r <= eta.rho() || r >= eta.rho() * eta.rho() * eta.rho()) return Vec2::Zero();
  const double gap = reconstructed_phi(d, sys.F, t, w) - 0.5 * (d.H1(w) + d.H2(w));
  return eta.eta_prime(r) * gap / r * w;
}

CoupledSystem modify_system(const CoupledSystem& sys, double rho) {
  if (!sys.decomposition) throw MissingDecomposition();
  const CutoffProfile eta = build_cutoff(rho);
  CoupledSystem out = sys;
  out.name = sys.name + " [cutoff rho=" + fmt17(rho) + "]";
  const DecompositionData d = *sys.decomposition;
  const PlanarField F = sys.F;
  out.F.eval = [eta, d, F, sysc = sys](double t, const Vec2& w) -> Vec2 {
    const double r = w.norm();
    if (r <= eta.rho()) return F(t, w);
    const Vec2 gq = d.Q.gradient(t, w);
    const Vec2 avg = 0.5 * (d.H1.grad(w) + d.H2.grad(w));
    if (r >= eta.rho() * eta.rho() * eta.rho()) return avg + gq;
    const double e = eta.eta(r);
    const Vec2 grad_phi = F(t, w) - gq;
    return e * grad_phi + (1.0 - e) * avg + cutoff_correction(sysc, eta, t, w) + gq;
  };
  return out;
}

// --- presets -----------------------------------------------------------------

CoupledSystem pendulum_oscillator_system(const PendulumOscillatorPreset& p) {
  if (!(p.A > 0.0) || !(p.mu1 > 0.0) || !(p.nu1 > 0.0) || p.mu2 < p.mu1 || p.nu2 < p.nu1) {
    throw Error("pendulum/oscillator preset needs A, mu1, nu1 > 0, mu1 <= mu2 and nu1 <= nu2");
  }
  CoupledSystem sys;
  sys.M = 1;
  sys.mode = SystemMode::Periodic;
  sys.T = p.T;
  sys.name = "pendulum+asymmetric oscillator";

  const double A = p.A;
  const auto E = p.E;
  sys.hamiltonian.value = [A, E](double t, const State& z) {
    const double e = E ? E(t) : 0.0;
    return 0.5 * z[1] * z[1] + e * z[1] - A * std::cos(z[0]);
  };
  sys.hamiltonian.gradient = [A, E](double t, const State& z, State& g) {
    g.setZero(4);
    g[0] = A * std::sin(z[0]);
    g[1] = z[1] + (E ? E(t) : 0.0);
  };

  // The scalar equations carry +dP; the Hamiltonian form carries -grad P.
  if (p.P.value && !p.P.identically_zero) {
    sys.coupling.value = [P = p.P.value](double t, const State& z) { return -P(t, z); };
    sys.coupling.gradient = [P = p.P.gradient](double t, const State& z, State& g) {
      P(t, z, g);
      g = -g;
    };
  } else {
    sys.coupling = zero_state_function(1);
  }

  const double ma = 0.5 * (p.mu1 + p.mu2), md = 0.5 * (p.mu2 - p.mu1);
  const double na = 0.5 * (p.nu1 + p.nu2), nd = 0.5 * (p.nu2 - p.nu1);
  const auto h = p.h;
  sys.F.eval = [ma, md, na, nd, h](double t, const Vec2& w) {
    const double u = w[0];
    double f = 0.0;
    if (u > 0.0) f = (ma + md * std::cos(u)) * u;
    if (u < 0.0) f = (na + nd * std::sin(u * u * u)) * u;
    return Vec2(f + (h ? h(t, u) : 0.0), w[1]);
  };

  DecompositionData d;
  d.H1 = asymmetric_hamiltonian({p.mu1, p.nu1});
  d.H2 = asymmetric_hamiltonian({p.mu2, p.nu2});
  d.mode = DecompositionMode::Quadrant;
  d.q_gradient_bound = p.h_bound;
  if (h) {
    d.Q.value = [h](double t, const Vec2& w) {
      if (w[0] == 0.0) return 0.0;
      return integrate_adaptive([&](double s) { return h(t, s); }, 0.0, w[0], 1e-12).value;
    };
    d.Q.gradient = [h](double t, const Vec2& w) { return Vec2(h(t, w[0]), 0.0); };
  } else {
    d.Q = zero_planar_scalar();
  }
  sys.decomposition = std::move(d);
  return sys;
}

CoupledSystem pendulum_harmonic_system(double A, double T) {
  PendulumOscillatorPreset p;
  p.A = A;
  p.T = T;
  CoupledSystem sys = pendulum_oscillator_system(p);
  sys.name = "pendulum+harmonic oscillator";
  return sys;
}

}  // namespace hamcouple
