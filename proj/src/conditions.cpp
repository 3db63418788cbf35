#include "hamcouple/conditions.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "hamcouple/error.hpp"
#include "hamcouple/numfmt.hpp"
#include "hamcouple/quadrature.hpp"
#include "hamcouple/sampling.hpp"
#include "hamcouple/solvers.hpp"

namespace hamcouple {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

bool approx_equal(double a, double b, double tol) { return std::abs(a - b) <= tol; }
bool strictly_less(double a, double b, double tol) { return a < b - tol; }

std::vector<double> default_lambdas(const std::vector<double>& given) {
  return given.empty() ? logspace(2.0, 6.0, 9) : given;
}

// Calls visit(index_vector) for every point of an n^dims grid, last index fastest.
template <class Visit>
void for_each_index(std::size_t dims, std::size_t n, Visit&& visit) {
  std::vector<std::size_t> idx(dims, 0);
  if (n == 0) return;
  while (true) {
    visit(idx);
    std::size_t k = dims;
    while (k > 0) {
      --k;
      if (++idx[k] < n) break;
      idx[k] = 0;
      if (k == 0) return;
    }
    if (dims == 0) return;
  }
}

std::vector<double> x_grid_values(std::size_t n, double offset) {
  std::vector<double> xs(n);
  for (std::size_t k = 0; k < n; ++k) xs[k] = kTwoPi * static_cast<double>(k) / static_cast<double>(n) + offset;
  return xs;
}

std::vector<State> x_grid_points(int M, std::size_t n, double offset) {
  const auto xs = x_grid_values(std::max<std::size_t>(n, 1), offset);
  std::vector<State> out;
  for_each_index(static_cast<std::size_t>(M), xs.size(), [&](const std::vector<std::size_t>& idx) {
    State x(M);
    for (int i = 0; i < M; ++i) x[i] = xs[idx[static_cast<std::size_t>(i)]];
    out.push_back(x);
  });
  return out;
}

struct DriftOutcome {
  State drift;
  bool failed = false;
  std::string note;
};

DriftOutcome frozen_drift(const CoupledSystem& sys, const PlanarPath& path, const State& x0, const State& y0,
                          double tol) {
  DriftOutcome out;
  const int M = sys.M;
  State z0(2 * M);
  z0.head(M) = x0;
  z0.tail(M) = y0;
  try {
    const VectorField f = frozen_xy_field(sys, path.w);
    const State z1 = flow_map(f, z0, sys.T, tol);
    out.drift = z1.head(M) - x0;
  } catch (const IntegrationFailure& e) {
    out.failed = true;
    out.note = std::string("not defined on [0, T]: ") + e.what();
    out.drift = State::Constant(M, std::numeric_limits<double>::quiet_NaN());
  } catch (const DomainError& e) {
    out.failed = true;
    out.note = std::string("domain error: ") + e.what();
    out.drift = State::Constant(M, std::numeric_limits<double>::quiet_NaN());
  }
  return out;
}

void require_periodic(const CoupledSystem& sys, const char* what) {
  if (sys.mode != SystemMode::Periodic) throw Error(std::string(what) + " requires a periodic-mode system");
  if (!(sys.T > 0.0)) throw Error(std::string(what) + " requires T > 0");
}

void finish(TwistReport& r, const std::vector<PlanarPath>& ensemble) {
  for (const auto& p : ensemble) r.ensemble.push_back(p.name);
  for (std::size_t i = 0; i < r.samples.size(); ++i) {
    if (!r.samples[i].ok) r.violations.push_back(i);
  }
  r.pass = r.violations.empty() && !r.samples.empty();
}

}  // namespace

// --- resonance ---------------------------------------------------------------

std::string to_string(ResonanceTag t) {
  switch (t) {
    case ResonanceTag::Nonresonant: return "Nonresonant";
    case ResonanceTag::SimpleBelow: return "SimpleBelow";
    case ResonanceTag::SimpleAbove: return "SimpleAbove";
    case ResonanceTag::Double: return "Double";
    case ResonanceTag::NotApplicable: return "NotApplicable";
  }
  return "?";
}

std::string ResonanceClass::label() const {
  if (tag == ResonanceTag::NotApplicable) return to_string(tag);
  return to_string(tag) + "(" + std::to_string(N) + ")";
}

ResonanceClass classify_resonance(double tau1, double tau2, double T, double tol) {
  if (!(tau1 > 0.0 && tau2 > 0.0 && T > 0.0)) throw Error("classify_resonance needs positive tau1, tau2, T");
  ResonanceClass rc;
  rc.tau1 = tau1;
  rc.tau2 = tau2;
  rc.T = T;
  const double e = tol * T;
  if (strictly_less(tau1, tau2, e)) return rc;  // H1 <= H2 forces tau2 <= tau1

  const int n_max = static_cast<int>(std::ceil(T / tau2)) + 1;
  std::optional<int> below, above, nonres;
  for (int N = 1; N <= n_max; ++N) {
    const double lo = T / (N + 1);
    const double hi = T / N;
    const bool t2_lo = approx_equal(tau2, lo, e);
    const bool t1_hi = approx_equal(tau1, hi, e);
    if (t2_lo && t1_hi) {
      rc.tag = ResonanceTag::Double;
      rc.N = N;
      return rc;
    }
    if (t1_hi && strictly_less(lo, tau2, e) && !below) below = N;
    if (t2_lo && strictly_less(tau1, hi, e) && !above) above = N;
    if (strictly_less(lo, tau2, e) && strictly_less(tau1, hi, e) && !nonres) nonres = N;
  }
  if (below) {
    rc.tag = ResonanceTag::SimpleBelow;
    rc.N = *below;
  } else if (above) {
    rc.tag = ResonanceTag::SimpleAbove;
    rc.N = *above;
  } else if (nonres) {
    rc.tag = ResonanceTag::Nonresonant;
    rc.N = *nonres;
  }
  return rc;
}

// --- m bar ---------------------------------------------------------------------

double estimate_mbar(const StateFunction& P, int M, const SampleBox& box, std::size_t n_samples) {
  if (P.identically_zero) return 0.0;
  const std::size_t dim = static_cast<std::size_t>(2 * M + 3);
  auto range = [](const std::vector<std::pair<double, double>>& r, int i, std::pair<double, double> fallback) {
    return r.empty() ? fallback : r.at(static_cast<std::size_t>(i));
  };
  Halton halton(dim);
  State z(2 * M + 2), g(2 * M + 2);
  double best = 0.0;
  for (std::size_t k = 0; k < n_samples; ++k) {
    const auto p = halton.next();
    const double t = box.t.first + p[0] * (box.t.second - box.t.first);
    for (int i = 0; i < M; ++i) {
      const auto [xa, xb] = range(box.x, i, {0.0, kTwoPi});
      const auto [ya, yb] = range(box.y, i, {-1.0, 1.0});
      z[i] = xa + p[1 + i] * (xb - xa);
      z[M + i] = ya + p[1 + M + i] * (yb - ya);
    }
    z[2 * M] = box.u.first + p[1 + 2 * M] * (box.u.second - box.u.first);
    z[2 * M + 1] = box.v.first + p[2 + 2 * M] * (box.v.second - box.v.first);
    P.gradient(t, z, g);
    best = std::max(best, std::hypot(g[2 * M], g[2 * M + 1]));
  }
  return best;
}

double estimate_mbar(const CoupledSystem& sys, const SampleBox& box, std::size_t n_samples) {
  return estimate_mbar(sys.coupling, sys.M, box, n_samples);
}

// --- Landesman-Lazer -----------------------------------------------------------

std::string to_string(LLSide s) { return s == LLSide::Lower ? "lower" : "upper"; }

LLReport ll_margin(const CoupledSystem& sys, LLSide side, const ReferenceOrbit& orbit, const LLOptions& opts) {
  if (opts.t_nodes < 2 || opts.s_points < 1 || opts.theta_points < 1) throw Error("ll_margin grid sizes too small");
  // Neumann mode integrates over [a, b] instead of [0, T].
  const bool periodic = sys.mode == SystemMode::Periodic;
  const double t0 = periodic ? 0.0 : sys.a;
  const double T = periodic ? sys.T : sys.b - sys.a;
  if (!(T > 0.0)) throw Error("ll_margin needs a nonempty time interval");
  const double tau = orbit.period();
  const PlanarHamiltonian& H = orbit.hamiltonian();

  LLReport rep;
  rep.side = side;
  rep.lambdas = default_lambdas(opts.lambdas);
  rep.s_halfwidth = opts.s_halfwidth > 0.0 ? opts.s_halfwidth : tau / 64.0;
  rep.t_nodes = opts.t_nodes;
  rep.theta = linspace(t0, t0 + T, opts.theta_points);

  const auto ts = linspace(t0, t0 + T, opts.t_nodes);
  const double h = T / static_cast<double>(opts.t_nodes - 1);
  const std::size_t n_l = rep.lambdas.size();
  const std::size_t tail = n_l / 2;
  const double lambda0 = rep.lambdas.front();

  std::vector<Vec2> phi_t(ts.size());
  std::vector<double> abs_phi(ts.size());
  for (std::size_t j = 0; j < ts.size(); ++j) {
    phi_t[j] = orbit.at(ts[j]);
    abs_phi[j] = phi_t[j].norm();
  }
  rep.rhs = opts.m_bar * trapezoid(abs_phi, h);

  std::vector<double> lo(ts.size()), spread(ts.size());
  for (double theta : rep.theta) {
    for (std::size_t j = 0; j < ts.size(); ++j) {
      const double t = ts[j];
      double mn = std::numeric_limits<double>::infinity();
      double mx = -mn;
      for (std::size_t k = tail; k < n_l; ++k) {
        const double lam = rep.lambdas[k];
        const double dk = rep.s_halfwidth * std::sqrt(lambda0 / lam);
        for (std::size_t q = 0; q < opts.s_points; ++q) {
          const double s =
              opts.s_points == 1 ? theta : theta - dk + 2.0 * dk * static_cast<double>(q) / (opts.s_points - 1);
          // Project onto the exact level 2 H = 1 (H is 2-homogeneous).
          Vec2 p = orbit.at(t + s);
          p /= std::sqrt(2.0 * H(p));
          Vec2 f;
          try {
            f = sys.F(t, lam * p);
          } catch (const DomainError& e) {
            throw IntegrationOverflow(std::string("F failed at lambda = ") + fmt17(lam) + ": " + e.what());
          }
          if (!std::isfinite(f[0]) || !std::isfinite(f[1])) {
            throw IntegrationOverflow("F is not finite at lambda = " + fmt17(lam) + ", t = " + fmt17(t));
          }
          // With 2 H(phi) = 1 exactly the lambda-amplified orbit error stays
          // out of the integrand.
          const double e = side == LLSide::Lower ? f.dot(p) - lam : lam - f.dot(p);
          mn = std::min(mn, e);
          mx = std::max(mx, e);
        }
      }
      lo[j] = mn;
      spread[j] = mx - mn;
    }
    rep.lhs.push_back(trapezoid(lo, h));
    rep.dispersion.push_back(trapezoid(spread, h));
    rep.margin.push_back(rep.lhs.back() - rep.rhs);
  }
  rep.min_margin = *std::min_element(rep.margin.begin(), rep.margin.end());
  rep.pass = rep.min_margin > 0.0;
  return rep;
}

double asymmetric_base_solution(double mu, double nu, double s) {
  const double half_plus = std::numbers::pi / std::sqrt(mu);
  const double period = half_plus + std::numbers::pi / std::sqrt(nu);
  double r = std::fmod(s, period);
  if (r < 0.0) r += period;
  if (r < half_plus) return std::sin(std::sqrt(mu) * r) / std::sqrt(mu);
  return -std::sin(std::sqrt(nu) * (r - half_plus)) / std::sqrt(nu);
}

LLReport scalar_ll(const ScalarLLInput& in) {
  if (!(in.mu > 0.0 && in.nu > 0.0)) throw Error("scalar_ll needs mu, nu > 0");
  if (!(in.T > 0.0)) throw Error("scalar_ll needs T > 0");
  if (in.amplitude == 0.0) throw Error("scalar_ll needs a nontrivial phi");
  if (!in.g && !in.asymptotes) throw Error("scalar_ll needs g or asymptotes");

  const double half_plus = std::numbers::pi / std::sqrt(in.mu);
  const double period = half_plus + std::numbers::pi / std::sqrt(in.nu);
  auto phi = [&](double t) { return in.amplitude * asymmetric_base_solution(in.mu, in.nu, t + in.phase); };

  // Zeros of phi in [0, T]: t + phase = k period or k period + half_plus.
  std::vector<double> breaks = {0.0, in.T};
  const long k0 = static_cast<long>(std::floor(in.phase / period)) - 1;
  for (long k = k0;; ++k) {
    const double base = static_cast<double>(k) * period - in.phase;
    if (base > in.T) break;
    for (double z : {base, base + half_plus}) {
      if (z > 0.0 && z < in.T) breaks.push_back(z);
    }
  }
  std::sort(breaks.begin(), breaks.end());

  LLReport rep;
  rep.side = in.side;
  rep.theta = {in.phase};
  rep.lambdas = default_lambdas(in.lambdas);
  rep.joint_limit_estimated = false;
  const std::size_t tail = rep.lambdas.size() / 2;
  const bool lower = in.side == LLSide::Lower;

  // Bracket on the negative side (u -> -inf) and on the positive side.
  auto bracket = [&](double t, double u, bool positive) {
    const double g = in.g(t, u);
    if (!std::isfinite(g)) throw IntegrationOverflow("g is not finite at u = " + fmt17(u));
    if (positive) return lower ? g - in.mu * u : in.mu * u - g;
    return lower ? in.nu * u - g : g - in.nu * u;
  };
  auto tail_range = [&](double t, bool positive) {
    double mn = std::numeric_limits<double>::infinity(), mx = -mn;
    for (std::size_t k = tail; k < rep.lambdas.size(); ++k) {
      const double b = bracket(t, positive ? rep.lambdas[k] : -rep.lambdas[k], positive);
      mn = std::min(mn, b);
      mx = std::max(mx, b);
    }
    return std::pair{mn, mx};
  };
  auto liminf = [&](double t, bool positive) {
    if (in.asymptotes) return positive ? in.asymptotes->plus(t) : in.asymptotes->minus(t);
    return tail_range(t, positive).first;
  };

  const auto lhs = integrate_piecewise(
      [&](double t) {
        const double p = phi(t);
        if (p == 0.0) return 0.0;
        return liminf(t, p > 0.0) * std::abs(p);
      },
      breaks, in.quad_tol);
  double disp = 0.0;
  if (!in.asymptotes) {
    disp = integrate_piecewise(
               [&](double t) {
                 const double p = phi(t);
                 if (p == 0.0) return 0.0;
                 const auto [mn, mx] = tail_range(t, p > 0.0);
                 return (mx - mn) * std::abs(p);
               },
               breaks, in.quad_tol)
               .value;
  }
  const double abs_int = integrate_piecewise([&](double t) { return std::abs(phi(t)); }, breaks, in.quad_tol).value;

  rep.lhs = {lhs.value};
  rep.dispersion = {disp};
  rep.rhs = in.m_bar * abs_int;
  rep.margin = {lhs.value - rep.rhs};
  rep.min_margin = rep.margin.front();
  rep.pass = rep.min_margin > 0.0;
  return rep;
}

// --- ensembles -----------------------------------------------------------------

std::vector<PlanarPath> constant_paths(const std::vector<Vec2>& values) {
  std::vector<PlanarPath> out;
  for (const Vec2& c : values) {
    out.push_back({"constant(" + fmt17(c[0]) + "," + fmt17(c[1]) + ")", [c](double) { return c; }});
  }
  return out;
}

std::vector<PlanarPath> random_fourier_paths(std::size_t count, double amplitude, int modes, double T,
                                             std::uint64_t seed) {
  if (!(T > 0.0)) throw Error("random_fourier_paths needs T > 0");
  std::mt19937_64 rng(seed);
  std::vector<PlanarPath> out;
  for (std::size_t n = 0; n < count; ++n) {
    // Rows: constant term, then (cos, sin) pairs per mode; columns u, v.
    Eigen::MatrixXd c(2 * modes + 1, 2);
    for (int r = 0; r < c.rows(); ++r) {
      const double k = r == 0 ? 1.0 : static_cast<double>((r + 1) / 2);
      std::uniform_real_distribution<double> d(-amplitude / k, amplitude / k);
      for (int col = 0; col < 2; ++col) c(r, col) = d(rng);
    }
    const double omega = kTwoPi / T;
    out.push_back({"fourier#" + std::to_string(n), [c, modes, omega](double t) {
                     Vec2 w(c(0, 0), c(0, 1));
                     for (int k = 1; k <= modes; ++k) {
                       const double ck = std::cos(omega * k * t), sk = std::sin(omega * k * t);
                       w[0] += c(2 * k - 1, 0) * ck + c(2 * k, 0) * sk;
                       w[1] += c(2 * k - 1, 1) * ck + c(2 * k, 1) * sk;
                     }
                     return w;
                   }});
  }
  return out;
}

std::vector<PlanarPath> trajectory_paths(const std::vector<Trajectory>& trajs, int M) {
  std::vector<PlanarPath> out;
  for (std::size_t n = 0; n < trajs.size(); ++n) {
    auto tr = std::make_shared<const Trajectory>(trajs[n]);
    if (tr->dim() != 2 * M + 2) throw DimensionMismatch("trajectory dimension does not match 2M + 2");
    out.push_back({"trajectory#" + std::to_string(n), [tr, M](double t) {
                     const State z = tr->query(std::clamp(t, tr->t0(), tr->t1()));
                     return Vec2(z[2 * M], z[2 * M + 1]);
                   }});
  }
  return out;
}

// --- twist checks ----------------------------------------------------------------

TwistReport twist_check(const CoupledSystem& sys, const Rectangle& D, const std::vector<int>& sigma,
                        const std::vector<PlanarPath>& ensemble, const TwistOptions& opts) {
  require_periodic(sys, "twist_check");
  const int M = sys.M;
  if (static_cast<int>(D.sides.size()) != M || static_cast<int>(sigma.size()) != M) {
    throw DimensionMismatch("rectangle and sigma must have M entries");
  }
  for (int s : sigma) {
    if (s != 1 && s != -1) throw Error("sigma entries must be +1 or -1");
  }
  for (const auto& [a, b] : D.sides) {
    if (!(a < b)) throw Error("rectangle needs a_i < b_i");
  }

  TwistReport rep;
  rep.condition = "twist";
  const auto xs = x_grid_points(M, opts.x_grid, opts.x_offset);
  for (std::size_t p = 0; p < ensemble.size(); ++p) {
    for (int i = 0; i < M; ++i) {
      for (int side = 0; side < 2; ++side) {
        for_each_index(static_cast<std::size_t>(M - 1), std::max<std::size_t>(opts.face_grid, 1),
                       [&](const std::vector<std::size_t>& idx) {
                         State y(M);
                         std::size_t q = 0;
                         for (int j = 0; j < M; ++j) {
                           const auto [a, b] = D.sides[static_cast<std::size_t>(j)];
                           if (j == i) {
                             y[j] = side == 0 ? a : b;
                             continue;
                           }
                           const std::size_t n = std::max<std::size_t>(opts.face_grid, 1);
                           y[j] = n == 1 ? 0.5 * (a + b) : a + (b - a) * static_cast<double>(idx[q]) / (n - 1);
                           ++q;
                         }
                         for (const State& x : xs) {
                           TwistSample s;
                           s.path = p;
                           s.boundary = static_cast<std::size_t>(2 * i + side);
                           s.y0 = y;
                           s.x0 = x;
                           rep.samples.push_back(std::move(s));
                         }
                       });
      }
    }
  }

  parallel_for(rep.samples.size(), opts.threads, [&](std::size_t k) {
    TwistSample& s = rep.samples[k];
    const auto d = frozen_drift(sys, ensemble[s.path], s.x0, s.y0, opts.integration_tol);
    s.drift = d.drift;
    s.note = d.note;
    if (d.failed) return;
    const int i = static_cast<int>(s.boundary / 2);
    s.quantity = sigma[static_cast<std::size_t>(i)] * d.drift[i];
    s.ok = (s.boundary % 2 == 0) ? s.quantity < 0.0 : s.quantity > 0.0;
  });
  for (const auto& s : rep.samples) {
    if (!s.note.empty()) ++rep.integration_failures;
  }
  finish(rep, ensemble);
  return rep;
}

ConvexBody ellipsoid(const State& center, const State& semi_axes) {
  if (center.size() != semi_axes.size() || center.size() < 1) throw DimensionMismatch("ellipsoid dimensions");
  if ((semi_axes.array() <= 0.0).any()) throw Error("ellipsoid semi-axes must be positive");
  ConvexBody b;
  b.M = static_cast<int>(center.size());
  b.boundary_point = [center, semi_axes](const State& d) -> State {
    // Scale so that sum (y_i / a_i)^2 = 1 along direction d.
    const double r = 1.0 / d.cwiseQuotient(semi_axes).norm();
    return center + r * d;
  };
  b.normal = [center, semi_axes](const State& y) -> State {
    const State n = (y - center).cwiseQuotient(semi_axes.cwiseProduct(semi_axes));
    return n / n.norm();
  };
  return b;
}

std::vector<State> boundary_directions(int M, std::size_t n) {
  std::vector<State> out;
  if (M == 1) {
    out.push_back(State::Constant(1, -1.0));
    out.push_back(State::Constant(1, 1.0));
    return out;
  }
  if (M == 2) {
    for (std::size_t k = 0; k < n; ++k) {
      const double a = kTwoPi * static_cast<double>(k) / static_cast<double>(n);
      State d(2);
      d << std::cos(a), std::sin(a);
      out.push_back(d);
    }
    return out;
  }
  Halton h(static_cast<std::size_t>(M));
  while (out.size() < n) {
    const auto p = h.next();
    State d(M);
    for (int i = 0; i < M; ++i) d[i] = 2.0 * p[static_cast<std::size_t>(i)] - 1.0;
    const double r = d.norm();
    if (r < 0.1 || r > 1.0) continue;  // uniform on the ball, then project
    out.push_back(d / r);
  }
  return out;
}

namespace {

template <class Test>
TwistReport boundary_check(const CoupledSystem& sys, const ConvexBody& D, const std::vector<PlanarPath>& ensemble,
                           const BoundaryOptions& opts, const char* name, Test&& test) {
  require_periodic(sys, name);
  if (D.M != sys.M) throw DimensionMismatch("convex body dimension must equal M");
  TwistReport rep;
  rep.condition = name;
  const auto dirs = boundary_directions(sys.M, opts.boundary_grid);
  const auto xs = x_grid_points(sys.M, opts.x_grid, opts.x_offset);
  for (std::size_t p = 0; p < ensemble.size(); ++p) {
    for (std::size_t b = 0; b < dirs.size(); ++b) {
      const State y = D.boundary_point(dirs[b]);
      for (const State& x : xs) {
        TwistSample s;
        s.path = p;
        s.boundary = b;
        s.y0 = y;
        s.x0 = x;
        rep.samples.push_back(std::move(s));
      }
    }
  }
  parallel_for(rep.samples.size(), opts.threads, [&](std::size_t k) {
    TwistSample& s = rep.samples[k];
    const auto d = frozen_drift(sys, ensemble[s.path], s.x0, s.y0, opts.integration_tol);
    s.drift = d.drift;
    s.note = d.note;
    if (d.failed) return;
    test(s, D.normal(s.y0));
  });
  for (const auto& s : rep.samples) {
    if (!s.ok && s.note.rfind("not defined", 0) == 0) ++rep.integration_failures;
    if (!s.ok && s.note.rfind("domain error", 0) == 0) ++rep.integration_failures;
  }
  finish(rep, ensemble);
  return rep;
}

}  // namespace

TwistReport avoiding_rays_check(const CoupledSystem& sys, const ConvexBody& D, int sigma,
                                const std::vector<PlanarPath>& ensemble, const BoundaryOptions& opts) {
  if (sigma != 1 && sigma != -1) throw Error("sigma must be +1 or -1");
  return boundary_check(sys, D, ensemble, opts, "avoiding_rays", [&](TwistSample& s, const State& nu) {
    const double r = s.drift.norm();
    if (r == 0.0) {
      s.quantity = 0.0;
      s.ok = false;
      s.note = "zero drift lies on every ray";
      return;
    }
    const double c = std::clamp(s.drift.dot(sigma * nu) / (r * nu.norm()), -1.0, 1.0);
    s.quantity = std::acos(c);
    s.ok = s.quantity >= opts.angle_tol;
  });
}

TwistReport indefinite_twist_check(const CoupledSystem& sys, const ConvexBody& D, const Matrix& A,
                                   const std::vector<PlanarPath>& ensemble, const BoundaryOptions& opts) {
  if (A.rows() != sys.M || A.cols() != sys.M) throw DimensionMismatch("twist matrix must be M x M");
  const double scale = std::max(A.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  if ((A - A.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) throw SingularMatrix("twist matrix is not symmetric");
  if (std::abs(A.determinant()) <= 1e-12 * std::pow(scale, sys.M)) throw SingularMatrix("twist matrix is singular");
  return boundary_check(sys, D, ensemble, opts, "indefinite_twist", [&](TwistSample& s, const State& nu) {
    s.quantity = s.drift.dot(A * nu);
    s.ok = s.quantity > 0.0;
  });
}

}  // namespace hamcouple
