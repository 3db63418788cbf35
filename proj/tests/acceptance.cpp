// One line per acceptance criterion; exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "hamcouple/app.hpp"
#include "hamcouple/conditions.hpp"
#include "hamcouple/config.hpp"
#include "hamcouple/dynamics.hpp"
#include "hamcouple/exprlang.hpp"
#include "hamcouple/homogeneous.hpp"
#include "hamcouple/numfmt.hpp"
#include "hamcouple/sampling.hpp"
#include "hamcouple/solvers.hpp"
#include "hamcouple/systems.hpp"
#include "random_expressions.hpp"
#include "resonance_cases.hpp"
#include "variational_oracle.hpp"

using namespace hamcouple;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;
const fs::path kConfigs = fs::path(HAMCOUPLE_SOURCE_DIR) / "configs";

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string g(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

const double kGrid[] = {0.25, 1.0, 4.0, 9.0};

Outcome period_formula() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (double mu : kGrid) {
    for (double nu : kGrid) {
      const double tau = minimal_period(asymmetric_hamiltonian({mu, nu}));
      const double ref = kPi / std::sqrt(mu) + kPi / std::sqrt(nu);
      worst = std::max(worst, std::abs(tau - ref) / ref);
      worst = std::max(worst, std::abs(asym_period({mu, nu}) - ref) / ref);
    }
  }
  const double dt = seconds_since(t0);
  return {worst < 1e-10 && dt < 1.0, "max rel error " + g(worst) + " over 16 pairs in " + g(dt) + " s"};
}

Outcome half_periods_identity() {
  double sum_err = 0.0, even_err = 0.0;
  for (double mu : kGrid) {
    for (double nu : kGrid) {
      const auto h = asymmetric_hamiltonian({mu, nu});
      const HalfPeriods hp = half_periods(h);
      sum_err = std::max(sum_err, std::abs(hp.tau_plus + hp.tau_minus - minimal_period(h)));
      // Even in v.
      even_err = std::max(even_err, std::abs(hp.tau_plus - hp.tau_minus));
    }
  }
  // Not v-even: only the sum identity applies.
  for (const auto& h : {quadratic_form_hamiltonian(2.0, 0.7, 1.0), quadratic_form_hamiltonian(1.0, -0.4, 3.0)}) {
    const HalfPeriods hp = half_periods(h);
    sum_err = std::max(sum_err, std::abs(hp.tau_plus + hp.tau_minus - minimal_period(h)));
  }
  for (const auto& h : {harmonic_hamiltonian(), quadratic_form_hamiltonian(3.0, 0.0, 0.5)}) {
    const HalfPeriods hp = half_periods(h);
    even_err = std::max(even_err, std::abs(hp.tau_plus - hp.tau_minus));
  }
  return {sum_err < 1e-10 && even_err < 1e-10,
          "max |tau+ + tau- - tau| " + g(sum_err) + ", max |tau+ - tau-| (v-even) " + g(even_err)};
}

Outcome structural_suite() {
  std::vector<PlanarHamiltonian> fams = {harmonic_hamiltonian(), quadratic_form_hamiltonian(2.0, 0.5, 1.0),
                                         quadratic_form_hamiltonian(1.0, -0.9, 1.0),
                                         scaled_hamiltonian(asymmetric_hamiltonian({4.0, 1.0}), 2.5)};
  for (double mu : kGrid) {
    for (double nu : kGrid) fams.push_back(asymmetric_hamiltonian({mu, nu}));
  }
  double euler = 0.0, hom = 0.0;
  bool all = true;
  for (std::size_t i = 0; i < fams.size(); ++i) {
    const auto r = check_homogeneous(fams[i], 1000, 1e-8, i);
    euler = std::max(euler, r.max_euler_residual);
    hom = std::max(hom, r.max_homogeneity_residual);
    all = all && r.pass && r.samples == 1000;
  }

  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> d(-2.0, 2.0);
  const std::vector<std::string> vars = {"x", "y", "z"};
  double grad = 0.0;
  for (int n = 0; n < 100; ++n) {
    const auto e = expr::parse_expr(testdata::random_smooth(rng, 4));
    expr::Binding b = {{"x", d(rng)}, {"y", d(rng)}, {"z", d(rng)}};
    const auto gr = expr::grad_expr(e, vars, b);
    for (std::size_t j = 0; j < vars.size(); ++j) {
      const double h = 1e-6;
      expr::Binding bp = b, bm = b;
      bp[vars[j]] += h;
      bm[vars[j]] -= h;
      const double fd = (expr::eval_expr(e, bp) - expr::eval_expr(e, bm)) / (2 * h);
      grad = std::max(grad, std::abs(gr[j] - fd) / std::max(1.0, std::abs(gr[j])));
    }
  }
  return {all && euler < 1e-8 && hom < 1e-8 && grad < 1e-6,
          std::to_string(fams.size()) + " families: Euler " + g(euler) + ", homogeneity " + g(hom) +
              "; 100 expressions: gradient vs FD " + g(grad)};
}

Outcome resonance_table() {
  int ok = 0, scaled_ok = 0, n = 0;
  for (const auto& c : testdata::kResonanceCases) {
    ++n;
    const auto r = classify_resonance(c.tau1, c.tau2, c.T, 1e-12);
    if (r.tag == c.tag && r.N == c.N) ++ok;
    bool inv = true;
    for (double s : {0.1, 10.0}) {
      const auto q = classify_resonance(s * c.tau1, s * c.tau2, s * c.T, 1e-12);
      inv = inv && q.tag == r.tag && q.N == r.N;
    }
    if (inv) ++scaled_ok;
  }
  return {ok == n && scaled_ok == n && n == 12, std::to_string(ok) + "/" + std::to_string(n) + " classified, " +
                                                    std::to_string(scaled_ok) + "/" + std::to_string(n) +
                                                    " scale invariant"};
}

Outcome ll_benchmark() {
  double numeric = 0.0, exact = 0.0;
  for (double c : {0.5, 1.0, 2.0}) {
    ScalarLLInput in;
    in.g = [c](double, double u) { return u + c * (2.0 / kPi) * std::atan(u); };
    in.mu = in.nu = 1.0;
    in.T = 2 * kPi;
    in.m_bar = 0.0;
    numeric = std::max(numeric, std::abs(scalar_ll(in).margin[0] - 4 * c) / (4 * c));
    in.asymptotes = LLAsymptotes{[c](double) { return c; }, [c](double) { return c; }};
    exact = std::max(exact, std::abs(scalar_ll(in).margin[0] - 4 * c));
  }
  return {numeric < 0.02 && exact < 1e-4,
          "numeric liminf rel error " + g(numeric) + ", with asymptotes abs error " + g(exact)};
}

Outcome coupled_pendulum_classes() {
  const auto cfg = load_config(kConfigs / "pendulum_asymmetric.json");
  const auto t0 = std::chrono::steady_clock::now();
  const auto res = multistart_periodic(cfg.system, cfg.multistart, cfg.shooting);
  const double dt = seconds_since(t0);
  double worst = 0.0, revalidated = 0.0;
  for (const auto& r : res.records) {
    worst = std::max(worst, r.residual);
    revalidated = std::max(revalidated, revalidate(cfg.system, r, cfg.shooting.integration_tol));
  }
  const bool ok = res.partition.count() >= 2 && !res.records.empty() && worst < 1e-9 && revalidated < 1e-9 &&
                  res.stats.starts <= 2000 && dt < 120.0;
  return {ok, std::to_string(res.partition.count()) + " classes from " + std::to_string(res.records.size()) + " of " +
                  std::to_string(res.stats.starts) + " starts, max residual " + g(worst) + " (revalidated " +
                  g(revalidated) + "), " + g(dt) + " s"};
}

Outcome cutoff_construction() {
  PendulumOscillatorPreset p;
  p.mu1 = 1.0;
  p.mu2 = 4.0;
  p.nu1 = 1.0;
  p.nu2 = 9.0;
  p.h = [](double t, double u) { return 0.5 * std::sin(t) * std::atan(u); };
  p.h_bound = kPi / 4;
  const CoupledSystem sys = pendulum_oscillator_system(p);
  const auto& d = *sys.decomposition;

  bool ends = true;
  double bound_margin = std::numeric_limits<double>::infinity();
  double inner = 0.0, outer = 0.0;
  for (double rho : {3.0, 10.0, 100.0}) {
    const CutoffProfile c = build_cutoff(rho);
    const double r3 = rho * rho * rho;
    ends = ends && c.eta(rho) == 1.0 && c.eta(r3) == 0.0;
    for (double lx : logspace(std::log10(rho), std::log10(r3), 1000)) {
      const double x = std::pow(10.0, lx);
      const double dp = c.eta_prime(x);
      bound_margin = std::min({bound_margin, -dp, dp + 1.0 / (x * std::log(x))});
    }
    const CoupledSystem mod = modify_system(sys, rho);
    Halton halton(3);
    for (int i = 0; i < 100; ++i) {
      const auto s = halton.next();
      const double t = 2 * kPi * s[0];
      const Vec2 dir(std::cos(2 * kPi * s[1]), std::sin(2 * kPi * s[1]));
      Vec2 w = rho * s[2] * dir;
      inner = std::max(inner, (mod.F(t, w) - sys.F(t, w)).norm());
      w = std::pow(rho, 3.0 + s[2]) * dir;
      const Vec2 avg = 0.5 * (d.H1.grad(w) + d.H2.grad(w)) + d.Q.gradient(t, w);
      outer = std::max(outer, (mod.F(t, w) - avg).norm() / (1.0 + avg.norm()));
    }
  }
  return {ends && bound_margin >= 0.0 && inner == 0.0 && outer < 1e-12,
          std::string("endpoints ") + (ends ? "exact" : "off") + ", derivative bound margin " + g(bound_margin + 0.0) +
              ", |w| <= rho diff " + g(inner) + ", |w| >= rho^3 rel diff " + g(outer)};
}

Outcome jacobian_cross_check() {
  const double A = 1.0;
  const VectorField f{2, [A](double, const State& z, State& dz) {
                        dz[0] = z[1];
                        dz[1] = -A * std::sin(z[0]);
                      }};
  double worst = 0.0;
  for (const auto& [x, y] : {std::pair{0.3, 0.2}, {2.5, -0.4}, {-1.0, 1.9}, {3.0, 0.0}}) {
    State z0(2);
    z0 << x, y;
    const auto oracle = testdata::pendulum_variational(A, Eigen::Vector2d(x, y), 2 * kPi, 20000);
    const Matrix J = flow_jacobian(f, z0, 2 * kPi, 1e-12, 1e-6);
    worst = std::max(worst, (J - oracle.jacobian).cwiseAbs().maxCoeff());
  }
  return {worst < 1e-5, "max entry difference " + g(worst) + " at 4 initial points, T = 2 pi"};
}

Outcome neumann_mode() {
  const auto resonant = load_config(kConfigs / "neumann_harmonic.json");
  const auto r1 = multistart_neumann(resonant.system, resonant.multistart, resonant.shooting);
  double w1 = 0.0;
  std::size_t lm = 0;
  for (const auto& r : r1.records) {
    w1 = std::max(w1, r.residual);
    if (r.used_lm) ++lm;
  }
  const auto plain = load_config(kConfigs / "neumann_nonresonant.json");
  const auto r2 = multistart_neumann(plain.system, plain.multistart, plain.shooting);
  double w2 = 0.0, umax = 0.0;
  for (const auto& r : r2.records) {
    w2 = std::max(w2, r.residual);
    umax = std::max(umax, std::abs(r.u_a));
  }
  const bool ok = !r1.records.empty() && w1 < 1e-9 && lm > 0 && r2.stats.starts == 50 && !r2.records.empty() &&
                  r2.records.size() == r2.stats.converged && w2 < 1e-9 && umax < 1e-9;
  return {ok, "[0, pi]: " + std::to_string(r1.records.size()) + " converged, " + std::to_string(lm) +
                  " via LM, max residual " + g(w1) + "; [0, 1]: " + std::to_string(r2.records.size()) + " of " +
                  std::to_string(r2.stats.starts) + " converged, max |u_a| " + g(umax) + ", max residual " + g(w2)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / "hamcouple_acceptance_determinism";
  fs::remove_all(dir);
  std::ostringstream sink;
  for (const auto& [name, threads] : {std::pair{"a", 1u}, {"b", 2u}}) {
    RunOptions o;
    o.out_dir = dir / name;
    o.threads = threads;
    run_experiment("full", load_config(kConfigs / "pendulum_asymmetric.json"), o, sink);
  }
  const std::string a = slurp(dir / "a" / "solutions.csv");
  const std::string b = slurp(dir / "b" / "solutions.csv");
  const auto lines = std::count(a.begin(), a.end(), '\n');
  return {!a.empty() && a == b, std::to_string(a.size()) + " bytes, " + std::to_string(lines) + " lines, " +
                                    (a == b ? "identical" : "different") + " (1 vs 2 threads)"};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {"period formula", period_formula},
      {"half-period identity", half_periods_identity},
      {"structural suite", structural_suite},
      {"resonance classifier table", resonance_table},
      {"Landesman-Lazer analytic benchmark", ll_benchmark},
      {"pendulum + asymmetric oscillator: at least M + 1 classes", coupled_pendulum_classes},
      {"cutoff construction", cutoff_construction},
      {"flow Jacobian cross-validation", jacobian_cross_check},
      {"Neumann mode", neumann_mode},
      {"determinism of full runs", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("[%s] %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
