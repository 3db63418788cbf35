#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "hamcouple/error.hpp"
#include "hamcouple/solvers.hpp"

using namespace hamcouple;

namespace {

constexpr double kPi = std::numbers::pi;

State vec(std::initializer_list<double> xs) {
  State s(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) s[i++] = x;
  return s;
}

// A = 2 keeps the linearized pendulum (period 2 pi / sqrt 2) off resonance with T.
CoupledSystem pendulum_asym(double eps, double A = 2.0) {
  PendulumOscillatorPreset p;
  p.A = A;
  p.mu1 = p.mu2 = 4.0;
  p.nu1 = p.nu2 = 1.0;
  p.T = 2 * kPi;
  if (eps != 0.0) {
    p.P = expr_state_function(expr::parse_expr("eps*sin(x1)*sin(u)"), 1, {{"eps", eps}});
  }
  return pendulum_oscillator_system(p);
}

ShootingOptions tight() {
  ShootingOptions o;
  o.newton_tol = 1e-11;
  o.integration_tol = 1e-12;
  return o;
}

PeriodicSolutionRecord rec(State z0) {
  PeriodicSolutionRecord r;
  r.z0 = std::move(z0);
  r.x_normalized = r.z0.head(1);
  return r;
}

}  // namespace

TEST_CASE("shooting converges to the pendulum equilibria") {
  const CoupledSystem sys = pendulum_asym(0.0);
  auto r = shoot_periodic(sys, vec({0.2, 0.1, 0.05, -0.05}), tight());
  REQUIRE(r.converged());
  CHECK(r.record.residual < 1e-11);
  CHECK(r.record.z0.norm() < 1e-9);
  CHECK_FALSE(r.record.turns.has_value());

  // The upper equilibrium expands by exp(2 pi sqrt 2) over T: tiny basin.
  r = shoot_periodic(sys, vec({kPi + 1e-4, -1e-4, 0.01, 0.0}), tight());
  REQUIRE(r.converged());
  CHECK(std::abs(r.record.z0[0] - kPi) < 1e-9);
  CHECK(r.record.z0.tail(3).norm() < 1e-9);
  CHECK(r.record.x_normalized[0] == doctest::Approx(kPi));
}

TEST_CASE("A = 1 makes the lower equilibrium degenerate for T = 2 pi") {
  // Linearized period equals T: Newton converges only linearly and the
  // residual floor sits near 1e-11, so use the default tolerance.
  const CoupledSystem sys = pendulum_asym(0.0, 1.0);
  const auto r = shoot_periodic(sys, vec({0.2, 0.1, 0.05, -0.05}));
  REQUIRE(r.converged());
  CHECK(r.record.residual < 1e-10);
  CHECK(r.record.z0.norm() < 1e-3);
}

TEST_CASE("exact periodic guess converges in zero iterations") {
  const CoupledSystem sys = pendulum_harmonic_system(2.0, 2 * kPi);
  const auto r = shoot_periodic(sys, vec({0.0, 0.0, 0.7, 0.2}), tight());
  REQUIRE(r.converged());
  CHECK(r.record.iterations == 0);
  REQUIRE(r.record.turns.has_value());
  CHECK(*r.record.turns == 1);
}

TEST_CASE("resonant linear center exercises the LM fallback") {
  const CoupledSystem sys = pendulum_harmonic_system(2.0, 2 * kPi);
  const auto r = shoot_periodic(sys, vec({0.3, -0.1, 0.7, 0.2}), tight());
  REQUIRE(r.converged());
  CHECK(r.record.used_lm);
  CHECK(r.record.residual < 1e-11);
  CHECK(std::abs(r.record.z0[0]) < 1e-8);
  // Stays on the continuum of w orbits near the starting circle.
  CHECK(r.record.z0.tail(2).norm() == doctest::Approx(vec({0.7, 0.2}).norm()).epsilon(1e-3));
}

TEST_CASE("shooting rejects bad input") {
  const CoupledSystem sys = pendulum_asym(0.0);
  CHECK_THROWS_AS(shoot_periodic(sys, vec({0.0, 0.0}), tight()), DimensionMismatch);
  CoupledSystem neu = sys;
  neu.mode = SystemMode::Neumann;
  CHECK_THROWS_AS(shoot_periodic(neu, vec({0, 0, 0, 0}), tight()), Error);
}

TEST_CASE("classify_distinct equivalence") {
  std::vector<PeriodicSolutionRecord> rs = {rec(vec({0.0, 0.1, 0.2, 0.3})), rec(vec({2 * kPi, 0.1, 0.2, 0.3})),
                                            rec(vec({kPi, 0.1, 0.2, 0.3})), rec(vec({-2 * kPi + 1e-9, 0.1, 0.2, 0.3})),
                                            rec(vec({0.0, 0.1, 0.2, 0.31}))};
  auto p = classify_distinct(rs, 1, 1e-6);
  CHECK(p.count() == 3);
  CHECK(p.class_of[0] == p.class_of[1]);
  CHECK(p.class_of[0] == p.class_of[3]);
  CHECK(p.class_of[0] != p.class_of[2]);
  CHECK(p.class_of[0] != p.class_of[4]);

  // Invariant under permutation of the input.
  std::vector<std::size_t> perm = {3, 0, 4, 2, 1};
  do {
    std::vector<PeriodicSolutionRecord> q;
    for (auto i : perm) q.push_back(rs[i]);
    const auto pq = classify_distinct(q, 1, 1e-6);
    CHECK(pq.count() == 3);
    for (std::size_t a = 0; a < q.size(); ++a) {
      for (std::size_t b = 0; b < q.size(); ++b) {
        CHECK((pq.class_of[a] == pq.class_of[b]) == (p.class_of[perm[a]] == p.class_of[perm[b]]));
      }
    }
  } while (std::next_permutation(perm.begin(), perm.end()));

  // Transitivity through a chain of near neighbours.
  std::vector<PeriodicSolutionRecord> chain;
  for (int k = 0; k < 5; ++k) chain.push_back(rec(vec({0.0, 0.0, 0.0, 0.8e-6 * k})));
  CHECK(classify_distinct(chain, 1, 1e-6).count() == 1);
}

TEST_CASE("multistart on the decoupled pendulum") {
  const CoupledSystem sys = pendulum_asym(0.0);
  MultistartSpec spec;
  spec.x_counts = {4};
  spec.y_ranges = {{-0.5, 0.5}};
  spec.y_counts = {2};
  spec.radii = {0.3};
  spec.angles = 3;
  const auto res = multistart_periodic(sys, spec, tight());
  CHECK(res.stats.starts == 24);
  CHECK(res.partition.count() >= 2);
  bool zero = false;
  for (auto i : res.partition.representatives) {
    const auto& r = res.records[i];
    CHECK(r.residual <= tight().newton_tol);
    // Decoupled, nonresonant oscillator: only w = 0 is T-periodic.
    CHECK(r.z0.tail(2).norm() < 1e-8);
    if (std::abs(std::remainder(r.z0[0], 2 * kPi)) < 1e-8 && std::abs(r.z0[1]) < 1e-8) zero = true;
    CHECK(std::abs(revalidate(sys, r, tight().integration_tol) - r.residual) < 10 * tight().newton_tol);
  }
  CHECK(zero);
}

TEST_CASE("multistart is independent of the thread count") {
  const CoupledSystem sys = pendulum_asym(0.1);
  MultistartSpec spec;
  spec.x_counts = {3};
  spec.y_ranges = {{-0.5, 0.5}};
  spec.y_counts = {2};
  spec.radii = {0.4};
  spec.angles = 2;
  spec.jitter = 0.01;
  spec.seed = 5;
  const auto a = multistart_periodic(sys, spec, tight());
  spec.threads = 3;
  const auto b = multistart_periodic(sys, spec, tight());
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].z0 == b.records[i].z0);
    CHECK(a.records[i].class_id == b.records[i].class_id);
  }
}

TEST_CASE("start grid layout and budget") {
  const CoupledSystem sys = pendulum_asym(0.0);
  MultistartSpec spec;
  spec.x_counts = {4};
  spec.y_ranges = {{-1.0, 1.0}};
  spec.y_counts = {4};
  spec.radii = {0.5, 1.0, 2.0};
  spec.angles = 8;
  const auto g = periodic_start_grid(sys, spec);
  CHECK(g.size() == 384);
  CHECK(g[0][0] == 0.0);
  CHECK(g[0][1] == -1.0);
  CHECK(g[0].tail(2).norm() == doctest::Approx(0.5));
  spec.max_starts = 100;
  CHECK_THROWS_AS(periodic_start_grid(sys, spec), Error);
}

TEST_CASE("Neumann: harmonic oscillator on a half period is a singular family") {
  CoupledSystem sys = pendulum_harmonic_system(2.0, 2 * kPi);
  sys.mode = SystemMode::Neumann;
  sys.a = 0.0;
  sys.b = kPi;
  const auto r = shoot_neumann(sys, vec({0.2}), 0.7, tight());
  REQUIRE(r.converged());
  CHECK(r.record.residual < 1e-9);
  CHECK(r.record.used_lm);
  // Any u_a closes: the family point stays near the guess.
  CHECK(r.record.u_a == doctest::Approx(0.7).epsilon(1e-6));
  CHECK(r.record.z0[1] == 0.0);
  CHECK(r.record.z0[3] == 0.0);
}

TEST_CASE("Neumann: nonresonant interval only admits u_a = 0") {
  CoupledSystem sys = pendulum_harmonic_system(2.0, 2 * kPi);
  sys.mode = SystemMode::Neumann;
  sys.a = 0.0;
  sys.b = 1.0;
  MultistartSpec spec;
  spec.x_counts = {10};
  spec.u_values = {-2.0, -1.0, 0.0, 1.0, 2.0};
  const auto res = multistart_neumann(sys, spec, tight());
  CHECK(res.stats.starts == 50);
  CHECK(res.stats.converged > 0);
  for (const auto& r : res.records) {
    CHECK(std::abs(r.u_a) < 1e-9);
    CHECK(r.residual < 1e-9);
    CHECK(std::abs(revalidate(sys, r, tight().integration_tol) - r.residual) < 1e-9);
  }
  // Pendulum part: equilibria 0 and pi (half period of the pendulum exceeds 1).
  CHECK(res.partition.count() == 2);
}

TEST_CASE("Neumann: free rotator with zero planar field is degenerate in x") {
  CoupledSystem sys;
  sys.M = 1;
  sys.mode = SystemMode::Neumann;
  sys.a = 0.0;
  sys.b = 2.0;
  sys.hamiltonian = expr_state_function(expr::parse_expr("0.5*y1^2"), 1, {});
  sys.coupling = zero_state_function(1);
  sys.F = {[](double, const Vec2&) -> Vec2 { return Vec2::Zero(); }};
  for (double x : {0.0, 1.0, 4.0}) {
    const auto r = shoot_neumann(sys, vec({x}), 0.5, tight());
    REQUIRE(r.converged());
    CHECK(r.record.iterations == 0);
    CHECK(r.record.x_a[0] == x);
  }
}
