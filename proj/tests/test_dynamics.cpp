#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/LU>

#include "hamcouple/dynamics.hpp"
#include "hamcouple/error.hpp"
#include "variational_oracle.hpp"

using namespace hamcouple;

namespace {

VectorField rotation() {
  // Clockwise harmonic rotation: u' = v, v' = -u.
  return {2, [](double, const State& z, State& dz) {
            dz[0] = z[1];
            dz[1] = -z[0];
          }};
}

VectorField decay() {
  return {1, [](double, const State& z, State& dz) { dz[0] = -z[0]; }};
}

State vec(std::initializer_list<double> xs) {
  State s(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) s[i++] = x;
  return s;
}

}  // namespace

TEST_CASE("exponential decay matches the closed form") {
  for (double tol : {1e-6, 1e-9, 1e-12}) {
    const Trajectory tr = integrate(decay(), vec({1.0}), 0.0, 5.0, tol);
    CHECK(std::abs(tr.final_state()[0] - std::exp(-5.0)) < 50 * tol);
    CHECK(tr.mesh().front() == 0.0);
    CHECK(tr.mesh().back() == 5.0);
  }
}

TEST_CASE("rotation returns after 2 pi and error scales with tol") {
  double prev = 1.0;
  for (double tol : {1e-6, 1e-8, 1e-10, 1e-12}) {
    const State z = flow_map(rotation(), vec({1.0, 0.0}), 2 * std::numbers::pi, tol);
    const double err = (z - vec({1.0, 0.0})).norm();
    CHECK(err < 100 * tol);
    CHECK(err < prev);
    prev = err;
  }
}

TEST_CASE("dense output agrees with the exact solution between steps") {
  const Trajectory tr = integrate(rotation(), vec({1.0, 0.0}), 0.0, 10.0, 1e-11);
  CHECK(tr.has_dense_output());
  CHECK(tr.query(0.0) == vec({1.0, 0.0}));
  double worst = 0.0;
  for (int i = 0; i <= 997; ++i) {
    const double t = 10.0 * i / 997.0;
    const State z = tr.query(t);
    worst = std::max(worst, std::hypot(z[0] - std::cos(t), z[1] + std::sin(t)));
  }
  CHECK(worst < 1e-8);
  CHECK((tr.query(10.0) - tr.final_state()).norm() < 1e-14);
}

TEST_CASE("reversed or degenerate intervals are rejected") {
  CHECK_THROWS_AS(integrate(decay(), vec({1.0}), 2.0, 0.0, 1e-10), Error);
  CHECK_THROWS_AS(integrate(decay(), vec({1.0}), 1.0, 1.0, 1e-10), Error);
}

TEST_CASE("nonautonomous forcing") {
  // z' = cos t, z(0) = 0 -> sin t.
  const VectorField f{1, [](double t, const State&, State& dz) { dz[0] = std::cos(t); }};
  CHECK(flow_map(f, vec({0.0}), 3.0, 1e-11)[0] == doctest::Approx(std::sin(3.0)).epsilon(1e-9));
}

TEST_CASE("blowup and non-finite states are reported") {
  const VectorField riccati{1, [](double, const State& z, State& dz) { dz[0] = z[0] * z[0]; }};
  try {
    integrate(riccati, vec({1.0}), 0.0, 2.0, 1e-9);
    FAIL("expected failure");
  } catch (const IntegrationFailure& e) {
    CHECK((e.kind() == IntegrationFailure::Kind::Blowup || e.kind() == IntegrationFailure::Kind::StepUnderflow));
  }
  const VectorField nanfield{1, [](double, const State&, State& dz) { dz[0] = std::nan(""); }};
  CHECK_THROWS_AS(integrate(nanfield, vec({1.0}), 0.0, 1.0, 1e-9), IntegrationFailure);
  IntegratorOptions few;
  few.max_steps = 3;
  few.tol = 1e-12;
  CHECK_THROWS_AS(integrate(rotation(), vec({1.0, 0.0}), 0.0, 100.0, few), IntegrationFailure);
}

TEST_CASE("mesh replay reproduces the adaptive endpoint") {
  const Trajectory tr = integrate(rotation(), vec({0.3, -0.7}), 0.0, 4.0, 1e-10);
  const State z = integrate_on_mesh(rotation(), vec({0.3, -0.7}), tr.mesh());
  CHECK((z - tr.final_state()).norm() < 1e-13);
}

TEST_CASE("flow Jacobian of the rotation is the rotation matrix") {
  const double T = 1.3;
  const Matrix J = flow_jacobian(rotation(), vec({0.4, 0.9}), T, 1e-11, 1e-6);
  Matrix R(2, 2);
  R << std::cos(T), std::sin(T), -std::sin(T), std::cos(T);
  CHECK((J - R).norm() < 1e-8);
  CHECK(J.determinant() == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("finite-difference flow Jacobian matches the variational equation") {
  const double A = 1.0;
  const VectorField f{2, [A](double, const State& z, State& dz) {
                        dz[0] = z[1];
                        dz[1] = -A * std::sin(z[0]);
                      }};
  for (const auto& z0 : {vec({0.3, 0.2}), vec({2.5, -0.4}), vec({-1.0, 1.9})}) {
    const auto oracle = testdata::pendulum_variational(A, Eigen::Vector2d(z0[0], z0[1]), 2 * std::numbers::pi, 20000);
    const Matrix J = flow_jacobian(f, z0, 2 * std::numbers::pi, 1e-12, 1e-6);
    CHECK((J - oracle.jacobian).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("partial Jacobian columns") {
  // Linear system z' = A z: flow Jacobian is exp(A t).
  const VectorField lin{2, [](double, const State& z, State& dz) {
                          dz[0] = -z[0];
                          dz[1] = z[0] - 2.0 * z[1];
                        }};
  const std::vector<int> cols = {1};
  const auto fj = flow_and_jacobian(lin, vec({1.0, 1.0}), 0.0, 1.0, 1e-11, 1e-6, cols);
  CHECK(fj.jacobian.cols() == 1);
  CHECK(fj.jacobian(0, 0) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(fj.jacobian(1, 0) == doctest::Approx(std::exp(-2.0)).epsilon(1e-8));
}

TEST_CASE("winding counts clockwise turns") {
  const Trajectory tr = integrate(rotation(), vec({1.0, 0.0}), 0.0, 6 * std::numbers::pi, 1e-10);
  const WindingReport w = winding(tr, {0, 1}, 1e-3);
  CHECK(w.turns == 3);
  CHECK(w.delta_theta == doctest::Approx(-6 * std::numbers::pi).epsilon(1e-8));
  CHECK(w.min_radius == doctest::Approx(1.0).epsilon(1e-8));

  const VectorField ccw{2, [](double, const State& z, State& dz) {
                          dz[0] = -z[1];
                          dz[1] = z[0];
                        }};
  const Trajectory back = integrate(ccw, vec({1.0, 0.0}), 0.0, 4 * std::numbers::pi, 1e-10);
  CHECK(winding(back, {0, 1}, 1e-3).turns == -2);
}

TEST_CASE("winding refuses paths through the origin") {
  // Straight line through the origin.
  const VectorField line{2, [](double, const State&, State& dz) {
                           dz[0] = 1.0;
                           dz[1] = 0.0;
                         }};
  const Trajectory tr = integrate(line, vec({-1.0, 0.0}), 0.0, 2.0, 1e-10);
  CHECK_THROWS_AS(winding(tr, {0, 1}, 1e-6), OriginTooClose);
}

TEST_CASE("trajectory csv") {
  const Trajectory tr = integrate(decay(), vec({1.0}), 0.0, 1.0, 1e-9);
  std::ostringstream os;
  write_trajectory_csv(tr, 0.25, os);
  const std::string s = os.str();
  CHECK(s.rfind("t,z_1\n", 0) == 0);
  CHECK(std::count(s.begin(), s.end(), '\n') == 6);
}
