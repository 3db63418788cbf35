#include <doctest.h>

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "hamcouple/error.hpp"
#include "hamcouple/exprlang.hpp"
#include "random_expressions.hpp"

using namespace hamcouple;
using namespace hamcouple::expr;

namespace {

const char* kAsym = "0.5*(mu*pos(u)^2 + nu*neg(u)^2 + v^2)";

}  // namespace

TEST_CASE("parse and evaluate the asymmetric oscillator Hamiltonian") {
  const Expr e = parse_expr(kAsym);
  CHECK(e.free_variables() == std::set<std::string>{"mu", "nu", "u", "v"});
  CHECK(eval_expr(e, {{"mu", 1.0}, {"nu", 1.0}, {"u", 0.6}, {"v", 0.8}}) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(eval_expr(e, {{"mu", 4.0}, {"nu", 1.0}, {"u", -1.0}, {"v", 2.0}}) == doctest::Approx(2.5));
}

TEST_CASE("elementary evaluation") {
  CHECK(eval_expr(parse_expr("u"), {{"u", 3.0}}) == 3.0);
  CHECK(eval_expr(parse_expr("pos(u)-neg(u)"), {{"u", -2.5}}) == -2.5);
  CHECK(eval_expr(parse_expr("sin(t)"), {{"t", 0.0}}) == 0.0);
  CHECK(eval_expr(parse_expr("2^3^2"), {}) == 512.0);
  CHECK(eval_expr(parse_expr("-2^2"), {}) == -4.0);
  CHECK(eval_expr(parse_expr("2^-1"), {}) == 0.5);
  CHECK(eval_expr(parse_expr("1 - 2 - 3"), {}) == -4.0);
  CHECK(eval_expr(parse_expr("8 / 2 / 2"), {}) == 2.0);
  CHECK(eval_expr(parse_expr(" 1 +2* 3 "), {}) == 7.0);
  CHECK(eval_expr(parse_expr("min(3, x) + max(3, x)"), {{"x", -1.0}}) == 2.0);
  CHECK(eval_expr(parse_expr("abs(-2) + sqrt(9) + ln(exp(1.5)) + atan(0)"), {}) == doctest::Approx(6.5));
  CHECK(eval_expr(parse_expr("cos(pi)"), {}) == doctest::Approx(-1.0));
  CHECK(eval_expr(parse_expr("1.5e-3*2E+2"), {}) == doctest::Approx(0.3));
}

TEST_CASE("syntax errors carry the byte offset") {
  auto offset_of = [](const char* src) -> std::size_t {
    try {
      parse_expr(src);
    } catch (const SyntaxError& e) {
      return e.offset();
    }
    return std::string::npos;
  };
  CHECK(offset_of("1 +") == 3);
  CHECK(offset_of("(u") == 2);
  CHECK(offset_of("2 u") == 2);  // no implicit multiplication
  CHECK(offset_of("foo(1)") == 0);
  CHECK(offset_of("sin 1") == 0);
  CHECK(offset_of("max(1)") == 0);
  CHECK(offset_of("u $ v") == 2);
  CHECK_THROWS_AS(parse_expr(""), SyntaxError);
}

TEST_CASE("evaluation errors") {
  CHECK_THROWS_AS(eval_expr(parse_expr("u + q"), {{"u", 1.0}}), UnboundVariable);
  CHECK_THROWS_AS(eval_expr(parse_expr("ln(u)"), {{"u", 0.0}}), DomainError);
  CHECK_THROWS_AS(eval_expr(parse_expr("sqrt(u)"), {{"u", -1.0}}), DomainError);
  CHECK_THROWS_AS(eval_expr(parse_expr("1/u"), {{"u", 0.0}}), DomainError);
  CHECK_THROWS_AS(eval_expr(parse_expr("u^0.5"), {{"u", -4.0}}), DomainError);
  CHECK_THROWS_AS(eval_expr(parse_expr("exp(u)"), {{"u", 1000.0}}), DomainError);
  CHECK(eval_expr(parse_expr("u^2"), {{"u", -3.0}}) == 9.0);
}

TEST_CASE("gradients of the asymmetric Hamiltonian") {
  const Expr e = parse_expr(kAsym);
  const std::vector<std::string> uv = {"u", "v"};
  auto g = grad_expr(e, uv, {{"mu", 4.0}, {"nu", 1.0}, {"u", 1.0}, {"v", 1.0}});
  CHECK(g[0] == doctest::Approx(4.0));
  CHECK(g[1] == doctest::Approx(1.0));
  g = grad_expr(e, uv, {{"mu", 4.0}, {"nu", 1.0}, {"u", -1.0}, {"v", 1.0}});
  CHECK(g[0] == doctest::Approx(-1.0));
  CHECK(g[1] == doctest::Approx(1.0));

  // Euler identity <grad H, w> = 2 H for the homogeneous expression.
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> d(-5.0, 5.0);
  for (int i = 0; i < 50; ++i) {
    const Binding b = {{"mu", 9.0}, {"nu", 0.25}, {"u", d(rng)}, {"v", d(rng)}};
    g = grad_expr(e, uv, b);
    CHECK(g[0] * b.at("u") + g[1] * b.at("v") == doctest::Approx(2.0 * eval_expr(e, b)).epsilon(1e-13));
  }
}

TEST_CASE("kink convention for pos/neg/abs") {
  const std::vector<std::string> u = {"u"};
  CHECK(grad_expr(parse_expr("pos(u)"), u, {{"u", 0.0}})[0] == 0.0);
  CHECK(grad_expr(parse_expr("neg(u)"), u, {{"u", 0.0}})[0] == 0.0);
  CHECK(grad_expr(parse_expr("abs(u)"), u, {{"u", 0.0}})[0] == 0.0);
  CHECK(grad_expr(parse_expr("pos(u)"), u, {{"u", 1e-300}})[0] == 1.0);
  CHECK(grad_expr(parse_expr("neg(u)"), u, {{"u", -2.0}})[0] == -1.0);
  // Requested variable absent from the tree.
  CHECK(grad_expr(parse_expr("3"), u, {{"u", 1.0}})[0] == 0.0);
}

TEST_CASE("pos/neg identities hold on a sweep") {
  const Expr diff = parse_expr("pos(s) - neg(s)");
  const Expr prod = parse_expr("pos(s) * neg(s)");
  for (double s = -3.0; s <= 3.0; s += 0.125) {
    CHECK(eval_expr(diff, {{"s", s}}) == s);
    CHECK(eval_expr(prod, {{"s", s}}) == 0.0);
  }
}

TEST_CASE("gradient matches central differences on random smooth expressions") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> d(-2.0, 2.0);
  const std::vector<std::string> vars = {"x", "y", "z"};
  const double h = 1e-6;
  int checked = 0;
  for (int n = 0; n < 100; ++n) {
    const Expr e = parse_expr(testdata::random_smooth(rng, 4));
    Binding b = {{"x", d(rng)}, {"y", d(rng)}, {"z", d(rng)}};
    const auto g = grad_expr(e, vars, b);
    for (std::size_t j = 0; j < vars.size(); ++j) {
      Binding bp = b;
      Binding bm = b;
      bp[vars[j]] += h;
      bm[vars[j]] -= h;
      const double fd = (eval_expr(e, bp) - eval_expr(e, bm)) / (2 * h);
      CHECK(std::abs(g[j] - fd) <= 1e-6 * std::max(1.0, std::abs(g[j])));
      ++checked;
    }
  }
  CHECK(checked == 300);
}

TEST_CASE("unparse then parse reproduces the tree") {
  std::mt19937_64 rng(99);
  std::vector<std::string> sources = {kAsym, "-u^2", "2^3^2", "-(-x)", "min(a, max(b, -c)) / 3e-7", "1 - (2 - 3)"};
  for (int i = 0; i < 40; ++i) sources.push_back(testdata::random_smooth(rng, 4));
  for (const auto& src : sources) {
    const Expr once = parse_expr(src);
    const Expr twice = parse_expr(once.to_string());
    CHECK(once == twice);
    CHECK(twice.to_string() == once.to_string());
  }
}

TEST_CASE("compiled tape with folded constants") {
  const Expr e = parse_expr("A*x1*x1 + sin(t)*u");
  const std::vector<std::string> slots = {"t", "x1", "u"};
  const CompiledExpr c(e, slots, {{"A", 3.0}});
  const std::vector<double> values = {0.5, 2.0, -1.0};
  CHECK(c.eval(values) == doctest::Approx(12.0 - std::sin(0.5)));
  const std::vector<std::size_t> wrt = {1, 2};
  std::vector<double> g(2);
  c.eval_grad(values, wrt, g);
  CHECK(g[0] == doctest::Approx(12.0));
  CHECK(g[1] == doctest::Approx(std::sin(0.5)));
  CHECK_FALSE(c.independent_of(0));
  CHECK_THROWS_AS(CompiledExpr(e, slots), UnboundVariable);
}
