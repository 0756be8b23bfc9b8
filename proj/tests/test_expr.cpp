#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "logsym/expr.hpp"
#include "logsym/parse.hpp"
#include "logsym/profile.hpp"
#include "logsym/program.hpp"

using namespace logsym;

namespace {

Expr x(int i) { return Expr::coord(i); }

Expr P(const std::string& s, const ProfileTable* t = nullptr) {
  ParseContext ctx;
  ctx.profiles = t;
  return parse_expr(s, ctx);
}

}  // namespace

TEST_CASE("jet arithmetic matches closed-form derivatives") {
  Jet t = Jet::variable(4, 0.3);
  Jet e = exp(t * t);
  // d/dt exp(t^2) = 2t exp(t^2); second derivative (2 + 4t^2) exp(t^2)
  const double v = std::exp(0.09);
  CHECK(e.derivative(1) == doctest::Approx(0.6 * v).epsilon(1e-14));
  CHECK(e.derivative(2) == doctest::Approx((2 + 4 * 0.09) * v).epsilon(1e-14));
  Jet l = log(t);
  CHECK(l.derivative(3) == doctest::Approx(2.0 / (0.3 * 0.3 * 0.3)).epsilon(1e-12));
  Jet q = Jet(4, 1.0) / (t + 1.0);
  CHECK(q.derivative(2) == doctest::Approx(2.0 / std::pow(1.3, 3)).epsilon(1e-13));
}

TEST_CASE("canonical form identities") {
  CHECK((x(1) + x(2)) - (x(2) + x(1)) == Expr());
  CHECK(sin(x(1)) * sin(x(1)) + cos(x(1)) * cos(x(1)) == Expr(1));
  CHECK(sin(-x(1)) == -sin(x(1)));
  CHECK(cos(-x(1) + x(2)) == cos(x(1) - x(2)));
  CHECK(exp(x(1)) * exp(x(2)) == exp(x(1) + x(2)));
  CHECK(exp(x(1)) * exp(-x(1)) == Expr(1));
  CHECK(x(1) * x(1).inverse() == Expr(1));
  CHECK((x(1) + 1).inverse() * (x(1) + 1) != Expr(1));  // reciprocal atoms are opaque
  CHECK((x(1) + 1).inverse().inverse() == x(1) + 1);
  CHECK(sin(Expr::pi()) == Expr());
  CHECK(cos(Expr::pi()) == Expr(-1));
  CHECK(sin(Expr::pi() * Rational(3, 2)) == Expr(-1));
  CHECK(sin(Expr()) == Expr());
  CHECK(cos(Expr()) == Expr(1));
  CHECK((x(1) + x(2)).pow(2) == x(1) * x(1) + 2 * x(1) * x(2) + x(2) * x(2));
}

TEST_CASE("derivatives") {
  CHECK(sin(x(1) * x(2)).diff(1) == x(2) * cos(x(1) * x(2)));
  CHECK(x(1).pow(-2).diff(1) == -2 * x(1).pow(-3));
  Expr u = 2 + sin(x(2));
  CHECK(u.inverse().diff(2) == -cos(x(2)) * u.inverse().pow(2));
  // mixed partials commute exactly in canonical form
  Expr f = exp(x(1) * x(2)) * sin(x(1) + x(3)) * (x(1) * x(1) + x(2) + 3).inverse();
  CHECK(f.diff(1).diff(2) == f.diff(2).diff(1));
  CHECK(f.diff(3).diff(1) == f.diff(1).diff(3));
}

TEST_CASE("profiles differentiate structurally") {
  ProfileTable t;
  t.add(Profile::radial_bump("bump", 0.25, 0.75));
  Expr b = P("profile(bump, x1^2 + x2^2)", &t);
  Expr db = b.diff(1);
  CHECK(db == P("2*x1*profile(bump', x1^2 + x2^2)", &t));
  CHECK(db.diff(2) == b.diff(2).diff(1));
}

TEST_CASE("parse and print round-trip exactly") {
  ProfileTable t;
  t.add(Profile::log_fold_interp("F"));
  const std::vector<std::string> inputs = {
      "0",
      "1/3",
      "0.125*x1 - 7",
      "x1^-2 + x2",
      "sin(2*pi*x1)/(2*pi)",
      "exp(x1 - x2) * cos(x3)^3",
      "(1 + x1^2)^-1 - 1.5e-3*x2",
      "profile(F'', 3*x1) * x2",
      "(2 + sin(x2))^-2",
  };
  for (const auto& s : inputs) {
    Expr e = P(s, &t);
    Expr back = P(e.str(), &t);
    CHECK_MESSAGE(back == e, s << " -> " << e.str());
    CHECK(back.str() == e.str());
  }
  CHECK(P("0.1") == Expr(Rational(1, 10)));
  CHECK(P("2.5e2") == Expr(250));
}

TEST_CASE("parse errors carry positions") {
  try {
    P("x1 + * 2");
    FAIL("expected parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 1);
    CHECK(e.column() == 6);
  }
  CHECK_THROWS_AS(P("foo(x1)"), ParseError);
  CHECK_THROWS_AS(P("profile(nope, x1)"), ParseError);
  ParseContext ctx;
  ctx.max_coord = 2;
  CHECK_THROWS_AS(parse_expr("x3", ctx), ParseError);
  CHECK_THROWS_AS(P("1/0"), ParseError);
}

TEST_CASE("evaluation agrees between evaluator and compiled program") {
  ProfileTable t;
  t.add(Profile::step("s", 0.0, 1.0));
  Expr e = P("sin(2*pi*x1)*exp(x2) + (1 + x1^2)^-1 + profile(s', x2)", &t);
  ExprProgram prog({e, e.diff(1)});
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(-1, 1);
  for (int k = 0; k < 50; ++k) {
    std::vector<double> p = {U(rng), U(rng)};
    auto out = prog.evaluate(p);
    CHECK(out[0] == doctest::Approx(e.evaluate(p)).epsilon(1e-14));
    const double direct = std::sin(2 * M_PI * p[0]) * std::exp(p[1]) + 1 / (1 + p[0] * p[0]) +
                          t.find("s")->derivative(p[1], 1);
    CHECK(out[0] == doctest::Approx(direct).epsilon(1e-13));
  }
}

TEST_CASE("zero test reports its method") {
  std::vector<std::vector<double>> pts;
  for (int i = 0; i < 20; ++i) pts.push_back({0.05 * i - 0.5, 0.3});
  CHECK(zero_test(Expr(), pts, 1e-10).method == "exact");
  Expr double_angle = sin(2 * x(1)) - 2 * sin(x(1)) * cos(x(1));
  CHECK_FALSE(double_angle.is_zero());
  ZeroVerdict v = zero_test(double_angle, pts, 1e-10);
  CHECK(v.zero);
  CHECK(v.method == "sampled");
  CHECK(zero_test(x(1), pts, 1e-10).method == "nonzero");
}

TEST_CASE("log_fold_interp matches both ends and is monotone") {
  auto F = Profile::log_fold_interp("F");
  CHECK(F->kappa() > 0);
  CHECK(F->value(0.5) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(F->value(-0.5) == doctest::Approx(0.25).epsilon(1e-15));
  const double e2 = std::exp(2.0);
  CHECK(F->value(e2 + 1) == doctest::Approx(std::log(e2 + 1)).epsilon(1e-15));
  CHECK(F->value(e2) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(F->derivative(3.0, 1) > 0);
  CHECK(F->derivative(-3.0, 1) == doctest::Approx(-F->derivative(3.0, 1)));
  ProfileValidation v = validate_profile(*F, 2000);
  CHECK(v.ok);
  CHECK(v.min_increment > 0);
}

TEST_CASE("bumps stay in range and are constant outside the transition") {
  auto b = Profile::radial_bump("b", 0.25, 0.75);
  CHECK(b->value(0.01) == 0.0);
  CHECK(b->value(0.7) == 1.0);
  CHECK(b->derivative(0.2, 1) > 0);
  CHECK(validate_profile(*b, 2000).ok);
  auto c = Profile::log_cutoff_weight("c", 0.5, 1.0);
  CHECK(c->value(0.3) == 1.0);
  CHECK(c->value(-0.3) == 1.0);
  CHECK(c->value(1.2) == 0.0);
  // B is the log-derivative of c(|s|) log|s|: check against finite differences of that function.
  auto g = [&](double s) { return (1.0 - smooth_step((std::fabs(s) - 0.5) / 0.5)) * std::log(std::fabs(s)); };
  for (double s : {0.6, 0.75, 0.9}) {
    const double h = 1e-6;
    const double dg = (g(s + h) - g(s - h)) / (2 * h);
    CHECK(c->value(s) == doctest::Approx(s * dg).epsilon(1e-7));
  }
  CHECK(validate_profile(*c, 2000).ok);
}

TEST_CASE("forward-mode gradients match symbolic derivatives") {
  ProfileTable t;
  t.add(Profile::step("s", 0.0, 1.0));
  Expr e = P("sin(2*pi*x1)*exp(x2*x3) + (1 + x1^2*x3)^-2 + profile(s, x2 - x3)*cos(x1)^3", &t);
  Expr f = P("x1^2*x2^-1 + 3", &t);
  ExprProgram prog({e, f});
  ExprProgram sym({e.diff(1), e.diff(2), e.diff(3), f.diff(1), f.diff(2), f.diff(3)});
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> U(0.1, 1);
  for (int k = 0; k < 50; ++k) {
    std::vector<double> p = {U(rng), U(rng), U(rng)};
    std::vector<double> v, g;
    prog.evaluate_with_gradient(p, v, g);
    const auto expect = sym.evaluate(p);
    CHECK(v[0] == doctest::Approx(e.evaluate(p)).epsilon(1e-14));
    for (std::size_t i = 0; i < 6; ++i) CHECK(g[i] == doctest::Approx(expect[i]).epsilon(1e-12));
  }
}
