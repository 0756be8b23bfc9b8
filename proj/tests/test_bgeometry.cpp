#include <cmath>
#include <random>

#include "doctest.h"
#include "logsym/bgeometry.hpp"
#include "support/random_forms.hpp"

using namespace logsym;

namespace {

Expr x(int i) { return Expr::coord(i); }

BForm F(const std::string& text, const Frame& frame, int degree) { return parse_form(text, frame, degree, {}); }

Tolerances small_grid() {
  Tolerances t;
  t.grid = 600;
  return t;
}

double max_coefficient_gap(const BForm& a, const BForm& b, const Chart& chart, std::size_t points) {
  double worst = 0.0;
  const BForm d = a - b;
  if (d.is_zero()) return 0.0;
  ExprProgram prog(d.coefficient_list());
  for (const auto& p : chart.grid(points, true))
    for (double v : prog.evaluate(p)) worst = std::max(worst, std::fabs(v));
  return worst;
}

}  // namespace

TEST_CASE("dual bivector examples") {
  Chart c4 = Chart::standard(4);
  BForm darboux = F("e{1,2} + e{3,4}", c4.frame(), 2);
  BBivector p = dual_bivector(darboux, c4);
  CHECK(p.at(0, 1) == Expr(1));
  CHECK(p.at(2, 3) == Expr(1));
  CHECK(p.at(0, 2).is_zero());
  BBivector anchor = p.anchor();
  CHECK(anchor.at(0, 1) == x(1));
  CHECK(anchor.at(2, 3) == Expr(1));
  CHECK(invert_bivector(p, c4) == darboux);

  Chart c2 = Chart::standard(2);
  BBivector half = dual_bivector(F("2*e{1,2}", c2.frame(), 2), c2);
  CHECK(half.at(0, 1) == Expr(Rational(1, 2)));
  CHECK(invert_bivector(half, c2) == F("2*e{1,2}", c2.frame(), 2));

  // Random constant form: oracle is −W⁻¹ from a numeric inverse.
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 5; ++trial) {
    BForm w(c4.frame(), 2);
    std::uniform_int_distribution<int> coef(-5, 5);
    for (int i = 0; i < 4; ++i)
      for (int j = i + 1; j < 4; ++j) w.add(mask_of({i, j}), Expr(coef(rng)));
    const double origin[] = {0, 0, 0, 0};
    if (std::fabs(pfaffian(w.matrix(origin))) < 0.5) continue;
    BBivector pi = dual_bivector(w, c4);
    Eigen::MatrixXd expect = -w.matrix(origin).inverse();
    CHECK((pi.matrix(origin) - expect).norm() <= 1e-12);
    CHECK(invert_bivector(pi, c4) == w);
  }
}

TEST_CASE("degenerate forms are rejected with a location") {
  Chart c2 = Chart::standard(2);
  Tolerances coarse;
  coarse.grid = 25;  // 5 points per axis, so x2 = 0 is sampled
  try {
    dual_bivector(F("x2*e{1,2}", c2.frame(), 2), c2, coarse);
    FAIL("expected degeneracy");
  } catch (const GeometryError& e) {
    REQUIRE(e.point().size() == 2);
    CHECK(e.point()[1] == 0.0);
  }
  CHECK_THROWS_AS(dual_bivector(BForm(c2.frame(), 2), c2), GeometryError);
}

TEST_CASE("log-symplectic check examples") {
  Chart torus = Chart::torus(2);
  BBivector pi(Frame::ordinary(2));
  pi.set(0, 1, sin(2 * Expr::pi() * x(1)));
  TransversalityReport r = log_symplectic_check(pi, torus);
  CHECK(r.pass);
  CHECK(r.exact_on_z);
  CHECK(r.min_abs_dh == doctest::Approx(2 * M_PI));
  REQUIRE(torus.z_components().size() == 2);
  CHECK(torus.z_components()[1].x1 == doctest::Approx(0.5));
  CHECK(r.extra_zeros.empty());

  Chart c2 = Chart::standard(2);
  BBivector tangential(Frame::ordinary(2));
  tangential.set(0, 1, x(1) * x(1));
  TransversalityReport bad = log_symplectic_check(tangential, c2);
  CHECK_FALSE(bad.pass);
  CHECK(bad.min_abs_dh == 0.0);

  Chart c4 = Chart::standard(4);
  BBivector model(Frame::ordinary(4));
  model.set(0, 1, x(1));
  model.set(2, 3, Expr(1));
  TransversalityReport ok = log_symplectic_check(model, c4);
  CHECK(ok.pass);
  CHECK(ok.h == x(1));
  CHECK(ok.poisson_method == "exact");

  // ∂1∧∂2 + x1 ∂3∧∂4: h = x1 is transverse but the Jacobi identity fails.
  BBivector twisted(Frame::ordinary(4));
  twisted.set(0, 1, Expr(1));
  twisted.set(2, 3, x(1));
  TransversalityReport tw = log_symplectic_check(twisted, c4);
  CHECK_FALSE(tw.poisson);
  CHECK_FALSE(tw.pass);

  // A second transverse zero at x1 = 1/2 on a standard chart is reported, not failed.
  BBivector two(Frame::ordinary(2));
  two.set(0, 1, x(1) * (Expr(1) - 2 * x(1)));
  TransversalityReport extra = log_symplectic_check(two, c2);
  CHECK(extra.pass);
  REQUIRE(extra.extra_zeros.size() == 1);
  CHECK(extra.extra_zeros[0] == doctest::Approx(0.5));
}

TEST_CASE("cosymplectic extraction") {
  Chart c4 = Chart::standard(4);
  auto data = cosymplectic_extract(F("e{1,2} + e{3,4}", c4.frame(), 2), c4);
  REQUIRE(data.size() == 1);
  CHECK(data[0].theta == F("e{2}", c4.frame(), 1));
  CHECK(data[0].sigma == F("e{3,4}", c4.frame(), 2));
  CHECK(data[0].margin == doctest::Approx(1.0));

  Chart c2 = Chart::standard(2);
  auto d2 = cosymplectic_extract(F("e{1,2}", c2.frame(), 2), c2);
  CHECK(d2[0].theta == F("e{2}", c2.frame(), 1));
  CHECK(d2[0].sigma.is_zero());

  CHECK_THROWS_AS(cosymplectic_extract(F("e{1,2} + x3*e{1,4} + e{3,4}", c4.frame(), 2), c4), GeometryError);
  CHECK_THROWS_AS(cosymplectic_extract(F("e{1,2}", c4.frame(), 2), c4), GeometryError);

  // Collar form λ∧θ + σ with closed x1-independent data returns (θ, σ) exactly.
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 5; ++trial) {
    BForm theta = F("e{2}", c4.frame(), 1) + b_d(BForm::scalar(c4.frame(), Expr(Rational(1, 5)) * sin(x(2) + x(3))));
    BForm sigma = F("e{3,4}", c4.frame(), 2) + Expr(Rational(1, 10)) * b_d(F("(x2*x3)*e{4}", c4.frame(), 1));
    if (trial % 2 == 1) sigma = sigma + Expr(Rational(1, 10)) * b_d(cos(x(4)) * F("e{3}", c4.frame(), 1));
    BForm omega = wedge(BForm::slot(c4.frame(), 0), theta) + sigma;
    auto got = cosymplectic_extract(omega, c4);
    CHECK(got[0].theta == theta);
    CHECK(got[0].sigma == sigma);
  }
}

TEST_CASE("b-map validation") {
  Chart c2 = Chart::standard(2);
  BMapModel id{c2.frame(), c2.frame(), {x(1), x(2)}, Expr(1)};
  CHECK(validate_bmap(id, c2).pass());

  Chart t4 = Chart::torus(4);
  Chart t2 = Chart::torus(2);
  BMapModel proj{t4.frame(), t2.frame(), {x(1), x(2)}, std::nullopt};
  Certificate pc = validate_bmap(proj, t4);
  CHECK(pc.pass());
  CHECK(pc.parameters()["u"] == "1");

  BMapModel square{c2.frame(), c2.frame(), {x(1) * x(1), x(2)}, x(1)};
  Certificate sc = validate_bmap(square, c2);
  CHECK_FALSE(sc.pass());
  CHECK(sc.margin("min_abs_u") == 0.0);

  BMapModel unfactored{c2.frame(), c2.frame(), {x(1) * x(1), x(2)}, std::nullopt};
  CHECK_THROWS_AS(validate_bmap(unfactored, c2), GeometryError);
}

TEST_CASE("pullback along validated b-maps preserves closedness") {
  std::mt19937_64 rng(4);
  Chart src = Chart::standard(4);
  Chart tgt = Chart::standard(4);
  Expr u = 2 + sin(x(2) * x(3));
  BMapModel f{src.frame(), tgt.frame(), {x(1) * u, x(2) + x(4) * x(4), x(3) * x(2), cos(x(4))}, u};
  REQUIRE(validate_bmap(f, src).pass());
  for (int trial = 0; trial < 5; ++trial) {
    BForm omega = testing::random_bsymplectic(rng, tgt);
    REQUIRE(b_d(omega).is_zero());
    BForm pulled = pullback(f, omega);
    ZeroVerdict v = zero_test(b_d(pulled).coefficient_list(), src.grid(500, true), 1e-10);
    CHECK(v.zero);
  }
}

TEST_CASE("section splitting") {
  Chart base = Chart::standard(2);
  Chart total = Chart::standard(4);
  BMapModel f{total.frame(), base.frame(), {x(1), x(2)}, Expr(1)};
  BMapModel s{base.frame(), total.frame(), {x(1), x(2), Expr(Rational(1, 3)), Expr(Rational(-1, 5))}, Expr(1)};
  SplittingReport r = section_splitting_check(f, s, base, small_grid());
  CHECK(r.split);
  CHECK(r.section_method == "exact");
  CHECK(r.min_rank == 4);

  // Graph section y ↦ (y, sin y2, y1²): oracle is the rank of [ker | image] at samples.
  BMapModel graph{base.frame(), total.frame(), {x(1), x(2), sin(x(2)), x(1) * x(1)}, Expr(1)};
  SplittingReport g = section_splitting_check(f, graph, base, small_grid());
  CHECK(g.split);
  CHECK(g.min_singular_value > 0.1);

  BMapModel not_section{base.frame(), total.frame(), {x(1), x(1) + x(2), Expr(0), Expr(0)}, Expr(1)};
  CHECK_THROWS_AS(section_splitting_check(f, not_section, base, small_grid()), GeometryError);
}

TEST_CASE("duality roundtrip on random b-symplectic forms") {
  std::mt19937_64 rng(2718);
  Tolerances tol = small_grid();
  for (int dim : {2, 4, 6}) {
    for (const Chart& chart : {Chart::standard(dim), Chart::torus(dim)}) {
      for (int trial = 0; trial < 3; ++trial) {
        BForm omega = testing::random_bsymplectic(rng, chart, 200);
        BBivector pi = dual_bivector(omega, chart, tol);
        BForm back = invert_bivector(pi, chart, tol);
        CHECK(max_coefficient_gap(back, omega, chart, 300) <= 1e-9);
        TransversalityReport r = log_symplectic_check(pi.anchor(), chart, tol);
        CHECK(r.pass);
        CHECK(r.poisson);
      }
    }
  }
}
