#include <cmath>
#include <map>
#include <random>

#include <Eigen/Dense>

#include "doctest.h"
#include "logsym/topology.hpp"

using namespace logsym;

namespace {

// Brute force over all GF(2) orientation labelings of the triangles: admissible iff some labeling
// makes every shared edge either consistently oriented off Z or flipped on Z.
bool brute_force_admissible(const TriangulatedSurface& s, const Z2Cycle& z) {
  std::map<std::pair<int, int>, int> in_z;
  for (const auto& e : z.edges) in_z[{std::min(e[0], e[1]), std::max(e[0], e[1])}] ^= 1;
  const std::size_t nt = s.triangles.size();
  REQUIRE(nt <= 20);
  for (unsigned long mask = 0; mask < (1ul << nt); ++mask) {
    std::map<std::pair<int, int>, int> net;  // signed count of directed uses after flipping
    bool ok = true;
    for (std::size_t t = 0; t < nt && ok; ++t) {
      const bool flip = (mask >> t) & 1u;
      for (int k = 0; k < 3; ++k) {
        int a = s.triangles[t][static_cast<std::size_t>(k)], b = s.triangles[t][static_cast<std::size_t>((k + 1) % 3)];
        if (flip) std::swap(a, b);
        net[{std::min(a, b), std::max(a, b)}] += a < b ? 1 : -1;
      }
    }
    for (const auto& [e, sum] : net) {
      const int crossing = in_z.count(e) ? in_z.at(e) : 0;
      if ((sum == 0) != (crossing == 0)) {
        ok = false;
        break;
      }
    }
    if (ok) return true;
  }
  return false;
}

Z2Cycle j_circle(int m, int n, int i) {
  Z2Cycle z;
  for (int j = 0; j < n; ++j)
    z.edges.push_back({TriangulatedSurface::grid_vertex(m, n, i, j), TriangulatedSurface::grid_vertex(m, n, i, j + 1)});
  return z;
}

Z2Cycle triangle_boundaries(const TriangulatedSurface& s, std::mt19937& rng) {
  Z2Cycle z;
  std::bernoulli_distribution pick(0.3);
  for (const auto& t : s.triangles)
    if (pick(rng))
      for (int k = 0; k < 3; ++k) z.edges.push_back({t[static_cast<std::size_t>(k)], t[static_cast<std::size_t>((k + 1) % 3)]});
  return z;
}

Rational q_value(const std::vector<std::vector<long>>& q, const std::vector<Rational>& w) {
  CohomologyRing r{q, std::nullopt};
  return r.form(w, w);
}

double q_value(const std::vector<std::vector<long>>& q, const std::vector<double>& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i)
    for (std::size_t j = 0; j < q.size(); ++j) s += w[i] * static_cast<double>(q[i][j]) * w[j];
  return s;
}

std::vector<std::vector<long>> hyperbolic_sum(int copies) {
  std::vector<std::vector<long>> q(static_cast<std::size_t>(2 * copies), std::vector<long>(static_cast<std::size_t>(2 * copies), 0));
  for (int k = 0; k < copies; ++k) q[static_cast<std::size_t>(2 * k)][static_cast<std::size_t>(2 * k + 1)] = q[static_cast<std::size_t>(2 * k + 1)][static_cast<std::size_t>(2 * k)] = 1;
  return q;
}

// P^T Q P for a random unimodular P built from elementary moves.
std::vector<std::vector<long>> random_change(const std::vector<std::vector<long>>& q, std::mt19937& rng) {
  const int n = static_cast<int>(q.size());
  Eigen::MatrixXd p = Eigen::MatrixXd::Identity(n, n);
  std::uniform_int_distribution<int> idx(0, n - 1), coef(-2, 2);
  for (int step = 0; step < 4; ++step) {
    const int i = idx(rng), j = idx(rng);
    if (i == j) continue;
    Eigen::MatrixXd e = Eigen::MatrixXd::Identity(n, n);
    e(i, j) = coef(rng);
    p = p * e;
  }
  Eigen::MatrixXd qm(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) qm(i, j) = static_cast<double>(q[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
  const Eigen::MatrixXd r = p.transpose() * qm * p;
  std::vector<std::vector<long>> out(q.size(), std::vector<long>(q.size()));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = std::lround(r(i, j));
  return out;
}

int inertia_sign(const std::vector<std::vector<long>>& q) {
  const int n = static_cast<int>(q.size());
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = static_cast<double>(q[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
  const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m).eigenvalues();
  if (ev.minCoeff() > 1e-9) return 1;
  if (ev.maxCoeff() < -1e-9) return -1;
  return 0;
}

}  // namespace

TEST_CASE("surface admissibility on the standard examples") {
  const auto rp2 = TriangulatedSurface::projective_plane();
  const auto empty = surface_log_admissibility(rp2, {});
  CHECK_FALSE(empty.admissible);
  CHECK_FALSE(empty.orientable);
  CHECK(empty.euler_characteristic == 1);
  CHECK(empty.h1_rank == 1);
  REQUIRE(empty.violating_loop.has_value());
  CHECK(empty.violating_w1 == 1);
  CHECK(empty.violating_intersection == 0);
  CHECK_FALSE(brute_force_admissible(rp2, {}));

  const Z2Cycle line{{{0, 1}, {1, 3}, {3, 0}}};
  CHECK(surface_log_admissibility(rp2, line).admissible);
  CHECK(brute_force_admissible(rp2, line));

  const auto torus = TriangulatedSurface::torus(3, 3);
  const auto t0 = surface_log_admissibility(torus, {});
  CHECK(t0.admissible);
  CHECK(t0.orientable);
  CHECK(t0.euler_characteristic == 0);
  CHECK(t0.h1_rank == 2);
  CHECK_FALSE(surface_log_admissibility(torus, j_circle(3, 3, 0)).admissible);
  CHECK_FALSE(brute_force_admissible(torus, j_circle(3, 3, 0)));
  Z2Cycle two = j_circle(3, 3, 0);
  for (const auto& e : j_circle(3, 3, 1).edges) two.edges.push_back(e);
  CHECK(surface_log_admissibility(torus, two).admissible);

  const auto oct = TriangulatedSurface::octahedron();
  const Z2Cycle equator{{{1, 2}, {2, 3}, {3, 4}, {4, 1}}};
  const auto s2 = surface_log_admissibility(oct, equator);
  CHECK(s2.admissible);
  CHECK(s2.euler_characteristic == 2);
  CHECK(s2.h1_rank == 0);
  CHECK(brute_force_admissible(oct, equator));

  const auto klein = TriangulatedSurface::klein_bottle(3, 3);
  const auto k0 = surface_log_admissibility(klein, {});
  CHECK_FALSE(k0.admissible);
  CHECK_FALSE(k0.orientable);
  CHECK(k0.euler_characteristic == 0);
  CHECK(k0.h1_rank == 2);
  CHECK(surface_log_admissibility(klein, j_circle(3, 3, 0)).admissible);
  CHECK(brute_force_admissible(klein, j_circle(3, 3, 0)));
}

TEST_CASE("surface admissibility matches brute force on random cycles") {
  std::mt19937 rng(11);
  const std::vector<TriangulatedSurface> surfaces{TriangulatedSurface::torus(3, 3), TriangulatedSurface::klein_bottle(3, 3),
                                                  TriangulatedSurface::projective_plane(), TriangulatedSurface::octahedron()};
  for (const auto& s : surfaces)
    for (int trial = 0; trial < 6; ++trial) {
      Z2Cycle z = triangle_boundaries(s, rng);
      if (trial % 2 && s.vertex_count == 9)
        for (const auto& e : j_circle(3, 3, trial % 3).edges) z.edges.push_back(e);
      CHECK(surface_log_admissibility(s, z).admissible == brute_force_admissible(s, z));
    }
}

TEST_CASE("surface admissibility is invariant under barycentric subdivision") {
  std::mt19937 rng(5);
  const std::vector<std::pair<TriangulatedSurface, Z2Cycle>> cases{
      {TriangulatedSurface::projective_plane(), {}},
      {TriangulatedSurface::projective_plane(), Z2Cycle{{{0, 1}, {1, 3}, {3, 0}}}},
      {TriangulatedSurface::torus(3, 4), j_circle(3, 4, 1)},
      {TriangulatedSurface::torus(4, 3), {}},
      {TriangulatedSurface::klein_bottle(3, 4), j_circle(3, 4, 0)},
      {TriangulatedSurface::klein_bottle(4, 3), {}},
      {TriangulatedSurface::octahedron(), Z2Cycle{{{1, 2}, {2, 3}, {3, 4}, {4, 1}}}}};
  for (const auto& [s, z] : cases) {
    const auto base = surface_log_admissibility(s, z);
    auto sub = barycentric_subdivision(s);
    auto zs = subdivide_cycle(s, z);
    const auto once = surface_log_admissibility(sub, zs);
    CHECK(once.admissible == base.admissible);
    CHECK(once.orientable == base.orientable);
    CHECK(once.euler_characteristic == base.euler_characteristic);
    CHECK(once.h1_rank == base.h1_rank);
    const auto twice = surface_log_admissibility(barycentric_subdivision(sub), subdivide_cycle(sub, zs));
    CHECK(twice.admissible == base.admissible);
    CHECK(sub.triangles.size() == 6 * s.triangles.size());
  }
}

TEST_CASE("surface input errors") {
  TriangulatedSurface disk{4, {{0, 1, 2}, {0, 2, 3}}};
  CHECK_THROWS_AS(surface_log_admissibility(disk, {}), TopologyError);
  const auto oct = TriangulatedSurface::octahedron();
  CHECK_THROWS_AS(surface_log_admissibility(oct, Z2Cycle{{{1, 2}, {2, 3}}}), TopologyError);
  CHECK_THROWS_AS(surface_log_admissibility(oct, Z2Cycle{{{0, 5}}}), TopologyError);
  TriangulatedSurface bad = oct;
  bad.triangles[0] = {0, 1, 9};
  CHECK_THROWS_AS(surface_log_admissibility(bad, {}), TopologyError);
  // Two octahedra glued at a vertex: every edge has two triangles but the link is not a circle.
  TriangulatedSurface pinched = oct;
  pinched.vertex_count = 11;
  for (const auto& t : oct.triangles) {
    std::array<int, 3> u{};
    for (int k = 0; k < 3; ++k) u[static_cast<std::size_t>(k)] = t[static_cast<std::size_t>(k)] == 0 ? 0 : t[static_cast<std::size_t>(k)] + 5;
    pinched.triangles.push_back(u);
  }
  CHECK_THROWS_AS(surface_log_admissibility(pinched, {}), TopologyError);
}

TEST_CASE("obstruction A") {
  const auto s4 = obstruction_a(CohomologyRing{{}, 2}, 2);
  CHECK_FALSE(s4.witness.has_value());
  CHECK(s4.exact);
  const auto t4 = obstruction_a(CohomologyRing{hyperbolic_sum(3), 2}, 2);
  REQUIRE(t4.witness.has_value());
  CHECK(t4.witness->size() == 6);
  const std::vector<std::vector<long>> split{{1, 0}, {0, -1}};
  const auto three = obstruction_a(CohomologyRing{split, 3}, 3);
  REQUIRE(three.witness.has_value());
  std::vector<Rational> w;
  for (long v : *three.witness) w.emplace_back(v);
  CHECK(q_value(split, w) != 0);
  const auto zero = obstruction_a(CohomologyRing{{{0, 0}, {0, 0}}, 3}, 3, 3);
  CHECK_FALSE(zero.witness.has_value());
  CHECK(zero.exact);
  CHECK(zero.searched == 48);
  CHECK_THROWS_AS(obstruction_a(CohomologyRing{split, 4}, 4), TopologyError);
  CHECK_THROWS_AS(obstruction_a(CohomologyRing{{{1, 2}, {3, 1}}, 2}, 2), TopologyError);
}

TEST_CASE("obstruction B examples") {
  const auto pos = obstruction_b(CohomologyRing{{{1, 0}, {0, 1}}, 2});
  CHECK_FALSE(pos.has_witness);
  CHECK(pos.definite);
  CHECK(pos.obstructed);
  for (const auto& d : pos.diagonal) CHECK(sgn(d) > 0);

  const auto hyp = obstruction_b(CohomologyRing{{{0, 1}, {1, 0}}, 2});
  REQUIRE(hyp.rational_witness.has_value());
  CHECK(*hyp.rational_witness == std::vector<Rational>{1, 0});
  CHECK_FALSE(hyp.obstructed);

  const auto split = obstruction_b(CohomologyRing{{{1, 0}, {0, -1}}, 2});
  REQUIRE(split.rational_witness.has_value());
  CHECK(*split.rational_witness == std::vector<Rational>{1, 1});

  const std::vector<std::vector<long>> irr{{1, 0}, {0, -2}};
  const auto real = obstruction_b(CohomologyRing{irr, 2});
  CHECK(real.has_witness);
  CHECK_FALSE(real.rational_witness.has_value());
  CHECK(std::fabs(q_value(irr, real.witness)) < 1e-12);
  CHECK(real.witness_formula.find("sqrt(2)") != std::string::npos);

  const auto single = obstruction_b(CohomologyRing{{{0}}, 2});
  CHECK(single.has_witness);
  CHECK_FALSE(single.b2_clause);
  CHECK(single.obstructed);

  const auto degenerate = obstruction_b(CohomologyRing{{{1, 1}, {1, 1}}, 2});
  REQUIRE(degenerate.rational_witness.has_value());
  CHECK(q_value({{1, 1}, {1, 1}}, *degenerate.rational_witness) == 0);
  CHECK_THROWS_AS(obstruction_b(CohomologyRing{{{1, 0}}, 2}), TopologyError);
}

TEST_CASE("obstruction B under unimodular change of basis") {
  std::mt19937 rng(2024);
  const std::vector<std::vector<std::vector<long>>> forms{
      {{1, 0}, {0, 1}}, {{0, 1}, {1, 0}}, {{1, 0}, {0, -1}}, {{1, 0}, {0, -2}},
      {{2, 1, 0}, {1, 2, 1}, {0, 1, 2}}, {{-1, 0, 0}, {0, -3, 0}, {0, 0, -1}}, {{1, 0, 0}, {0, 1, 0}, {0, 0, -3}}};
  for (const auto& q : forms) {
    const auto base = obstruction_b(CohomologyRing{q, 2});
    CHECK(base.has_witness == (inertia_sign(q) == 0));
    for (int trial = 0; trial < 50; ++trial) {
      const auto qp = random_change(q, rng);
      const auto r = obstruction_b(CohomologyRing{qp, 2});
      CHECK(r.has_witness == base.has_witness);
      CHECK(r.definite == base.definite);
      CHECK(r.obstructed == base.obstructed);
      CHECK_FALSE((r.has_witness && r.definite));
      if (r.rational_witness) {
        CHECK(q_value(qp, *r.rational_witness) == 0);
      } else if (r.has_witness) {
        double norm = 0.0;
        for (double v : r.witness) norm += v * v;
        CHECK(std::fabs(q_value(qp, r.witness)) <= 1e-9 * norm);
      }
      // C^T Q C = diag(d) exactly
      CohomologyRing ring{qp, 2};
      for (std::size_t i = 0; i < qp.size(); ++i)
        for (std::size_t j = 0; j < qp.size(); ++j)
          CHECK(ring.form(r.congruence[i], r.congruence[j]) == (i == j ? r.diagonal[i] : Rational(0)));
    }
  }
}
