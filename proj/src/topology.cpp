#include "logsym/topology.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <queue>

namespace logsym {

namespace {

using Edge = std::pair<int, int>;

Edge key(int a, int b) { return {std::min(a, b), std::max(a, b)}; }

struct EdgeUse {
  int triangle;
  int from;  ///< directed as it appears in the triangle's oriented boundary
  int to;
};

std::map<Edge, std::vector<EdgeUse>> edge_uses(const TriangulatedSurface& s) {
  std::map<Edge, std::vector<EdgeUse>> uses;
  for (std::size_t t = 0; t < s.triangles.size(); ++t) {
    const auto& tri = s.triangles[t];
    for (int k = 0; k < 3; ++k) {
      const int a = tri[static_cast<std::size_t>(k)], b = tri[static_cast<std::size_t>((k + 1) % 3)];
      uses[key(a, b)].push_back({static_cast<int>(t), a, b});
    }
  }
  return uses;
}

void validate_surface(const TriangulatedSurface& s, const std::map<Edge, std::vector<EdgeUse>>& uses) {
  if (s.vertex_count <= 0 || s.triangles.empty()) throw TopologyError("surface has no triangles");
  std::vector<std::array<int, 3>> sorted;
  std::vector<int> used(static_cast<std::size_t>(s.vertex_count), 0);
  for (const auto& t : s.triangles) {
    for (int v : t) {
      if (v < 0 || v >= s.vertex_count) throw TopologyError("triangle vertex " + std::to_string(v) + " out of range");
      used[static_cast<std::size_t>(v)] = 1;
    }
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) throw TopologyError("degenerate triangle");
    auto c = t;
    std::sort(c.begin(), c.end());
    sorted.push_back(c);
  }
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) throw TopologyError("repeated triangle");
  for (int v = 0; v < s.vertex_count; ++v)
    if (!used[static_cast<std::size_t>(v)]) throw TopologyError("vertex " + std::to_string(v) + " is in no triangle");
  for (const auto& [e, list] : uses)
    if (list.size() != 2)
      throw TopologyError("surface is not closed: edge {" + std::to_string(e.first) + "," + std::to_string(e.second) +
                          "} borders " + std::to_string(list.size()) + " triangle(s)");
  // Vertex links must be connected (single disk around each vertex).
  std::vector<std::vector<int>> star(static_cast<std::size_t>(s.vertex_count));
  for (std::size_t t = 0; t < s.triangles.size(); ++t)
    for (int v : s.triangles[t]) star[static_cast<std::size_t>(v)].push_back(static_cast<int>(t));
  for (int v = 0; v < s.vertex_count; ++v) {
    const auto& around = star[static_cast<std::size_t>(v)];
    std::vector<int> seen{around.front()};
    std::vector<int> todo{around.front()};
    while (!todo.empty()) {
      const int t = todo.back();
      todo.pop_back();
      for (int w : s.triangles[static_cast<std::size_t>(t)]) {
        if (w == v) continue;
        for (const auto& u : uses.at(key(v, w)))
          if (std::find(seen.begin(), seen.end(), u.triangle) == seen.end()) {
            seen.push_back(u.triangle);
            todo.push_back(u.triangle);
          }
      }
    }
    if (seen.size() != around.size()) throw TopologyError("vertex " + std::to_string(v) + " has a disconnected link");
  }
}

}  // namespace

int TriangulatedSurface::grid_vertex(int m, int n, int i, int j) { return ((i % m + m) % m) * n + ((j % n + n) % n); }

TriangulatedSurface TriangulatedSurface::torus(int m, int n) {
  if (m < 3 || n < 3) throw TopologyError("grid torus needs m, n >= 3");
  TriangulatedSurface s{m * n, {}};
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      const int a = grid_vertex(m, n, i, j), b = grid_vertex(m, n, i + 1, j);
      const int c = grid_vertex(m, n, i + 1, j + 1), d = grid_vertex(m, n, i, j + 1);
      s.triangles.push_back({a, b, c});
      s.triangles.push_back({a, c, d});
    }
  return s;
}

TriangulatedSurface TriangulatedSurface::klein_bottle(int m, int n) {
  if (m < 3 || n < 3) throw TopologyError("grid Klein bottle needs m, n >= 3");
  auto v = [&](int i, int j) { return i < m ? grid_vertex(m, n, i, j) : grid_vertex(m, n, 0, -j); };
  TriangulatedSurface s{m * n, {}};
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      const int a = v(i, j), b = v(i + 1, j), c = v(i + 1, j + 1), d = v(i, j + 1);
      s.triangles.push_back({a, b, c});
      s.triangles.push_back({a, c, d});
    }
  return s;
}

TriangulatedSurface TriangulatedSurface::projective_plane() {
  return {6, {{0, 1, 2}, {0, 2, 3}, {0, 3, 4}, {0, 4, 5}, {0, 5, 1}, {1, 2, 4}, {2, 3, 5}, {3, 4, 1}, {4, 5, 2}, {5, 1, 3}}};
}

TriangulatedSurface TriangulatedSurface::octahedron() {
  TriangulatedSurface s{6, {}};
  for (int i = 1; i <= 4; ++i) {
    const int next = i % 4 + 1;
    s.triangles.push_back({0, i, next});
    s.triangles.push_back({5, next, i});
  }
  return s;
}

nlohmann::json SurfaceReport::to_json() const {
  nlohmann::json j{{"admissible", admissible},
                   {"orientable", orientable},
                   {"euler_characteristic", euler_characteristic},
                   {"components", components},
                   {"h1_rank_gf2", h1_rank},
                   {"loops_checked", loops_checked}};
  if (violating_loop)
    j["violation"] = {{"loop", *violating_loop}, {"w1", violating_w1}, {"z_intersection", violating_intersection}};
  return j;
}

SurfaceReport surface_log_admissibility(const TriangulatedSurface& surface, const Z2Cycle& z) {
  const auto uses = edge_uses(surface);
  validate_surface(surface, uses);

  std::map<Edge, int> in_z;
  for (const auto& e : z.edges) {
    const Edge k = key(e[0], e[1]);
    if (!uses.count(k))
      throw TopologyError("Z edge {" + std::to_string(e[0]) + "," + std::to_string(e[1]) + "} is not an edge of the surface");
    in_z[k] ^= 1;
  }
  std::vector<int> degree(static_cast<std::size_t>(surface.vertex_count), 0);
  for (const auto& [e, bit] : in_z)
    if (bit) {
      degree[static_cast<std::size_t>(e.first)] ^= 1;
      degree[static_cast<std::size_t>(e.second)] ^= 1;
    }
  for (int v = 0; v < surface.vertex_count; ++v)
    if (degree[static_cast<std::size_t>(v)]) throw TopologyError("Z is not a cycle: odd degree at vertex " + std::to_string(v));

  // Dual graph: one edge per surface edge, weighted by orientation reversal and Z membership.
  struct DualEdge {
    int a, b, reversal, crossing;
  };
  std::vector<DualEdge> dual;
  std::vector<std::vector<int>> incident(surface.triangles.size());
  for (const auto& [e, list] : uses) {
    const EdgeUse& u = list[0];
    const EdgeUse& w = list[1];
    const int reversal = (u.from == w.to && u.to == w.from) ? 0 : 1;
    const auto it = in_z.find(e);
    dual.push_back({u.triangle, w.triangle, reversal, it == in_z.end() ? 0 : it->second});
    incident[static_cast<std::size_t>(u.triangle)].push_back(static_cast<int>(dual.size() - 1));
    incident[static_cast<std::size_t>(w.triangle)].push_back(static_cast<int>(dual.size() - 1));
  }

  SurfaceReport r;
  r.euler_characteristic = surface.vertex_count - static_cast<int>(uses.size()) + static_cast<int>(surface.triangles.size());
  const std::size_t nt = surface.triangles.size();
  std::vector<int> w1(nt, -1), cross(nt, -1);
  std::vector<char> tree(dual.size(), 0);
  for (std::size_t root = 0; root < nt; ++root) {
    if (w1[root] >= 0) continue;
    ++r.components;
    w1[root] = cross[root] = 0;
    std::queue<int> q;
    q.push(static_cast<int>(root));
    while (!q.empty()) {
      const int t = q.front();
      q.pop();
      for (int k : incident[static_cast<std::size_t>(t)]) {
        const DualEdge& d = dual[static_cast<std::size_t>(k)];
        const int other = d.a == t ? d.b : d.a;
        if (w1[static_cast<std::size_t>(other)] >= 0) continue;
        w1[static_cast<std::size_t>(other)] = w1[static_cast<std::size_t>(t)] ^ d.reversal;
        cross[static_cast<std::size_t>(other)] = cross[static_cast<std::size_t>(t)] ^ d.crossing;
        tree[static_cast<std::size_t>(k)] = 1;
        q.push(other);
      }
    }
  }
  r.h1_rank = 2 * r.components - r.euler_characteristic;
  r.orientable = true;
  r.admissible = true;
  for (std::size_t k = 0; k < dual.size(); ++k) {
    if (tree[k]) continue;
    const DualEdge& d = dual[k];
    const int loop_w1 = w1[static_cast<std::size_t>(d.a)] ^ w1[static_cast<std::size_t>(d.b)] ^ d.reversal;
    const int loop_z = cross[static_cast<std::size_t>(d.a)] ^ cross[static_cast<std::size_t>(d.b)] ^ d.crossing;
    if (loop_w1) r.orientable = false;
    if (loop_w1 != loop_z && r.admissible) {
      r.admissible = false;
      r.violating_loop = r.loops_checked;
      r.violating_w1 = loop_w1;
      r.violating_intersection = loop_z;
    }
    ++r.loops_checked;
  }
  return r;
}

namespace {

std::map<Edge, int> midpoint_index(const TriangulatedSurface& s) {
  std::map<Edge, int> mid;
  for (const auto& t : s.triangles)
    for (int k = 0; k < 3; ++k) mid.emplace(key(t[static_cast<std::size_t>(k)], t[static_cast<std::size_t>((k + 1) % 3)]), 0);
  int next = s.vertex_count;
  for (auto& [e, idx] : mid) idx = next++;
  return mid;
}

}  // namespace

TriangulatedSurface barycentric_subdivision(const TriangulatedSurface& surface) {
  const auto mid = midpoint_index(surface);
  TriangulatedSurface out{surface.vertex_count + static_cast<int>(mid.size()) + static_cast<int>(surface.triangles.size()), {}};
  int centre = surface.vertex_count + static_cast<int>(mid.size());
  for (const auto& t : surface.triangles) {
    for (int k = 0; k < 3; ++k) {
      const int a = t[static_cast<std::size_t>(k)], b = t[static_cast<std::size_t>((k + 1) % 3)];
      const int m = mid.at(key(a, b));
      out.triangles.push_back({a, m, centre});
      out.triangles.push_back({m, b, centre});
    }
    ++centre;
  }
  return out;
}

Z2Cycle subdivide_cycle(const TriangulatedSurface& surface, const Z2Cycle& z) {
  const auto mid = midpoint_index(surface);
  Z2Cycle out;
  for (const auto& e : z.edges) {
    const auto it = mid.find(key(e[0], e[1]));
    if (it == mid.end()) throw TopologyError("Z edge is not an edge of the surface");
    out.edges.push_back({e[0], it->second});
    out.edges.push_back({it->second, e[1]});
  }
  return out;
}

void CohomologyRing::validate() const {
  const std::size_t b = q.size();
  for (const auto& row : q)
    if (row.size() != b) throw TopologyError("cup-product matrix must be square");
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (q[i][j] != q[j][i]) throw TopologyError("cup-product matrix must be symmetric");
  if (n && *n < 1) throw TopologyError("half-dimension n must be positive");
}

Rational CohomologyRing::form(const std::vector<Rational>& a, const std::vector<Rational>& b) const {
  Rational s = 0;
  for (std::size_t i = 0; i < q.size(); ++i)
    for (std::size_t j = 0; j < q.size(); ++j) s += a[i] * Rational(q[i][j]) * b[j];
  return s;
}

nlohmann::json ObstructionAReport::to_json() const {
  nlohmann::json j{{"n", n}, {"exact", exact}, {"statement", statement}};
  j["witness"] = witness ? nlohmann::json(*witness) : nlohmann::json(nullptr);
  if (n == 3) {
    j["box"] = box;
    j["searched"] = searched;
  }
  return j;
}

ObstructionAReport obstruction_a(const CohomologyRing& ring, int n, int box) {
  ring.validate();
  ObstructionAReport r;
  r.n = n;
  const int b2 = ring.b2();
  if (n == 2) {
    if (b2 > 0) {
      r.witness = std::vector<long>(static_cast<std::size_t>(b2), 0);
      (*r.witness)[0] = 1;
      r.statement = "the generator e1 is a nonzero class, so a^(n-1) = a != 0";
    } else {
      r.statement = "b2 = 0: no class a has a^(n-1) != 0, so no log-symplectic structure exists";
    }
    return r;
  }
  if (n != 3) throw TopologyError("obstruction_a supports n = 2 and n = 3 only");
  r.box = box;
  constexpr std::size_t kCap = 2000000;
  bool all_zero = true;
  for (const auto& row : ring.q)
    for (long v : row) all_zero = all_zero && v == 0;
  std::vector<long> a(static_cast<std::size_t>(b2));
  for (int radius = 1; radius <= box && b2 > 0 && !r.witness && r.searched < kCap; ++radius) {
    std::fill(a.begin(), a.end(), -radius);
    while (r.searched < kCap) {
      long top = 0;
      for (long v : a) top = std::max(top, std::labs(v));
      if (top == radius) {
        ++r.searched;
        long value = 0;
        for (int i = 0; i < b2; ++i)
          for (int j = 0; j < b2; ++j) value += a[static_cast<std::size_t>(i)] * ring.q[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] * a[static_cast<std::size_t>(j)];
        if (value != 0) {
          r.witness = a;
          break;
        }
      }
      int k = 0;
      while (k < b2 && a[static_cast<std::size_t>(k)] == radius) a[static_cast<std::size_t>(k++)] = -radius;
      if (k == b2) break;
      ++a[static_cast<std::size_t>(k)];
    }
  }
  if (r.witness) {
    r.statement = "Q(a, a) != 0 for the witness a, so a^2 != 0";
  } else if (all_zero) {
    r.statement = "Q = 0: a^2 = 0 for every class";
  } else {
    r.exact = false;
    r.statement = "none found in the box (evidence, not proof)";
  }
  return r;
}

namespace {

std::optional<Rational> rational_sqrt(const Rational& v) {
  if (sgn(v) < 0) return std::nullopt;
  mpz_class num = v.get_num(), den = v.get_den();
  if (!mpz_perfect_square_p(num.get_mpz_t()) || !mpz_perfect_square_p(den.get_mpz_t())) return std::nullopt;
  mpz_class rn, rd;
  mpz_sqrt(rn.get_mpz_t(), num.get_mpz_t());
  mpz_sqrt(rd.get_mpz_t(), den.get_mpz_t());
  return Rational(rn, rd);
}

/// Scales a nonzero rational vector to a primitive integer vector with positive first nonzero entry.
std::vector<Rational> primitive(std::vector<Rational> v) {
  mpz_class l = 1;
  for (const auto& x : v) mpz_lcm(l.get_mpz_t(), l.get_mpz_t(), x.get_den().get_mpz_t());
  mpz_class g = 0;
  for (auto& x : v) {
    x *= Rational(l);
    mpz_class num = x.get_num();
    mpz_gcd(g.get_mpz_t(), g.get_mpz_t(), num.get_mpz_t());
  }
  int sign = 0;
  for (const auto& x : v)
    if (sgn(x) != 0) {
      sign = sgn(x);
      break;
    }
  for (auto& x : v) x = x / Rational(g) * sign;
  return v;
}

std::string vector_str(const std::vector<Rational>& v) {
  std::string s = "(";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + to_string(v[i]);
  return s + ")";
}

}  // namespace

nlohmann::json ObstructionBReport::to_json() const {
  nlohmann::json j;
  j["has_witness"] = has_witness;
  if (rational_witness) {
    std::vector<std::string> w;
    for (const auto& x : *rational_witness) w.push_back(to_string(x));
    j["witness"] = w;
    j["witness_kind"] = "rational";
  } else if (has_witness) {
    j["witness"] = witness;
    j["witness_kind"] = "real";
  }
  if (!witness_formula.empty()) j["witness_formula"] = witness_formula;
  j["definite"] = definite;
  std::vector<std::string> d;
  for (const auto& x : diagonal) d.push_back(to_string(x));
  j["diagonal"] = d;
  nlohmann::json c = nlohmann::json::array();
  for (const auto& col : congruence) {
    std::vector<std::string> cs;
    for (const auto& x : col) cs.push_back(to_string(x));
    c.push_back(cs);
  }
  j["congruence_columns"] = c;
  j["b2_clause"] = b2_clause;
  j["obstructed"] = obstructed;
  return j;
}

ObstructionBReport obstruction_b(const CohomologyRing& ring) {
  ring.validate();
  const int b = ring.b2();
  const std::size_t n = static_cast<std::size_t>(b);
  ObstructionBReport r;
  r.b2_clause = ring.n.value_or(2) <= 1 || b >= 2;

  std::vector<std::vector<Rational>> a(n, std::vector<Rational>(n));
  std::vector<std::vector<Rational>> c(n, std::vector<Rational>(n, Rational(0)));  // c[col][row]
  for (std::size_t i = 0; i < n; ++i) {
    c[i][i] = 1;
    for (std::size_t j = 0; j < n; ++j) a[i][j] = ring.q[i][j];
  }
  auto swap_index = [&](std::size_t i, std::size_t j) {
    std::swap(a[i], a[j]);
    for (auto& row : a) std::swap(row[i], row[j]);
    std::swap(c[i], c[j]);
  };
  // basis vector j added to basis vector k: A ← EᵀAE with E = I + e_j e_kᵀ
  auto add_to = [&](std::size_t k, std::size_t j, const Rational& f) {
    for (std::size_t i = 0; i < n; ++i) a[i][k] += f * a[i][j];
    for (std::size_t i = 0; i < n; ++i) a[k][i] += f * a[j][i];
    for (std::size_t i = 0; i < n; ++i) c[k][i] += f * c[j][i];
  };
  for (std::size_t k = 0; k < n; ++k) {
    if (sgn(a[k][k]) == 0) {
      std::size_t j = k + 1;
      while (j < n && sgn(a[j][j]) == 0) ++j;
      if (j < n) {
        swap_index(k, j);
      } else {
        j = k + 1;
        while (j < n && sgn(a[k][j]) == 0) ++j;
        if (j == n) continue;
        add_to(k, j, Rational(1));
      }
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      if (sgn(a[i][k]) == 0) continue;
      add_to(i, k, -a[i][k] / a[k][k]);
    }
  }
  r.congruence = c;
  for (std::size_t i = 0; i < n; ++i) r.diagonal.push_back(a[i][i]);

  // Witnesses, simplest first: an isotropic basis vector, a radical vector, then a pair of
  // opposite-sign diagonal entries.
  for (std::size_t i = 0; i < n && !r.has_witness; ++i)
    if (ring.q[i][i] == 0) {
      std::vector<Rational> e(n, Rational(0));
      e[i] = 1;
      r.rational_witness = e;
      r.has_witness = true;
      r.witness_formula = "basis vector e" + std::to_string(i + 1) + " with Q(e, e) = 0";
    }
  for (std::size_t i = 0; i < n && !r.has_witness; ++i)
    if (sgn(r.diagonal[i]) == 0) {
      r.rational_witness = primitive(c[i]);
      r.has_witness = true;
      r.witness_formula = "radical vector " + vector_str(c[i]);
    }
  std::optional<std::pair<std::size_t, std::size_t>> real_pair;
  for (std::size_t i = 0; i < n && !r.has_witness; ++i)
    for (std::size_t j = 0; j < n && !r.has_witness; ++j) {
      if (!(sgn(r.diagonal[i]) > 0 && sgn(r.diagonal[j]) < 0)) continue;
      const Rational ratio = -r.diagonal[j] / r.diagonal[i];
      if (auto s = rational_sqrt(ratio)) {
        std::vector<Rational> w(n);
        for (std::size_t k = 0; k < n; ++k) w[k] = *s * c[i][k] + c[j][k];
        r.rational_witness = primitive(w);
        r.has_witness = true;
        r.witness_formula = to_string(*s) + "*c" + std::to_string(i + 1) + " + c" + std::to_string(j + 1);
      } else if (!real_pair) {
        real_pair = std::make_pair(i, j);
      }
    }
  if (!r.has_witness && real_pair) {
    const auto [i, j] = *real_pair;
    const Rational ratio = -r.diagonal[j] / r.diagonal[i];
    const double s = std::sqrt(to_double(ratio));
    r.witness.resize(n);
    for (std::size_t k = 0; k < n; ++k) r.witness[k] = s * to_double(c[i][k]) + to_double(c[j][k]);
    r.has_witness = true;
    r.witness_formula = "sqrt(" + to_string(ratio) + ")*c" + std::to_string(i + 1) + " + c" + std::to_string(j + 1) +
                        ", c" + std::to_string(i + 1) + " = " + vector_str(c[i]) + ", c" + std::to_string(j + 1) +
                        " = " + vector_str(c[j]);
  }
  if (r.rational_witness) {
    r.witness.clear();
    for (const auto& x : *r.rational_witness) r.witness.push_back(to_double(x));
  }
  r.definite = !r.has_witness && b > 0;
  r.obstructed = !r.has_witness || !r.b2_clause;
  return r;
}

}  // namespace logsym
