#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "logsym/rational.hpp"

namespace logsym {

class TopologyError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Closed triangulated surface; each triangle's vertex order fixes a local orientation.
struct TriangulatedSurface {
  int vertex_count = 0;
  std::vector<std::array<int, 3>> triangles;

  /// m×n grid torus (m, n ≥ 3).
  static TriangulatedSurface torus(int m, int n);
  /// m×n grid Klein bottle: the i-direction wraps with j ↦ −j (m, n ≥ 3).
  static TriangulatedSurface klein_bottle(int m, int n);
  /// Six-vertex real projective plane.
  static TriangulatedSurface projective_plane();
  /// Boundary of the octahedron: north pole 0, equator 1..4, south pole 5.
  static TriangulatedSurface octahedron();
  /// Grid torus index of vertex (i, j).
  static int grid_vertex(int m, int n, int i, int j);
};

/// GF(2) one-chain given by its edges (vertex pairs).
struct Z2Cycle {
  std::vector<std::array<int, 2>> edges;
};

struct SurfaceReport {
  bool admissible = false;
  bool orientable = false;
  int euler_characteristic = 0;
  int components = 0;
  int h1_rank = 0;          ///< dimension of H1(Σ; GF(2))
  int loops_checked = 0;    ///< fundamental cycles of the dual graph
  std::optional<int> violating_loop;
  int violating_w1 = 0;           ///< w1 on the violating loop
  int violating_intersection = 0;  ///< intersection with Z on the violating loop
  nlohmann::json to_json() const;
};

/// Decides w1(Σ) = PD[Z] over GF(2) by comparing, on every fundamental cycle of the dual graph,
/// the orientation-reversal count with the number of crossings of Z. Throws TopologyError when the
/// surface is not closed or Z is not a cycle.
SurfaceReport surface_log_admissibility(const TriangulatedSurface& surface, const Z2Cycle& z);

/// Barycentric subdivision: original vertices, then one vertex per edge (sorted edge order), then
/// one per triangle; orientations are inherited.
TriangulatedSurface barycentric_subdivision(const TriangulatedSurface& surface);
/// The cycle on the subdivided surface (each edge split at its midpoint vertex).
Z2Cycle subdivide_cycle(const TriangulatedSurface& surface, const Z2Cycle& z);

/// Integer symmetric cup-product matrix on H² and optional half-dimension n.
struct CohomologyRing {
  std::vector<std::vector<long>> q;
  std::optional<int> n;
  int b2() const { return static_cast<int>(q.size()); }
  /// Throws TopologyError when Q is not square and symmetric.
  void validate() const;
  Rational form(const std::vector<Rational>& a, const std::vector<Rational>& b) const;
};

struct ObstructionAReport {
  int n = 2;
  std::optional<std::vector<long>> witness;
  bool exact = true;        ///< false for the bounded search
  int box = 0;              ///< search half-width (n = 3)
  std::size_t searched = 0;
  std::string statement;
  nlohmann::json to_json() const;
};

/// Class a with a^{n−1} ≠ 0: exact for n = 2 (any nonzero class, iff b2 > 0); for n = 3 a bounded
/// integer search for Q(a, a) ≠ 0. Throws TopologyError for n outside {2, 3}.
ObstructionAReport obstruction_a(const CohomologyRing& ring, int n, int box = 10);

struct ObstructionBReport {
  /// Isotropic witness b ≠ 0 with Q(b, b) = 0; rational when one exists among the candidates,
  /// otherwise real (numeric coordinates, exact description in witness_formula).
  bool has_witness = false;
  std::optional<std::vector<Rational>> rational_witness;
  std::vector<double> witness;
  std::string witness_formula;
  /// Definiteness proof: C^T Q C = diag(d) with all d of one sign.
  bool definite = false;
  std::vector<Rational> diagonal;
  std::vector<std::vector<Rational>> congruence;  ///< C, columns are the new basis
  bool b2_clause = true;  ///< b2 ≥ 2 when n > 1
  bool obstructed = false;  ///< no witness, or the b2 clause fails
  nlohmann::json to_json() const;
};

/// Exact congruence diagonalization over Q; witness iff Q is indefinite or singular.
ObstructionBReport obstruction_b(const CohomologyRing& ring);

}  // namespace logsym
