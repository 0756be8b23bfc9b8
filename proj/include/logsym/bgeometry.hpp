#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "logsym/bform.hpp"
#include "logsym/certificate.hpp"
#include "logsym/chart.hpp"
#include "logsym/program.hpp"

namespace logsym {

/// Failure of a geometric precondition, with the offending grid point when there is one.
class GeometryError : public std::runtime_error {
 public:
  explicit GeometryError(const std::string& message, std::vector<double> point = {})
      : std::runtime_error(message), point_(std::move(point)) {}
  const std::vector<double>& point() const { return point_; }

 private:
  std::vector<double> point_;
};

/// Symbolic Pfaffian of a degree-2 b-form's coefficient matrix.
Expr form_pfaffian(const BForm& omega);
/// Symbolic Pfaffian of a bivector's matrix.
Expr bivector_pfaffian(const BBivector& pi);

/// b-bivector P = −W⁻¹ dual to the b-two-form with coefficient matrix W (dimension at most 6).
/// Throws GeometryError when the Pfaffian drops below tol.nondegeneracy at a grid point.
BBivector dual_bivector(const BForm& omega, const Chart& chart, const Tolerances& tol = {});
/// Inverse of dual_bivector.
BForm invert_bivector(const BBivector& pi, const Chart& chart, const Tolerances& tol = {});

struct TransversalityReport {
  bool pass = false;
  Expr h;  ///< Pfaffian of the ordinary bivector (when computed symbolically)
  bool symbolic_h = true;
  double max_abs_h = 0.0;     ///< over the singular-locus grid
  double min_abs_dh = 0.0;    ///< min |∂₁h| over the singular-locus grid
  bool exact_on_z = false;    ///< h restricted to every exactly located component is the zero expression
  bool poisson = true;
  std::string poisson_method;  ///< "exact", "sampled", "nonzero", or "trivial" in dimension 2
  std::vector<double> extra_zeros;  ///< zeros of h along x1 (at the chart centre) off the chart's Z
  std::size_t z_points = 0;
  std::string reason;
  nlohmann::json to_json(const Chart& chart, const Tolerances& tol) const;
};

/// Checks that an ordinary bivector (frame h ≡ 1) is Poisson and that its top power vanishes
/// transversally on the chart's singular locus.
TransversalityReport log_symplectic_check(const BBivector& pi, const Chart& chart, const Tolerances& tol = {});

/// Singular-locus check for an arbitrary function h: |h| ≤ tol.zero and |∂₁h| ≥ tol.derivative on
/// the Z grid of the chart.
TransversalityReport transversality(const Expr& h, const Chart& chart, const Tolerances& tol);

struct CosymplecticData {
  double z = 0.0;                ///< x1 location of the component
  std::optional<Rational> exact;  ///< exact location when known
  BForm theta;                   ///< closed 1-form without λ slot, coefficients independent of x1
  BForm sigma;                   ///< closed 2-form without λ slot
  double margin = 0.0;           ///< min |θ∧σ^{n−1}| over the component grid
};

/// ω = λ∧θ + σ restricted to each singular-locus component. Throws GeometryError when θ or σ is
/// not closed or θ∧σ^{n−1} falls below tol.margin.
std::vector<CosymplecticData> cosymplectic_extract(const BForm& omega, const Chart& chart, const Tolerances& tol = {});

/// Expression with x1 replaced by a constant.
Expr restrict_x1(const Expr& e, const Rational& value, int dim);

/// Checks the b-map factorisation and that u stays away from zero on the source grid.
Certificate validate_bmap(const BMapModel& f, const Chart& source, const Tolerances& tol = {});

struct SplittingReport {
  bool split = false;
  std::size_t points = 0;
  int min_rank = 0;
  double min_singular_value = 0.0;  ///< smallest singular value of [ker b df | im b ds] over the samples
  std::string section_method;      ///< how f∘s = id was confirmed
};

/// Checks ker b df ⊕ im b ds = bTX along the section. Throws GeometryError when f∘s ≠ id.
SplittingReport section_splitting_check(const BMapModel& f, const BMapModel& s, const Chart& base,
                                        const Tolerances& tol = {});

/// Entries of the b-differential, row-major (target slot, source slot), for compiled evaluation.
std::vector<Expr> b_differential_entries(const BMapModel& f);
/// Matrix of the b-differential of f at p (rows: target b-coframe slots, columns: source slots).
Eigen::MatrixXd b_differential(const BMapModel& f, std::span<const double> p);

}  // namespace logsym
