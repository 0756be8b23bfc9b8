#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "logsym/bform.hpp"
#include "logsym/bgeometry.hpp"
#include "logsym/certificate.hpp"
#include "logsym/chart.hpp"
#include "logsym/profile.hpp"

namespace logsym {

/// A construction that cannot proceed, with the offending point and tangent direction when known.
class ConstructionError : public GeometryError {
 public:
  ConstructionError(const std::string& message, std::vector<double> point = {}, std::vector<double> direction = {})
      : GeometryError(message, std::move(point)), direction_(std::move(direction)) {}
  const std::vector<double>& direction() const { return direction_; }

 private:
  std::vector<double> direction_;
};

/// Almost complex structure on the b-tangent bundle, as a matrix in the b-frame at each point.
using AcsField = std::function<Eigen::MatrixXd(std::span<const double>)>;

AcsField constant_acs(Eigen::MatrixXd j);
/// Field from a square matrix of expressions in the chart coordinates.
AcsField acs_from_exprs(const std::vector<std::vector<Expr>>& entries);

/// Numeric sampler for the coefficient matrix of a degree-2 b-form.
class FormSampler {
 public:
  explicit FormSampler(const BForm& omega);
  Eigen::MatrixXd operator()(std::span<const double> p) const;

 private:
  int dim_;
  std::vector<std::pair<int, int>> slots_;
  ExprProgram program_;
};

struct TamingSearch {
  double t = 0.0;
  Certificate certificate;
};

/// Largest t (halved) for which fstar_omega + t·eta tames J on the sampled unit-sphere bundle of
/// the chart (Euclidean metric in the b-frame). q(t) = a + t·e is affine in t for each sampled
/// direction, so the sampled-safe set is an interval (0, t*) with t* = min a/(−e) over e < 0; the
/// result is min(t_max, t*/2), halved further until the pointwise minimal eigenvalue of the
/// symmetrized form is positive at every grid point.
/// Throws ConstructionError when fstar_omega(v, Jv) < 0 or when both terms are nonpositive.
TamingSearch find_taming_t(const BForm& fstar_omega, const BForm& eta, const AcsField& j, const Chart& chart,
                           const Tolerances& tol = {}, double t_max = 1.0);

/// One element of a cover of the base: weight φ (base coordinates), fiber form η (closed ordinary
/// two-form on the total space) and primitive α with η − ξ = dα.
struct CoverDatum {
  std::string name;
  std::vector<Interval> box;  ///< where φ may be nonzero (base coordinates); empty means everywhere
  Expr weight;
  BForm eta;
  BForm alpha;
};

struct ThurstonInput {
  BMapModel f;
  Chart total;
  Chart base;
  BForm omega_base;       ///< b-symplectic form on the base chart
  BForm reference;        ///< ξ, ordinary closed two-form on the total space
  std::vector<CoverDatum> cover;
  AcsField j;
  double t_max = 1.0;
};

struct ThurstonResult {
  BForm omega;  ///< f*ω_Y + t·η in the total chart's b-frame
  BForm eta;    ///< ξ + d(Σ (φᵢ∘f) αᵢ), ordinary
  Rational t;
  Certificate certificate;
};

/// Assembles f*ω_Y + t·η with η = ξ + d(Σ (φᵢ∘f) αᵢ) and t from find_taming_t.
/// Throws ConstructionError when J is not (ω_Y, f)-tame or some ηᵢ does not tame J on ker b df.
ThurstonResult thurston_assemble(const ThurstonInput& input, const Tolerances& tol = {});

/// Complex structure of C^n in real coordinates (Re z1, Im z1, Re z2, ...).
Eigen::MatrixXd complex_structure_matrix(int dim);

/// Primitive of a closed form with polynomial coefficients from the radial homotopy operator.
/// Throws std::invalid_argument on non-polynomial coefficients.
BForm homotopy_primitive(const BForm& closed);

struct LefschetzModel {
  double r0 = 0.25;
  double r1 = 0.75;
  std::optional<BForm> fiber_form;       ///< σ_y pulled back to the ball; default σ
  std::optional<BForm> fiber_primitive;  ///< β with dβ = σ_y; default from homotopy_primitive
  std::optional<BForm> primitive;        ///< α with dα = σ; default ½Σ(x dy − y dx)
  std::size_t fiber_samples = 512;
};

struct LefschetzResult {
  BForm eta;
  BForm sigma;
  ProfilePtr bump;
  Certificate certificate;
};

/// Critical-ball model f = z1² + z2² on C²: η = d(φβ + (1−φ)α) with φ the radial bump, so η = σ
/// for r ≤ r0 and η = σ_y for r ≥ r1.
LefschetzResult lefschetz_local_eta(const LefschetzModel& model, const Tolerances& tol = {});

/// Half of max |h| along x1, capped at 1.
double default_collar_width(const Chart& chart);

struct FoldOptions {
  std::optional<double> collar_width;  ///< in units of |h|; default default_collar_width
  ProfilePtr profile;                  ///< log_fold_interp; created when absent
};

struct FoldResult {
  BForm omega;  ///< ordinary closed two-form
  double collar_width = 0.0;
  double scale = 0.0;  ///< c = (e² + 1) / collar_width
  ProfilePtr profile;
  Certificate certificate;
};

/// Folded form c·F'(c·h) dx1∧θ + σ from a b-symplectic form λ∧θ + σ in collar normal form (no
/// coefficient depends on x1). Equals the anchor-inverse of the input where |c·h| ≥ e².
FoldResult log_to_folded(const BForm& omega_b, const Chart& chart, const Tolerances& tol = {},
                         const FoldOptions& options = {});

struct UnfoldOptions {
  std::optional<double> collar_width;
  double r0 = 0.25;  ///< cutoff starts at r0·collar_width
  double r1 = 0.75;  ///< cutoff vanishes beyond r1·collar_width
  double t_start = 1.0;
  int max_halvings = 40;
};

struct UnfoldResult {
  BForm omega;  ///< b-form on the chart's frame
  Rational t;
  ProfilePtr weight;
  Certificate certificate;
  TransversalityReport log_check;
};

/// b-form t·B(h) λ∧θ + ω from a folded form ω and a closed one-form θ on Z, with B the
/// derivative-of-cutoff-times-log weight. Throws GeometryError when θ∧ω^{n−1}|_Z vanishes or the
/// input is not folded, ConstructionError when no t is found.
UnfoldResult folded_to_log(const BForm& omega, const BForm& theta, const Chart& chart, const Tolerances& tol = {},
                           const UnfoldOptions& options = {});

}  // namespace logsym
