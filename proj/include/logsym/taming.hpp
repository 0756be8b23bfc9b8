#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace logsym {

class LinalgError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Antisymmetric bilinear form on R^m.
class SkewForm {
 public:
  /// Throws std::invalid_argument unless m is square and antisymmetric within 1e-12·‖m‖.
  explicit SkewForm(Eigen::MatrixXd m);
  const Eigen::MatrixXd& matrix() const { return m_; }
  int dim() const { return static_cast<int>(m_.rows()); }
  double determinant() const { return m_.determinant(); }
  double operator()(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const { return a.dot(m_ * b); }

 private:
  Eigen::MatrixXd m_;
};

/// Square operator with its complex-structure status cached.
class LinOp {
 public:
  explicit LinOp(Eigen::MatrixXd a);
  const Eigen::MatrixXd& matrix() const { return a_; }
  /// ‖A² + I‖_F <= 1e-12.
  bool is_complex_structure() const { return complex_; }

 private:
  Eigen::MatrixXd a_;
  bool complex_;
};

bool is_complex_structure(const Eigen::MatrixXd& a, double tol = 1e-12);

constexpr double kRealEigenvalueThreshold = 1e-9;

struct EigenvalueReport {
  bool has_real = false;
  double threshold = kRealEigenvalueThreshold;
  /// min over eigenvalues of |Im| / max(1, |Re|)
  double min_relative_imag = 0.0;
  std::vector<std::complex<double>> eigenvalues;
};

/// Eigenvalue λ counts as real when |Im λ| <= 1e-9·max(1, |Re λ|). Throws LinalgError when the
/// eigensolver does not converge.
EigenvalueReport real_eigenvalue_report(const Eigen::MatrixXd& a);
bool has_real_eigenvalue(const Eigen::MatrixXd& a);

struct RetractionInfo {
  int refinement_steps = 0;
  double residual = 0.0;  ///< ‖J² + I‖_F
};

/// J = A (−A²)^{−1/2}, principal square root via real Schur form, then Newton refinement of
/// J² = −I (J ← (J − J⁻¹)/2, a rational function of A, so it preserves equivariance).
/// Throws LinalgError on a real eigenvalue or non-convergence.
Eigen::MatrixXd retract_to_acs(const Eigen::MatrixXd& a, RetractionInfo* info = nullptr);

struct TamingReport {
  bool tame = false;
  double margin = 0.0;  ///< smallest eigenvalue of the descended symmetric form
  int kernel_dim = 0;
  bool kernel_invariant = true;
  std::string reason;
};

/// q(v) = ω(Tv, TJv) on V, descended to V/ker T. T maps V (columns) to W (rows).
TamingReport is_tame(const Eigen::MatrixXd& omega, const Eigen::MatrixXd& t, const Eigen::MatrixXd& j);

struct BlendResult {
  Eigen::MatrixXd j;
  TamingReport report;
  RetractionInfo retraction;
};

/// Convex combination of tame complex structures followed by the retraction.
BlendResult blend_acs(const std::vector<Eigen::MatrixXd>& js, const std::vector<double>& weights,
                      const Eigen::MatrixXd& t, const Eigen::MatrixXd& omega);

struct HypothesisCheck {
  std::string name;
  bool ok = false;
  std::string detail;
};

struct PairLemmaReport {
  /// In order: commutativity, image_V, image_W, quotient_iso, kernel_iso.
  std::vector<HypothesisCheck> hypotheses;
  bool hypotheses_hold = false;
  /// rhoV maps ker bF bijectively onto ker F (meaningful when the hypotheses hold).
  bool conclusion = false;
  int ker_bf_dim = 0;
  int ker_f_dim = 0;
  std::vector<std::string> failed() const;
};

/// Finite-dimensional kernel comparison for a commuting square F∘rhoV = rhoW∘bF.
PairLemmaReport verify_pair_lemma(const Eigen::MatrixXd& f, const Eigen::MatrixXd& bf, const Eigen::MatrixXd& rho_v,
                                  const Eigen::MatrixXd& rho_w, const Eigen::MatrixXd& v1, const Eigen::MatrixXd& w1);

/// Orthonormal basis (columns) of the kernel, numerical rank cut at tol·σ_max.
Eigen::MatrixXd kernel_basis(const Eigen::MatrixXd& a, double tol = 1e-9);
/// Orthonormal basis (columns) of the column space.
Eigen::MatrixXd range_basis(const Eigen::MatrixXd& a, double tol = 1e-9);
int numerical_rank(const Eigen::MatrixXd& a, double tol = 1e-9);

}  // namespace logsym
