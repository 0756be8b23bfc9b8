#include "logsym/taming.hpp"

#include <algorithm>
#include <cmath>
#include <unsupported/Eigen/MatrixFunctions>

namespace logsym {

namespace {

using Eigen::MatrixXd;

Eigen::JacobiSVD<MatrixXd> svd_full(const MatrixXd& a) { return Eigen::JacobiSVD<MatrixXd>(a, Eigen::ComputeFullU | Eigen::ComputeFullV); }

int rank_from(const Eigen::VectorXd& s, double tol) {
  if (s.size() == 0) return 0;
  const double cut = tol * std::max(s(0), 0.0);
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > cut && s(i) > 0.0) ++r;
  return r;
}

// Orthonormal basis of the orthogonal complement of span(cols) in R^n.
MatrixXd complement_basis(const MatrixXd& cols, Eigen::Index n, double tol = 1e-9) {
  if (cols.cols() == 0) return MatrixXd::Identity(n, n);
  return kernel_basis(cols.transpose(), tol);
}

// Invertibility with the rank cut taken relative to the parent map's norm, so a map that is numerically zero
// is not rescued by a relative cut against its own (tiny) largest singular value.
bool square_invertible(const MatrixXd& m, double tol, double reference, std::string& detail) {
  if (m.rows() != m.cols()) {
    detail = "not square (" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ")";
    return false;
  }
  if (m.rows() == 0) return true;
  Eigen::JacobiSVD<MatrixXd> svd(m);
  const double cut = tol * std::max({1.0, reference, svd.singularValues()(0)});
  int r = 0;
  for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()(i) > cut) ++r;
  if (r != m.rows()) {
    detail = "rank " + std::to_string(r) + " < " + std::to_string(m.rows());
    return false;
  }
  return true;
}

}  // namespace

SkewForm::SkewForm(MatrixXd m) : m_(std::move(m)) {
  if (m_.rows() != m_.cols()) throw std::invalid_argument("skew form must be square");
  if ((m_ + m_.transpose()).norm() > 1e-12 * std::max(1.0, m_.norm()))
    throw std::invalid_argument("skew form is not antisymmetric");
}

LinOp::LinOp(MatrixXd a) : a_(std::move(a)) {
  if (a_.rows() != a_.cols()) throw std::invalid_argument("operator must be square");
  complex_ = logsym::is_complex_structure(a_);
}

bool is_complex_structure(const MatrixXd& a, double tol) {
  if (a.rows() != a.cols()) return false;
  return (a * a + MatrixXd::Identity(a.rows(), a.cols())).norm() <= tol;
}

EigenvalueReport real_eigenvalue_report(const MatrixXd& a) {
  if (a.rows() != a.cols()) throw std::invalid_argument("operator must be square");
  EigenvalueReport r;
  Eigen::EigenSolver<MatrixXd> es(a, false);
  if (es.info() != Eigen::Success) throw LinalgError("eigenvalue solver did not converge");
  r.min_relative_imag = HUGE_VAL;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    const std::complex<double> z = es.eigenvalues()(i);
    r.eigenvalues.push_back(z);
    const double rel = std::fabs(z.imag()) / std::max(1.0, std::fabs(z.real()));
    r.min_relative_imag = std::min(r.min_relative_imag, rel);
    if (std::fabs(z.imag()) <= r.threshold * std::max(1.0, std::fabs(z.real()))) r.has_real = true;
  }
  return r;
}

bool has_real_eigenvalue(const MatrixXd& a) { return real_eigenvalue_report(a).has_real; }

MatrixXd retract_to_acs(const MatrixXd& a, RetractionInfo* info) {
  if (a.rows() != a.cols()) throw std::invalid_argument("operator must be square");
  const Eigen::Index n = a.rows();
  if (n % 2 != 0) throw LinalgError("odd-dimensional operators always have a real eigenvalue");
  if (has_real_eigenvalue(a)) throw LinalgError("operator has a real eigenvalue");
  const MatrixXd neg_sq = -(a * a);
  Eigen::RealSchur<MatrixXd> schur(neg_sq);
  if (schur.info() != Eigen::Success) throw LinalgError("Schur decomposition did not converge");
  MatrixXd root_t = MatrixXd::Zero(n, n);
  Eigen::matrix_sqrt_quasi_triangular(schur.matrixT(), root_t);
  const MatrixXd root = schur.matrixU() * root_t * schur.matrixU().transpose();
  Eigen::PartialPivLU<MatrixXd> lu(root);
  MatrixXd j = a * lu.inverse();
  const MatrixXd id = MatrixXd::Identity(n, n);
  const double scale = std::max(1.0, j.norm());
  int steps = 0;
  double residual = (j * j + id).norm();
  while (residual > 1e-15 * scale * scale && steps < 50) {
    Eigen::PartialPivLU<MatrixXd> jlu(j);
    MatrixXd next = 0.5 * (j - jlu.inverse());
    const double next_residual = (next * next + id).norm();
    ++steps;
    if (!(next_residual < residual)) break;
    j = next;
    residual = next_residual;
  }
  if (!(residual <= 1e-11 * scale * scale)) throw LinalgError("square-root refinement did not converge");
  if (info != nullptr) {
    info->refinement_steps = steps;
    info->residual = residual;
  }
  return j;
}

TamingReport is_tame(const MatrixXd& omega, const MatrixXd& t, const MatrixXd& j) {
  if (omega.rows() != omega.cols() || t.rows() != omega.rows() || j.rows() != j.cols() || t.cols() != j.rows())
    throw std::invalid_argument("is_tame: incompatible dimensions");
  TamingReport r;
  const MatrixXd m = t.transpose() * omega * t * j;
  const MatrixXd sym = 0.5 * (m + m.transpose());
  const MatrixXd k = kernel_basis(t);
  r.kernel_dim = static_cast<int>(k.cols());
  if (k.cols() > 0) {
    const double leak = (t * j * k).norm();
    if (leak > 1e-9 * std::max(1.0, t.norm() * j.norm())) {
      r.kernel_invariant = false;
      r.tame = false;
      r.margin = 0.0;
      r.reason = "not tame, kernel not J-complex";
      return r;
    }
  }
  const MatrixXd q = complement_basis(k, j.rows());
  if (q.cols() == 0) {
    r.tame = false;
    r.reason = "T is zero";
    return r;
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(q.transpose() * sym * q, Eigen::EigenvaluesOnly);
  r.margin = es.eigenvalues()(0);
  r.tame = r.margin > 0.0;
  if (!r.tame) r.reason = "descended form is not positive definite";
  return r;
}

BlendResult blend_acs(const std::vector<MatrixXd>& js, const std::vector<double>& weights, const MatrixXd& t,
                      const MatrixXd& omega) {
  if (js.empty() || js.size() != weights.size()) throw std::invalid_argument("blend_acs needs one weight per structure");
  double sum = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw std::invalid_argument("blend weights must be nonnegative");
    sum += w;
  }
  if (std::fabs(sum - 1.0) > 1e-12) throw std::invalid_argument("blend weights must sum to 1");
  MatrixXd a = MatrixXd::Zero(js[0].rows(), js[0].cols());
  for (std::size_t i = 0; i < js.size(); ++i) {
    if (!is_complex_structure(js[i], 1e-10)) throw std::invalid_argument("blend input is not a complex structure");
    a += weights[i] * js[i];
  }
  if (has_real_eigenvalue(a)) throw LinalgError("blended operator has a real eigenvalue");
  BlendResult out;
  out.j = retract_to_acs(a, &out.retraction);
  out.report = is_tame(omega, t, out.j);
  return out;
}

std::vector<std::string> PairLemmaReport::failed() const {
  std::vector<std::string> out;
  for (const auto& h : hypotheses)
    if (!h.ok) out.push_back(h.name);
  return out;
}

PairLemmaReport verify_pair_lemma(const MatrixXd& f, const MatrixXd& bf, const MatrixXd& rho_v, const MatrixXd& rho_w,
                                  const MatrixXd& v1, const MatrixXd& w1) {
  // f: V→W, bf: bV→bW, rho_v: bV→V, rho_w: bW→W; v1, w1 spanning columns.
  if (f.cols() != rho_v.rows() || f.rows() != rho_w.rows() || bf.cols() != rho_v.cols() || bf.rows() != rho_w.cols() ||
      v1.rows() != f.cols() || w1.rows() != f.rows())
    throw std::invalid_argument("verify_pair_lemma: incompatible dimensions");
  constexpr double tol = 1e-9;
  PairLemmaReport r;

  {
    HypothesisCheck h{"commutativity", false, ""};
    const double err = (f * rho_v - rho_w * bf).norm();
    const double scale = std::max(1.0, f.norm() * rho_v.norm() + rho_w.norm() * bf.norm());
    h.ok = err <= 1e-10 * scale;
    h.detail = "||F rhoV - rhoW bF|| = " + std::to_string(err);
    r.hypotheses.push_back(h);
  }
  auto image_check = [&](const char* name, const MatrixXd& rho, const MatrixXd& target) {
    HypothesisCheck h{name, false, ""};
    const int a = numerical_rank(rho, tol);
    const int b = numerical_rank(target, tol);
    MatrixXd both(rho.rows(), rho.cols() + target.cols());
    both << rho, target;
    const int c = numerical_rank(both, tol);
    h.ok = a == b && b == c;
    h.detail = "rank(rho) = " + std::to_string(a) + ", rank(subspace) = " + std::to_string(b) +
               ", rank(joint) = " + std::to_string(c);
    r.hypotheses.push_back(h);
  };
  image_check("image_V", rho_v, v1);
  image_check("image_W", rho_w, w1);
  {
    HypothesisCheck h{"quotient_iso", false, ""};
    const MatrixXd cv = complement_basis(range_basis(rho_v, tol), f.cols());
    const MatrixXd cw = complement_basis(range_basis(rho_w, tol), f.rows());
    std::string detail;
    h.ok = square_invertible(cw.transpose() * f * cv, tol, f.norm(), detail);
    h.detail = h.ok ? "induced map V/im rhoV -> W/im rhoW is invertible" : "induced quotient map " + detail;
    r.hypotheses.push_back(h);
  }
  {
    HypothesisCheck h{"kernel_iso", false, ""};
    const MatrixXd kv = kernel_basis(rho_v, tol);
    const MatrixXd kw = kernel_basis(rho_w, tol);
    std::string detail;
    h.ok = square_invertible(kw.transpose() * bf * kv, tol, bf.norm(), detail);
    h.detail = h.ok ? "bF: ker rhoV -> ker rhoW is invertible" : "bF on ker rhoV " + detail;
    r.hypotheses.push_back(h);
  }
  r.hypotheses_hold = std::all_of(r.hypotheses.begin(), r.hypotheses.end(), [](const auto& h) { return h.ok; });

  const MatrixXd kbf = kernel_basis(bf, tol);
  const MatrixXd kf = kernel_basis(f, tol);
  r.ker_bf_dim = static_cast<int>(kbf.cols());
  r.ker_f_dim = static_cast<int>(kf.cols());
  if (kbf.cols() == 0) {
    r.conclusion = kf.cols() == 0;
  } else {
    const MatrixXd img = rho_v * kbf;
    const int rank_img = numerical_rank(img, tol);
    MatrixXd both(img.rows(), img.cols() + kf.cols());
    both << img, kf;
    r.conclusion = rank_img == kbf.cols() && kf.cols() == kbf.cols() && numerical_rank(both, tol) == rank_img;
  }
  return r;
}

MatrixXd kernel_basis(const MatrixXd& a, double tol) {
  if (a.cols() == 0) return MatrixXd(0, 0);
  if (a.rows() == 0) return MatrixXd::Identity(a.cols(), a.cols());
  auto svd = svd_full(a);
  const int r = rank_from(svd.singularValues(), tol);
  return svd.matrixV().rightCols(a.cols() - r);
}

MatrixXd range_basis(const MatrixXd& a, double tol) {
  if (a.rows() == 0 || a.cols() == 0) return MatrixXd(a.rows(), 0);
  auto svd = svd_full(a);
  const int r = rank_from(svd.singularValues(), tol);
  return svd.matrixU().leftCols(r);
}

int numerical_rank(const MatrixXd& a, double tol) {
  if (a.rows() == 0 || a.cols() == 0) return 0;
  Eigen::JacobiSVD<MatrixXd> svd(a);
  return rank_from(svd.singularValues(), tol);
}

}  // namespace logsym
