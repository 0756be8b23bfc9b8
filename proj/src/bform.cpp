#include "logsym/bform.hpp"

#include <algorithm>
#include <bit>
#include <stdexcept>

namespace logsym {

namespace {

void require_same_frame(const BForm& a, const BForm& b) {
  if (!(a.frame() == b.frame())) throw std::invalid_argument("forms live on different frames");
}

// Sign of e_A ∧ e_B for disjoint masks: (-1)^(pairs i in A, j in B with i > j).
int wedge_sign(SlotMask a, SlotMask b) {
  int inversions = 0;
  for (int j : slots_of(b)) inversions += popcount(a & ~((SlotMask{2} << j) - 1));
  return inversions % 2 == 0 ? 1 : -1;
}

std::string slot_label(SlotMask mask) {
  std::string s = "e{";
  bool first = true;
  for (int k : slots_of(mask)) {
    if (!first) s += ",";
    s += std::to_string(k + 1);
    first = false;
  }
  return s + "}";
}

}  // namespace

SlotMask mask_of(const std::vector<int>& slots) {
  SlotMask m = 0;
  for (int s : slots) m |= SlotMask{1} << s;
  return m;
}

std::vector<int> slots_of(SlotMask mask) {
  std::vector<int> out;
  for (int k = 0; k < 32; ++k)
    if (mask & (SlotMask{1} << k)) out.push_back(k);
  return out;
}

int popcount(SlotMask mask) { return std::popcount(mask); }

BForm::BForm(Frame frame, int degree) : frame_(std::move(frame)), degree_(degree) {
  if (degree < 0 || degree > frame_.dim) throw std::invalid_argument("form degree out of range");
}

BForm BForm::scalar(Frame frame, const Expr& value) {
  BForm f(std::move(frame), 0);
  f.add(0, value);
  return f;
}

BForm BForm::slot(Frame frame, int s) {
  if (s < 0 || s >= frame.dim) throw std::invalid_argument("slot out of range");
  BForm f(std::move(frame), 1);
  f.add(SlotMask{1} << s, Expr(1));
  return f;
}

BForm BForm::dx(const Frame& frame, int i) {
  if (i == 1) return frame.h * slot(frame, 0);
  return slot(frame, i - 1);
}

BForm BForm::term(Frame frame, const std::vector<int>& slots, const Expr& c) {
  std::vector<int> s = slots;
  int sign = 1;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j + 1 < s.size() - i; ++j)
      if (s[j] > s[j + 1]) {
        std::swap(s[j], s[j + 1]);
        sign = -sign;
      }
  for (std::size_t i = 0; i + 1 < s.size(); ++i)
    if (s[i] == s[i + 1]) return BForm(std::move(frame), static_cast<int>(slots.size()));
  for (int k : s)
    if (k < 0 || k >= frame.dim) throw std::invalid_argument("basis index outside the chart");
  BForm f(std::move(frame), static_cast<int>(slots.size()));
  f.add(mask_of(s), sign > 0 ? c : -c);
  return f;
}

Expr BForm::coefficient(SlotMask mask) const {
  auto it = coef_.find(mask);
  return it == coef_.end() ? Expr() : it->second;
}

void BForm::add(SlotMask mask, const Expr& c) {
  if (popcount(mask) != degree_) throw std::invalid_argument("slot set does not match the form degree");
  if (c.is_zero()) return;
  auto it = coef_.find(mask);
  if (it == coef_.end()) {
    coef_.emplace(mask, c);
  } else {
    it->second += c;
    if (it->second.is_zero()) coef_.erase(it);
  }
}

BForm BForm::operator-() const {
  return map([](const Expr& c) { return -c; });
}

BForm operator+(const BForm& a, const BForm& b) {
  require_same_frame(a, b);
  if (a.degree() != b.degree()) throw std::invalid_argument("adding forms of different degree");
  BForm out = a;
  for (const auto& [m, c] : b.coefficients()) out.add(m, c);
  return out;
}

BForm operator-(const BForm& a, const BForm& b) { return a + (-b); }

BForm operator*(const Expr& c, const BForm& a) {
  if (c.is_zero()) return BForm(a.frame(), a.degree());
  return a.map([&](const Expr& x) { return c * x; });
}

bool operator==(const BForm& a, const BForm& b) {
  return a.frame() == b.frame() && a.degree() == b.degree() && a.coefficients() == b.coefficients();
}

std::vector<Expr> BForm::coefficient_list() const {
  std::vector<Expr> out;
  for (const auto& [m, c] : coef_) out.push_back(c);
  return out;
}

std::map<SlotMask, double> BForm::evaluate(std::span<const double> p) const {
  std::map<SlotMask, double> out;
  for (const auto& [m, c] : coef_) out[m] = c.evaluate(p);
  return out;
}

Eigen::MatrixXd BForm::matrix(std::span<const double> p) const {
  if (degree_ != 2) throw std::invalid_argument("matrix() needs a 2-form");
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(dim(), dim());
  for (const auto& [m, c] : coef_) {
    auto s = slots_of(m);
    const double v = c.evaluate(p);
    w(s[0], s[1]) = v;
    w(s[1], s[0]) = -v;
  }
  return w;
}

Eigen::MatrixXd BForm::ordinary_matrix(std::span<const double> p) const {
  Eigen::MatrixXd w = matrix(p);
  const double h = frame_.h.evaluate(p);
  if (h == 0.0) throw std::domain_error("ordinary coefficients are undefined on the singular locus");
  w.row(0) /= h;
  w.col(0) /= h;
  return w;
}

std::string BForm::str() const {
  if (coef_.empty()) return "0";
  std::string out;
  for (const auto& [m, c] : coef_) {
    if (!out.empty()) out += " + ";
    out += "(" + c.str() + ")*" + slot_label(m);
  }
  return out;
}

BForm wedge(const BForm& a, const BForm& b) {
  require_same_frame(a, b);
  if (a.degree() + b.degree() > a.dim()) throw std::invalid_argument("wedge degree exceeds the dimension");
  BForm out(a.frame(), a.degree() + b.degree());
  for (const auto& [ma, ca] : a.coefficients()) {
    for (const auto& [mb, cb] : b.coefficients()) {
      if (ma & mb) continue;
      const Expr prod = ca * cb;
      out.add(ma | mb, wedge_sign(ma, mb) > 0 ? prod : -prod);
    }
  }
  return out;
}

BForm b_d(const BForm& a) {
  if (a.degree() >= a.dim()) throw std::invalid_argument("exterior derivative of a top-degree form");
  BForm out(a.frame(), a.degree() + 1);
  for (const auto& [m, c] : a.coefficients()) {
    for (int j = 1; j <= a.dim(); ++j) {
      const int s = j - 1;
      if (m & (SlotMask{1} << s)) continue;
      Expr dc = c.diff(j);
      if (dc.is_zero()) continue;
      if (j == 1) dc = dc * a.frame().h;
      // dx_j ∧ e_I: move slot s past the elements of I below it.
      const int below = popcount(m & ((SlotMask{1} << s) - 1));
      out.add(m | (SlotMask{1} << s), below % 2 == 0 ? dc : -dc);
    }
  }
  return out;
}

BForm to_b_frame(const BForm& ordinary, const Frame& frame) {
  if (!ordinary.frame().is_ordinary()) throw std::invalid_argument("to_b_frame expects an ordinary form");
  if (ordinary.dim() != frame.dim) throw std::invalid_argument("dimension mismatch");
  BForm out(frame, ordinary.degree());
  for (const auto& [m, c] : ordinary.coefficients()) out.add(m, (m & 1u) ? c * frame.h : c);
  return out;
}

BForm to_ordinary(const BForm& a) {
  Frame ord = Frame::ordinary(a.dim());
  BForm out(ord, a.degree());
  const Expr inv_h = a.frame().h.inverse();
  for (const auto& [m, c] : a.coefficients()) out.add(m, (m & 1u) ? c * inv_h : c);
  return out;
}

BForm parse_form(std::string_view text, const Frame& frame, int degree, const ParseContext& ctx) {
  BForm out(frame, degree);
  for (const auto& t : parse_basis_sum(text, ctx)) {
    if (static_cast<int>(t.indices.size()) != degree)
      throw ParseError("basis element has " + std::to_string(t.indices.size()) + " indices, expected " +
                           std::to_string(degree),
                       1, 1);
    std::vector<int> slots;
    for (int i : t.indices) {
      if (i < 1 || i > frame.dim) throw ParseError("basis index " + std::to_string(i) + " outside the chart", 1, 1);
      slots.push_back(i - 1);
    }
    out = out + BForm::term(frame, slots, t.coefficient);
  }
  return out;
}

BBivector::BBivector(Frame frame) : frame_(std::move(frame)) {
  const auto n = static_cast<std::size_t>(frame_.dim);
  upper_.assign(n * (n - 1) / 2, Expr());
}

std::size_t BBivector::index(int i, int j) const {
  // row-major strict upper triangle, i < j
  const int n = frame_.dim;
  return static_cast<std::size_t>(i * n - i * (i + 1) / 2 + (j - i - 1));
}

Expr BBivector::at(int i, int j) const {
  if (i == j) return Expr();
  if (i > j) return -upper_[index(j, i)];
  return upper_[index(i, j)];
}

void BBivector::set(int i, int j, const Expr& value) {
  if (i == j) throw std::invalid_argument("diagonal of a bivector is zero");
  if (i > j) {
    upper_[index(j, i)] = -value;
  } else {
    upper_[index(i, j)] = value;
  }
}

BBivector BBivector::anchor() const {
  BBivector out(Frame::ordinary(dim()));
  for (int i = 0; i < dim(); ++i)
    for (int j = i + 1; j < dim(); ++j) out.set(i, j, i == 0 ? frame_.h * at(i, j) : at(i, j));
  return out;
}

Eigen::MatrixXd BBivector::matrix(std::span<const double> p) const {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dim(), dim());
  for (int i = 0; i < dim(); ++i)
    for (int j = i + 1; j < dim(); ++j) {
      const double v = at(i, j).evaluate(p);
      m(i, j) = v;
      m(j, i) = -v;
    }
  return m;
}

std::string BBivector::str() const {
  std::string out;
  for (int i = 0; i < dim(); ++i)
    for (int j = i + 1; j < dim(); ++j) {
      Expr v = at(i, j);
      if (v.is_zero()) continue;
      if (!out.empty()) out += " + ";
      out += "(" + v.str() + ")*e{" + std::to_string(i + 1) + "," + std::to_string(j + 1) + "}";
    }
  return out.empty() ? "0" : out;
}

BBivector parse_bivector(const nlohmann::json& entries, const Frame& frame, const ParseContext& ctx) {
  if (!entries.is_string()) throw std::invalid_argument("bivector must be a string of basis terms");
  BBivector out(frame);
  for (const auto& t : parse_basis_sum(entries.get<std::string>(), ctx)) {
    if (t.indices.size() != 2) throw ParseError("bivector terms need two indices", 1, 1);
    const int i = t.indices[0] - 1, j = t.indices[1] - 1;
    if (i < 0 || j < 0 || i >= frame.dim || j >= frame.dim) throw ParseError("bivector index outside the chart", 1, 1);
    if (i == j) continue;
    out.set(i, j, out.at(i, j) + t.coefficient);
  }
  return out;
}

Expr pfaffian(const std::vector<int>& indices, const std::function<Expr(int, int)>& entry) {
  if (indices.empty()) return Expr(1);
  if (indices.size() % 2 != 0) return Expr();
  Expr total;
  const int first = indices[0];
  for (std::size_t k = 1; k < indices.size(); ++k) {
    Expr a = entry(first, indices[k]);
    if (a.is_zero()) continue;
    std::vector<int> rest;
    for (std::size_t m = 1; m < indices.size(); ++m)
      if (m != k) rest.push_back(indices[m]);
    Expr minor = pfaffian(rest, entry);
    total += (k % 2 == 1) ? a * minor : -(a * minor);
  }
  return total;
}

double pfaffian(const Eigen::MatrixXd& a) {
  // Parlett-Reid tridiagonalization with pivoting.
  const Eigen::Index n = a.rows();
  if (n % 2 != 0) return 0.0;
  Eigen::MatrixXd m = a;
  double result = 1.0;
  for (Eigen::Index k = 0; k + 1 < n; k += 2) {
    Eigen::Index piv;
    m.col(k).tail(n - k - 1).cwiseAbs().maxCoeff(&piv);
    piv += k + 1;
    if (piv != k + 1) {
      m.row(k + 1).swap(m.row(piv));
      m.col(k + 1).swap(m.col(piv));
      result = -result;
    }
    if (m(k + 1, k) == 0.0) return 0.0;
    result *= m(k, k + 1);
    if (k + 2 < n) {
      Eigen::VectorXd tau = m.row(k).tail(n - k - 2).transpose() / m(k, k + 1);
      Eigen::VectorXd c = m.col(k + 1).tail(n - k - 2);
      m.bottomRightCorner(n - k - 2, n - k - 2) += tau * c.transpose() - c * tau.transpose();
    }
  }
  return result;
}

BForm pullback(const BMapModel& f, const BForm& a) {
  const Frame& src = f.source;
  const Frame& tgt = f.target;
  if (!(a.frame() == tgt)) throw std::invalid_argument("form does not live on the map's target frame");
  if (static_cast<int>(f.components.size()) != tgt.dim)
    throw std::invalid_argument("map needs one component per target coordinate");
  std::vector<Expr> values = f.components;
  std::vector<BForm> one_forms;
  for (int j = 1; j <= tgt.dim; ++j) one_forms.push_back(b_d(BForm::scalar(src, values[static_cast<std::size_t>(j - 1)])));
  if (!tgt.is_ordinary()) {
    if (tgt.h == Expr::coord(1)) {
      if (!f.u) throw std::invalid_argument("map into a b-chart needs the factor u with y1 = h·u");
      if (!(values[0] == src.h * *f.u)) throw std::invalid_argument("first component must equal h·u");
      // f*λ_Y = d log(h_X u) = h_X' λ_X + du/u
      BForm lam = src.h.diff(1) * BForm::slot(src, 0);
      BForm du = b_d(BForm::scalar(src, *f.u));
      if (!du.is_zero()) lam = lam + f.u->inverse() * du;
      one_forms[0] = lam;
    } else if (tgt.h == src.h && values[0] == Expr::coord(1)) {
      one_forms[0] = BForm::slot(src, 0);
    } else {
      throw std::invalid_argument("unsupported pullback: target defining function must be y1, or equal to the source's with y1 = x1");
    }
  }
  BForm out(src, a.degree());
  for (const auto& [m, c] : a.coefficients()) {
    BForm term = BForm::scalar(src, c.substitute(values));
    for (int s : slots_of(m)) term = wedge(term, one_forms[static_cast<std::size_t>(s)]);
    out = out + term;
  }
  return out;
}

}  // namespace logsym
