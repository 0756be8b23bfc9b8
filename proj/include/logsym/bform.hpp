#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "logsym/chart.hpp"
#include "logsym/expr.hpp"
#include "logsym/parse.hpp"

namespace logsym {

/// Set of b-coframe slots: bit 0 is λ, bit k (k >= 1) is dx_{k+1}.
using SlotMask = std::uint32_t;

SlotMask mask_of(const std::vector<int>& slots);  // slots are 0-based
std::vector<int> slots_of(SlotMask mask);
int popcount(SlotMask mask);

/// A degree-k b-form over a frame, with coefficients indexed by sorted slot sets.
class BForm {
 public:
  BForm(Frame frame, int degree);

  static BForm scalar(Frame frame, const Expr& value);
  /// The coframe element of slot s (slot 0 is λ).
  static BForm slot(Frame frame, int s);
  /// Ordinary dx_i (1-based); dx1 = h·λ.
  static BForm dx(const Frame& frame, int i);
  /// Single term c·e_{slots} (slots 0-based, any order; sign from sorting).
  static BForm term(Frame frame, const std::vector<int>& slots, const Expr& c);

  const Frame& frame() const { return frame_; }
  int dim() const { return frame_.dim; }
  int degree() const { return degree_; }
  const std::map<SlotMask, Expr>& coefficients() const { return coef_; }
  Expr coefficient(SlotMask mask) const;
  void add(SlotMask mask, const Expr& c);
  bool is_zero() const { return coef_.empty(); }

  BForm operator-() const;
  friend BForm operator+(const BForm& a, const BForm& b);
  friend BForm operator-(const BForm& a, const BForm& b);
  friend BForm operator*(const Expr& c, const BForm& a);
  friend bool operator==(const BForm& a, const BForm& b);

  /// Apply fn to every coefficient.
  template <class Fn>
  BForm map(Fn fn) const {
    BForm out(frame_, degree_);
    for (const auto& [m, c] : coef_) out.add(m, fn(c));
    return out;
  }

  std::vector<Expr> coefficient_list() const;

  /// Coefficients at p in the b-coframe, keyed by mask.
  std::map<SlotMask, double> evaluate(std::span<const double> p) const;
  /// Degree-2 only: antisymmetric matrix W with W(i,j) the coefficient of e_i∧e_j.
  Eigen::MatrixXd matrix(std::span<const double> p) const;
  /// Degree-2 only: coefficient matrix in the ordinary coframe (λ-row divided by h(p)); off Z.
  Eigen::MatrixXd ordinary_matrix(std::span<const double> p) const;

  /// "(c)*e{1,2} + ..." with e1 = λ and e_k = dx_k.
  std::string str() const;

 private:
  Frame frame_;
  int degree_;
  std::map<SlotMask, Expr> coef_;
};

BForm wedge(const BForm& a, const BForm& b);
BForm b_d(const BForm& a);

/// Rewrites an ordinary form (frame h ≡ 1) in the b-coframe of frame: dx1 = h·λ.
BForm to_b_frame(const BForm& ordinary, const Frame& frame);
/// Rewrites a b-form as an ordinary form: λ = dx1/h. λ-slot coefficients become c/h.
BForm to_ordinary(const BForm& a);

/// Parses "c1*e{1,2} + c2*e{3,4}" (each coefficient a product-level expression or parenthesized).
BForm parse_form(std::string_view text, const Frame& frame, int degree, const ParseContext& ctx);

/// Antisymmetric matrix of expressions, strict upper triangle stored row-major.
class BBivector {
 public:
  explicit BBivector(Frame frame);

  const Frame& frame() const { return frame_; }
  int dim() const { return frame_.dim; }
  /// Entry (i,j), 0-based, antisymmetric.
  Expr at(int i, int j) const;
  void set(int i, int j, const Expr& value);

  /// Ordinary bivector: b-frame entries with row/column 0 multiplied by h.
  BBivector anchor() const;
  Eigen::MatrixXd matrix(std::span<const double> p) const;
  std::vector<Expr> upper() const { return upper_; }
  std::string str() const;
  friend bool operator==(const BBivector& a, const BBivector& b) { return a.frame_ == b.frame_ && a.upper_ == b.upper_; }

 private:
  std::size_t index(int i, int j) const;
  Frame frame_;
  std::vector<Expr> upper_;
};

BBivector parse_bivector(const nlohmann::json& entries, const Frame& frame, const ParseContext& ctx);

/// Pfaffian of an antisymmetric expression matrix given by an entry callback on index subsets.
Expr pfaffian(const std::vector<int>& indices, const std::function<Expr(int, int)>& entry);
double pfaffian(const Eigen::MatrixXd& a);

/// Chart-level b-map: target coordinates y_j = components[j-1](x). When the target frame has a
/// singular locus h_Y = y1, component 1 must be supplied factored as h_X·u and u is stored.
struct BMapModel {
  Frame source;
  Frame target;
  std::vector<Expr> components;
  std::optional<Expr> u;
};

/// Pull back a b-form along f. Throws std::invalid_argument on unsupported frame combinations.
BForm pullback(const BMapModel& f, const BForm& a);

}  // namespace logsym
