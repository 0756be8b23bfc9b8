#pragma once

#include <span>
#include <string>
#include <vector>

#include "logsym/expr.hpp"

namespace logsym {

/// Flattened evaluator for a batch of expressions sharing atoms; intended for grid sweeps.
class ExprProgram {
 public:
  ExprProgram() = default;
  explicit ExprProgram(const std::vector<Expr>& outputs);

  std::size_t size() const { return outputs_.size(); }
  /// Writes one value per output. Throws std::domain_error on a vanishing reciprocal.
  void evaluate(std::span<const double> x, std::span<double> out) const;
  std::vector<double> evaluate(std::span<const double> x) const;
  /// Values and first partials in forward mode: grad[j * x.size() + i] = ∂ output_j / ∂x_{i+1}.
  void evaluate_with_gradient(std::span<const double> x, std::vector<double>& values, std::vector<double>& grad) const;

 private:
  struct Term {
    double coef;
    std::vector<std::pair<int, int>> factors;  // (atom slot, exponent)
  };
  using Poly = std::vector<Term>;
  struct AtomOp {
    AtomKind kind;
    int index;
    const Profile* profile;
    int order;
    Poly arg;
  };

  static double run(const Poly& p, const std::vector<double>& slots);
  /// Value of p and its gradient (length d) from slot values and slot gradients.
  static double run_grad(const Poly& p, const std::vector<double>& slots, const std::vector<double>& slot_grad,
                         std::size_t d, double* grad_out, std::vector<double>& scratch);

  std::vector<Atom> order_;
  std::vector<AtomOp> atoms_;
  std::vector<Poly> outputs_;
};

struct ZeroVerdict {
  bool zero = false;
  /// "exact" (canonical form is empty), "sampled" (|value| <= tolerance on every sample)
  /// or "nonzero" (some sample exceeds the tolerance).
  std::string method;
  double max_abs = 0.0;
  std::size_t samples = 0;
  std::size_t skipped = 0;  ///< samples where the expression was undefined
};

/// Exact normal-form test with sampled fallback on the given points.
ZeroVerdict zero_test(const Expr& e, const std::vector<std::vector<double>>& points, double tolerance);

/// Same for a batch: zero only if every expression is.
ZeroVerdict zero_test(const std::vector<Expr>& es, const std::vector<std::vector<double>>& points, double tolerance);

}  // namespace logsym
