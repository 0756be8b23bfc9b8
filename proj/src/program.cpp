#include "logsym/program.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <unordered_map>

namespace logsym {

ExprProgram::ExprProgram(const std::vector<Expr>& outputs) {
  std::unordered_map<Atom, int> slot;
  std::function<void(const Expr&)> visit = [&](const Expr& e) {
    for (const auto& [m, c] : e.terms()) {
      for (const auto& [a, k] : m) {
        if (slot.count(a)) continue;
        if (a->kind != AtomKind::Coord && a->kind != AtomKind::Pi) visit(a->arg);
        slot.emplace(a, static_cast<int>(order_.size()));
        order_.push_back(a);
      }
    }
  };
  for (const Expr& e : outputs) visit(e);
  auto compile_with = [&](const Expr& e) {
    Poly p;
    for (const auto& [m, c] : e.terms()) {
      Term t{c.get_d(), {}};
      for (const auto& [a, k] : m) t.factors.emplace_back(slot.at(a), k);
      p.push_back(std::move(t));
    }
    return p;
  };
  for (Atom a : order_) {
    AtomOp op{a->kind, a->index, a->profile.get(), a->order, {}};
    if (a->kind != AtomKind::Coord && a->kind != AtomKind::Pi) op.arg = compile_with(a->arg);
    atoms_.push_back(std::move(op));
  }
  for (const Expr& e : outputs) outputs_.push_back(compile_with(e));
}

double ExprProgram::run(const Poly& p, const std::vector<double>& slots) {
  double total = 0.0;
  for (const Term& t : p) {
    double v = t.coef;
    for (const auto& [s, k] : t.factors) {
      const double a = slots[static_cast<std::size_t>(s)];
      if (k == 1) {
        v *= a;
      } else {
        if (k < 0 && a == 0.0) throw std::domain_error("negative power of zero at evaluation point");
        v *= std::pow(a, k);
      }
    }
    total += v;
  }
  return total;
}

void ExprProgram::evaluate(std::span<const double> x, std::span<double> out) const {
  std::vector<double> slots(atoms_.size());
  for (std::size_t i = 0; i < atoms_.size(); ++i) {
    const AtomOp& op = atoms_[i];
    double v = 0.0;
    switch (op.kind) {
      case AtomKind::Coord:
        if (op.index > static_cast<int>(x.size())) throw std::invalid_argument("point has too few coordinates");
        v = x[static_cast<std::size_t>(op.index - 1)];
        break;
      case AtomKind::Pi: v = M_PI; break;
      case AtomKind::Sin: v = std::sin(run(op.arg, slots)); break;
      case AtomKind::Cos: v = std::cos(run(op.arg, slots)); break;
      case AtomKind::Exp: v = std::exp(run(op.arg, slots)); break;
      case AtomKind::Inv: {
        const double d = run(op.arg, slots);
        if (d == 0.0) throw std::domain_error("reciprocal of zero at evaluation point");
        v = 1.0 / d;
        break;
      }
      case AtomKind::Profile:
        v = op.profile->derivative(run(op.arg, slots), static_cast<std::size_t>(op.order));
        break;
    }
    slots[i] = v;
  }
  for (std::size_t j = 0; j < outputs_.size(); ++j) out[j] = run(outputs_[j], slots);
}

double ExprProgram::run_grad(const Poly& p, const std::vector<double>& slots, const std::vector<double>& slot_grad,
                             std::size_t d, double* grad_out, std::vector<double>& scratch) {
  std::fill(grad_out, grad_out + d, 0.0);
  scratch.resize(d);
  double total = 0.0;
  for (const Term& t : p) {
    double v = t.coef;
    std::fill(scratch.begin(), scratch.end(), 0.0);
    for (const auto& [s, k] : t.factors) {
      const double a = slots[static_cast<std::size_t>(s)];
      if (k < 0 && a == 0.0) throw std::domain_error("negative power of zero at evaluation point");
      const double f = k == 1 ? a : std::pow(a, k);
      const double df = k == 1 ? 1.0 : k * std::pow(a, k - 1);
      const double* ga = &slot_grad[static_cast<std::size_t>(s) * d];
      for (std::size_t i = 0; i < d; ++i) scratch[i] = scratch[i] * f + v * df * ga[i];
      v *= f;
    }
    total += v;
    for (std::size_t i = 0; i < d; ++i) grad_out[i] += scratch[i];
  }
  return total;
}

void ExprProgram::evaluate_with_gradient(std::span<const double> x, std::vector<double>& values,
                                         std::vector<double>& grad) const {
  const std::size_t d = x.size();
  std::vector<double> slots(atoms_.size());
  std::vector<double> slot_grad(atoms_.size() * d, 0.0);
  std::vector<double> arg_grad(d), scratch;
  for (std::size_t i = 0; i < atoms_.size(); ++i) {
    const AtomOp& op = atoms_[i];
    double* g = &slot_grad[i * d];
    double v = 0.0;
    auto chain = [&](double value, double slope) {
      for (std::size_t k = 0; k < d; ++k) g[k] = slope * arg_grad[k];
      return value;
    };
    switch (op.kind) {
      case AtomKind::Coord:
        if (op.index > static_cast<int>(d)) throw std::invalid_argument("point has too few coordinates");
        v = x[static_cast<std::size_t>(op.index - 1)];
        g[op.index - 1] = 1.0;
        break;
      case AtomKind::Pi: v = M_PI; break;
      case AtomKind::Sin: {
        const double a = run_grad(op.arg, slots, slot_grad, d, arg_grad.data(), scratch);
        v = chain(std::sin(a), std::cos(a));
        break;
      }
      case AtomKind::Cos: {
        const double a = run_grad(op.arg, slots, slot_grad, d, arg_grad.data(), scratch);
        v = chain(std::cos(a), -std::sin(a));
        break;
      }
      case AtomKind::Exp: {
        const double a = run_grad(op.arg, slots, slot_grad, d, arg_grad.data(), scratch);
        const double e = std::exp(a);
        v = chain(e, e);
        break;
      }
      case AtomKind::Inv: {
        const double a = run_grad(op.arg, slots, slot_grad, d, arg_grad.data(), scratch);
        if (a == 0.0) throw std::domain_error("reciprocal of zero at evaluation point");
        v = chain(1.0 / a, -1.0 / (a * a));
        break;
      }
      case AtomKind::Profile: {
        const double a = run_grad(op.arg, slots, slot_grad, d, arg_grad.data(), scratch);
        const std::size_t k = static_cast<std::size_t>(op.order);
        v = chain(op.profile->derivative(a, k), op.profile->derivative(a, k + 1));
        break;
      }
    }
    slots[i] = v;
  }
  values.resize(outputs_.size());
  grad.resize(outputs_.size() * d);
  for (std::size_t j = 0; j < outputs_.size(); ++j)
    values[j] = run_grad(outputs_[j], slots, slot_grad, d, &grad[j * d], scratch);
}

std::vector<double> ExprProgram::evaluate(std::span<const double> x) const {
  std::vector<double> out(outputs_.size());
  evaluate(x, out);
  return out;
}

ZeroVerdict zero_test(const Expr& e, const std::vector<std::vector<double>>& points, double tolerance) {
  return zero_test(std::vector<Expr>{e}, points, tolerance);
}

ZeroVerdict zero_test(const std::vector<Expr>& es, const std::vector<std::vector<double>>& points, double tolerance) {
  ZeroVerdict v;
  std::vector<Expr> live;
  for (const Expr& e : es)
    if (!e.is_zero()) live.push_back(e);
  if (live.empty()) {
    v.zero = true;
    v.method = "exact";
    return v;
  }
  ExprProgram program(live);
  std::vector<double> out(live.size());
  for (const auto& p : points) {
    try {
      program.evaluate(p, out);
    } catch (const std::domain_error&) {
      ++v.skipped;
      continue;
    }
    ++v.samples;
    for (double value : out) v.max_abs = std::max(v.max_abs, std::fabs(value));
  }
  v.zero = v.samples > 0 && v.max_abs <= tolerance;
  v.method = v.zero ? "sampled" : "nonzero";
  return v;
}

}  // namespace logsym
