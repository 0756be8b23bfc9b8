#pragma once

#include "logsym/constructions.hpp"

namespace logsym::testing {

/// T²×T² → T² projection with the sin defining function on the first base circle, base form
/// λ∧dy2, fiber area form dx3∧dx4 and a two-element cover with a nonzero primitive on the second.
inline ThurstonInput torus_product_thurston() {
  const Chart total = Chart::torus(4);
  const Chart base = Chart::torus(2);
  const Frame ord = Frame::ordinary(4);
  const Expr pi = Expr::pi();
  const Expr x1 = Expr::coord(1), x3 = Expr::coord(3);
  const BForm xi = BForm::term(ord, {2, 3}, Expr(1));
  const BForm alpha = BForm::term(ord, {3}, Expr(Rational(1, 10)) * sin(2 * pi * x3));
  ThurstonInput in{BMapModel{total.frame(), base.frame(), {Expr::coord(1), Expr::coord(2)}, std::nullopt},
                   total,
                   base,
                   BForm::term(base.frame(), {0, 1}, Expr(1)),
                   xi,
                   {CoverDatum{"cos", {}, cos(pi * x1) * cos(pi * x1), xi, BForm(ord, 1)},
                    CoverDatum{"sin", {}, sin(pi * x1) * sin(pi * x1), xi + b_d(alpha), alpha}},
                   constant_acs(complex_structure_matrix(4)),
                   1.0};
  return in;
}

}  // namespace logsym::testing
