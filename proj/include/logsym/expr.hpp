#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "logsym/profile.hpp"
#include "logsym/rational.hpp"

namespace logsym {

class Expr;

enum class AtomKind { Coord, Pi, Sin, Cos, Exp, Inv, Profile };

struct AtomNode;
/// Atoms are interned: equal structure means equal pointer.
using Atom = const AtomNode*;

/// Product of atom powers, sorted by atom serial, no zero exponents.
using Monomial = std::vector<std::pair<Atom, int>>;

struct MonomialLess {
  bool operator()(const Monomial& a, const Monomial& b) const;
};

/// A smooth scalar function of chart coordinates, kept in canonical form: a polynomial with
/// rational coefficients over atoms (coordinates, pi, sin/cos/exp of canonical polynomials,
/// reciprocals of polynomials, profile derivatives composed with polynomials).
///
/// Canonical rules: sin/cos arguments have a positive leading coefficient; cos^k with k >= 2 is
/// rewritten through 1 - sin^2; each monomial carries at most one exp atom (exponent 1); the
/// reciprocal of a monomial is a monomial with negated exponents; a reciprocal atom's argument is
/// a polynomial of at least two terms with leading coefficient 1.
class Expr {
 public:
  using Terms = std::map<Monomial, Rational, MonomialLess>;

  Expr();
  Expr(const Rational& value);  // NOLINT: implicit constant
  Expr(long value);             // NOLINT
  Expr(int value) : Expr(static_cast<long>(value)) {}  // NOLINT

  /// Coordinate x_i, 1-based.
  static Expr coord(int i);
  static Expr pi();
  static Expr from_atom(Atom atom, int exponent = 1);
  static Expr from_terms(Terms terms);

  const Terms& terms() const { return data_->terms; }
  std::size_t term_count() const { return data_->terms.size(); }
  bool is_zero() const { return data_->terms.empty(); }
  bool is_constant() const;
  /// The value if this expression is a rational constant.
  std::optional<Rational> as_constant() const;

  Expr operator-() const;
  friend Expr operator+(const Expr& a, const Expr& b);
  friend Expr operator-(const Expr& a, const Expr& b);
  friend Expr operator*(const Expr& a, const Expr& b);
  friend Expr operator/(const Expr& a, const Expr& b);
  Expr& operator+=(const Expr& b) { return *this = *this + b; }
  Expr& operator-=(const Expr& b) { return *this = *this - b; }
  Expr& operator*=(const Expr& b) { return *this = *this * b; }

  /// Integer power; negative exponents go through inverse().
  Expr pow(int k) const;
  /// Multiplicative inverse. Throws std::domain_error on the zero expression.
  Expr inverse() const;

  /// Partial derivative in x_i (1-based).
  Expr diff(int i) const;

  /// Replace x_i by values[i-1].
  Expr substitute(const std::vector<Expr>& values) const;

  /// Pointwise value; x[i-1] is x_i. Throws std::domain_error on a zero reciprocal.
  double evaluate(std::span<const double> x) const;

  /// Largest coordinate index appearing (0 if none).
  int max_coord() const;
  bool depends_on(int i) const;
  /// True when the expression has reciprocal, exp or profile atoms.
  bool has_transcendental_leaves() const;
  bool has_profile() const;
  void collect_atoms(std::set<Atom>& out) const;

  /// Canonical text; parses back to an identical expression.
  std::string str() const;

  std::size_t hash() const { return data_->hash; }
  friend bool operator==(const Expr& a, const Expr& b);
  friend bool operator!=(const Expr& a, const Expr& b) { return !(a == b); }

 private:
  struct Data {
    Terms terms;
    std::size_t hash = 0;
  };
  explicit Expr(std::shared_ptr<const Data> data) : data_(std::move(data)) {}
  std::shared_ptr<const Data> data_;
};

struct AtomNode {
  AtomKind kind;
  int index = 0;       // coordinate index for Coord
  ProfilePtr profile;  // Profile only
  int order = 0;       // derivative order for Profile
  Expr arg;            // Sin, Cos, Exp, Inv, Profile
  std::size_t serial = 0;
  std::size_t hash = 0;
  std::string key;  // canonical printed form, also the structural sort key
};

Expr sin(const Expr& arg);
Expr cos(const Expr& arg);
Expr exp(const Expr& arg);
/// order-th derivative of the profile, composed with arg.
Expr profile_call(const ProfilePtr& profile, int order, const Expr& arg);

/// Expression with every profile atom replaced by the given constant (for exact checks in regions
/// where a profile is known to be constant).
Expr replace_profile(const Expr& e, const std::string& profile_name, const Rational& value);

/// Replacement for a profile atom given its derivative order and (rewritten) argument.
using ProfileRewrite = std::function<Expr(int order, const Expr& arg)>;
/// Expression with every atom of the named profile replaced by fn(order, arg).
Expr rewrite_profile(const Expr& e, const std::string& profile_name, const ProfileRewrite& fn);

/// Three-way structural comparison (deterministic across runs).
int structural_compare(const Expr& a, const Expr& b);

}  // namespace logsym

template <>
struct std::hash<logsym::Expr> {
  std::size_t operator()(const logsym::Expr& e) const noexcept { return e.hash(); }
};
