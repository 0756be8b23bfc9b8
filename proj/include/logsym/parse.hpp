#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "logsym/expr.hpp"
#include "logsym/profile.hpp"

namespace logsym {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& message, int line, int column)
      : std::runtime_error(message + " (line " + std::to_string(line) + ", column " + std::to_string(column) + ")"),
        line_(line),
        column_(column) {}
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

struct ParseContext {
  const ProfileTable* profiles = nullptr;
  /// Highest admissible coordinate index; 0 means unchecked.
  int max_coord = 0;
};

/// Grammar: numbers (exact decimals), x1..xN, + - * / ^k (k a possibly negative integer),
/// sin cos exp pi, profile(name, arg) with trailing primes on the name for derivatives.
Expr parse_expr(std::string_view text, const ParseContext& ctx = {});

struct BasisTerm {
  Expr coefficient;
  std::vector<int> indices;  ///< as written, 1-based
};

/// Parses a sum of basis terms "c*e{i,j,...}", where each coefficient is a product-level
/// expression (wrap sums in parentheses). A lone "0" is the empty sum.
std::vector<BasisTerm> parse_basis_sum(std::string_view text, const ParseContext& ctx = {});

/// Exact value of a decimal literal such as "12", "0.125" or "1.5e-3".
Rational parse_decimal(std::string_view literal);

}  // namespace logsym
