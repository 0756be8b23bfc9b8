#include "logsym/parse.hpp"

#include <cctype>

namespace logsym {

namespace {

class Parser {
 public:
  Parser(std::string_view text, const ParseContext& ctx) : text_(text), ctx_(ctx) {}

  std::vector<BasisTerm> parse_basis_terms() {
    std::vector<BasisTerm> out;
    skip_space();
    if (text_.substr(pos_).find_first_not_of(" \t\r\n0") == std::string_view::npos &&
        text_.find('0') != std::string_view::npos) {
      return out;
    }
    bool first = true;
    while (true) {
      skip_space();
      if (pos_ >= text_.size()) {
        if (first) fail("empty form");
        break;
      }
      bool negative = false;
      if (accept('-')) {
        negative = true;
      } else if (accept('+')) {
      } else if (!first) {
        fail("expected '+' or '-' between terms");
      }
      first = false;
      Expr coef(1L);
      if (!at_basis()) {
        coef = parse_product();
        if (!accept('*')) fail("expected '*e{...}' after coefficient");
        if (!at_basis()) fail("expected basis element e{...}");
      }
      pos_ += 1;
      expect('{');
      std::vector<int> idx;
      if (!accept('}')) {
        do {
          skip_space();
          std::size_t start = pos_;
          while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
          if (start == pos_) fail("expected index");
          idx.push_back(std::stoi(std::string(text_.substr(start, pos_ - start))));
        } while (accept(','));
        expect('}');
      }
      out.push_back({negative ? -coef : coef, idx});
    }
    return out;
  }

  Expr parse_all() {
    Expr e = parse_sum();
    skip_space();
    if (pos_ != text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& message) const {
    int line = 1, column = 1;
    for (std::size_t i = 0; i < pos_ && i < text_.size(); ++i) {
      if (text_[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    throw ParseError(message, line, column);
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) fail(std::string("expected '") + c + "'");
  }

  std::string identifier() {
    skip_space();
    std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
      ++pos_;
    return std::string(text_.substr(start, pos_ - start));
  }

  Expr parse_sum() {
    Expr acc = parse_product();
    while (true) {
      if (accept('+')) {
        acc = acc + parse_product();
      } else if (accept('-')) {
        acc = acc - parse_product();
      } else {
        return acc;
      }
    }
  }

  bool at_basis() {
    skip_space();
    return pos_ + 1 < text_.size() && text_[pos_] == 'e' && text_[pos_ + 1] == '{';
  }

  Expr parse_product() {
    Expr acc = parse_unary();
    while (true) {
      skip_space();
      if (pos_ + 1 < text_.size() && text_[pos_] == '*') {
        std::size_t save = pos_;
        ++pos_;
        if (at_basis()) {
          pos_ = save;
          return acc;
        }
        pos_ = save;
      }
      if (accept('*')) {
        acc = acc * parse_unary();
      } else if (accept('/')) {
        std::size_t at = pos_;
        Expr d = parse_unary();
        if (d.is_zero()) {
          pos_ = at;
          fail("division by zero");
        }
        acc = acc / d;
      } else {
        return acc;
      }
    }
  }

  Expr parse_unary() {
    if (accept('-')) return -parse_unary();
    if (accept('+')) return parse_unary();
    return parse_power();
  }

  Expr parse_power() {
    Expr base = parse_primary();
    if (accept('^')) {
      skip_space();
      bool negative = false;
      if (accept('-')) negative = true;
      skip_space();
      std::size_t start = pos_;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      if (start == pos_) fail("expected integer exponent");
      long k = std::stol(std::string(text_.substr(start, pos_ - start)));
      if (k > 1000) fail("exponent too large");
      if (negative && base.is_zero()) fail("negative power of zero");
      return base.pow(static_cast<int>(negative ? -k : k));
    }
    return base;
  }

  Expr parse_number() {
    std::size_t start = pos_;
    while (pos_ < text_.size() && (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.')) ++pos_;
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t save = pos_;
      ++pos_;
      if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
      std::size_t digits = pos_;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      if (digits == pos_) pos_ = save;
    }
    try {
      return Expr(parse_decimal(text_.substr(start, pos_ - start)));
    } catch (const std::invalid_argument&) {
      pos_ = start;
      fail("malformed number");
    }
  }

  Expr parse_primary() {
    skip_space();
    if (pos_ >= text_.size()) fail("unexpected end of expression");
    const char c = text_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (accept('(')) {
      Expr e = parse_sum();
      expect(')');
      return e;
    }
    if (!std::isalpha(static_cast<unsigned char>(c))) fail("unexpected '" + std::string(1, c) + "'");
    const std::size_t start = pos_;
    std::string name = identifier();
    if (name == "pi") return Expr::pi();
    if (name.size() >= 2 && name[0] == 'x' && std::isdigit(static_cast<unsigned char>(name[1]))) {
      bool digits = true;
      for (std::size_t i = 1; i < name.size(); ++i) digits &= std::isdigit(static_cast<unsigned char>(name[i])) != 0;
      if (digits && name.size() < 5) {
        int i = std::stoi(name.substr(1));
        if (i < 1 || (ctx_.max_coord > 0 && i > ctx_.max_coord) || i > 63) {
          pos_ = start;
          fail("coordinate " + name + " outside the chart");
        }
        return Expr::coord(i);
      }
    }
    if (name == "sin" || name == "cos" || name == "exp") {
      expect('(');
      Expr arg = parse_sum();
      expect(')');
      if (name == "sin") return sin(arg);
      if (name == "cos") return cos(arg);
      return exp(arg);
    }
    if (name == "profile") {
      expect('(');
      skip_space();
      const std::size_t name_pos = pos_;
      std::string pname = identifier();
      if (pname.empty()) fail("expected profile name");
      int order = 0;
      while (accept('\'')) ++order;
      expect(',');
      Expr arg = parse_sum();
      expect(')');
      ProfilePtr p = ctx_.profiles != nullptr ? ctx_.profiles->find(pname) : nullptr;
      if (!p) {
        pos_ = name_pos;
        fail("unknown profile '" + pname + "'");
      }
      return profile_call(p, order, arg);
    }
    pos_ = start;
    fail("unknown identifier '" + name + "'");
  }

  std::string_view text_;
  const ParseContext& ctx_;
  std::size_t pos_ = 0;
};

}  // namespace

Rational parse_decimal(std::string_view literal) {
  std::string mantissa;
  long exponent = 0;
  std::size_t i = 0;
  bool seen_point = false, seen_digit = false;
  for (; i < literal.size(); ++i) {
    const char c = literal[i];
    if (std::isdigit(static_cast<unsigned char>(c))) {
      mantissa += c;
      seen_digit = true;
      if (seen_point) --exponent;
    } else if (c == '.' && !seen_point) {
      seen_point = true;
    } else {
      break;
    }
  }
  if (!seen_digit) throw std::invalid_argument("malformed number");
  if (i < literal.size()) {
    if (literal[i] != 'e' && literal[i] != 'E') throw std::invalid_argument("malformed number");
    std::string tail(literal.substr(i + 1));
    if (tail.empty()) throw std::invalid_argument("malformed number");
    std::size_t used = 0;
    long e = std::stol(tail, &used);
    if (used != tail.size() || e > 4000 || e < -4000) throw std::invalid_argument("malformed number");
    exponent += e;
  }
  mpz_class num(mantissa, 10);
  mpz_class ten_pow;
  mpz_ui_pow_ui(ten_pow.get_mpz_t(), 10, static_cast<unsigned long>(exponent < 0 ? -exponent : exponent));
  Rational r = exponent >= 0 ? Rational(num * ten_pow) : Rational(num, ten_pow);
  r.canonicalize();
  return r;
}

std::vector<BasisTerm> parse_basis_sum(std::string_view text, const ParseContext& ctx) {
  Parser p(text, ctx);
  return p.parse_basis_terms();
}

Expr parse_expr(std::string_view text, const ParseContext& ctx) {
  Parser p(text, ctx);
  return p.parse_all();
}

}  // namespace logsym
