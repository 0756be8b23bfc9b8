#include "logsym/expr.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <unordered_map>

namespace logsym {

namespace {

struct InternTable {
  std::mutex mu;
  std::unordered_map<std::string, std::unique_ptr<AtomNode>> atoms;
  std::size_t next_serial = 0;
};

InternTable& intern_table() {
  static InternTable table;
  return table;
}

struct AtomInfo {
  std::uint64_t coord_mask = 0;
  bool transcendental = false;
  bool profile = false;
};

std::mutex info_mu;
std::unordered_map<Atom, AtomInfo>& info_table() {
  static std::unordered_map<Atom, AtomInfo> table;
  return table;
}

AtomInfo atom_info(Atom a) {
  std::lock_guard<std::mutex> lock(info_mu);
  return info_table().at(a);
}

AtomInfo expr_info(const Expr& e) {
  AtomInfo info;
  for (const auto& [m, c] : e.terms()) {
    for (const auto& [a, k] : m) {
      AtomInfo ai = atom_info(a);
      info.coord_mask |= ai.coord_mask;
      info.transcendental |= ai.transcendental;
      info.profile |= ai.profile;
    }
  }
  return info;
}

std::size_t coef_hash(const Rational& c) {
  std::size_t h = mpz_get_ui(c.get_num_mpz_t());
  h = h * 1000003u ^ mpz_get_ui(c.get_den_mpz_t());
  return h * 2 + (sgn(c) < 0 ? 1 : 0);
}

std::size_t terms_hash(const Expr::Terms& terms) {
  std::size_t h = 0x9e3779b97f4a7c15ull;
  for (const auto& [m, c] : terms) {
    std::size_t th = coef_hash(c);
    for (const auto& [a, e] : m) th = th * 1315423911u ^ (a->hash + static_cast<std::size_t>(e) * 2654435761u);
    h ^= th + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
  }
  return h;
}

void add_term(Expr::Terms& acc, const Monomial& m, const Rational& c) {
  if (sgn(c) == 0) return;
  auto [it, inserted] = acc.try_emplace(m, c);
  if (!inserted) {
    it->second += c;
    if (sgn(it->second) == 0) acc.erase(it);
  }
}

Monomial merge(const Monomial& a, const Monomial& b) {
  Monomial out;
  out.reserve(a.size() + b.size());
  std::size_t i = 0, j = 0;
  while (i < a.size() || j < b.size()) {
    if (j == b.size() || (i < a.size() && a[i].first->serial < b[j].first->serial)) {
      out.push_back(a[i++]);
    } else if (i == a.size() || b[j].first->serial < a[i].first->serial) {
      out.push_back(b[j++]);
    } else {
      int e = a[i].second + b[j].second;
      if (e != 0) out.emplace_back(a[i].first, e);
      ++i;
      ++j;
    }
  }
  return out;
}

bool needs_rewrite(const Monomial& m) {
  int exp_count = 0;
  for (const auto& [a, e] : m) {
    if (a->kind == AtomKind::Exp) {
      if (e != 1 || ++exp_count > 1) return true;
    } else if (a->kind == AtomKind::Inv && e < 0) {
      return true;
    } else if (a->kind == AtomKind::Cos && e >= 2) {
      return true;
    }
  }
  return false;
}

void accumulate(Expr::Terms& acc, const Monomial& m, const Rational& c) {
  if (sgn(c) == 0) return;
  if (!needs_rewrite(m)) {
    add_term(acc, m, c);
    return;
  }
  Monomial base;
  Expr factor(1L);
  Expr exp_arg;
  bool has_exp = false;
  for (const auto& [a, e] : m) {
    switch (a->kind) {
      case AtomKind::Exp:
        exp_arg += a->arg * Expr(static_cast<long>(e));
        has_exp = true;
        break;
      case AtomKind::Inv:
        if (e < 0) {
          factor = factor * a->arg.pow(-e);
        } else {
          base.emplace_back(a, e);
        }
        break;
      case AtomKind::Cos:
        if (e >= 2) {
          if (e % 2 != 0) base.emplace_back(a, 1);
          Expr s = sin(a->arg);
          factor = factor * (Expr(1L) - s * s).pow(e / 2);
        } else {
          base.emplace_back(a, e);
        }
        break;
      default:
        base.emplace_back(a, e);
    }
  }
  if (has_exp) factor = factor * exp(exp_arg);
  for (const auto& [fm, fc] : factor.terms()) accumulate(acc, merge(base, fm), c * fc);
}

// Structural ordering of monomials: atoms by canonical key, then lexicographic.
std::vector<std::pair<const AtomNode*, int>> key_sorted(const Monomial& m) {
  auto v = m;
  std::sort(v.begin(), v.end(), [](const auto& x, const auto& y) {
    if (x.first->key != y.first->key) return x.first->key < y.first->key;
    return x.first->serial < y.first->serial;
  });
  return v;
}

bool structural_less(const Monomial& a, const Monomial& b) {
  auto ka = key_sorted(a);
  auto kb = key_sorted(b);
  const std::size_t n = std::min(ka.size(), kb.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (ka[i].first != kb[i].first) {
      if (ka[i].first->key != kb[i].first->key) return ka[i].first->key < kb[i].first->key;
      return ka[i].first->serial < kb[i].first->serial;
    }
    if (ka[i].second != kb[i].second) return ka[i].second < kb[i].second;
  }
  return ka.size() < kb.size();
}

std::vector<const Expr::Terms::value_type*> printing_order(const Expr& e) {
  std::vector<const Expr::Terms::value_type*> v;
  v.reserve(e.term_count());
  for (const auto& t : e.terms()) v.push_back(&t);
  std::sort(v.begin(), v.end(), [](const auto* x, const auto* y) { return structural_less(x->first, y->first); });
  return v;
}

Rational leading_coefficient(const Expr& e) {
  const Expr::Terms::value_type* best = nullptr;
  for (const auto& t : e.terms())
    if (best == nullptr || structural_less(t.first, best->first)) best = &t;
  return best == nullptr ? Rational(0) : best->second;
}

std::string atom_key(AtomKind kind, int index, const ProfilePtr& profile, int order, const Expr& arg) {
  switch (kind) {
    case AtomKind::Coord: return "x" + std::to_string(index);
    case AtomKind::Pi: return "pi";
    case AtomKind::Sin: return "sin(" + arg.str() + ")";
    case AtomKind::Cos: return "cos(" + arg.str() + ")";
    case AtomKind::Exp: return "exp(" + arg.str() + ")";
    case AtomKind::Inv: return "(" + arg.str() + ")";
    case AtomKind::Profile:
      return "profile(" + profile->name() + std::string(static_cast<std::size_t>(order), '\'') + ", " + arg.str() + ")";
  }
  return "?";
}

Atom intern(AtomKind kind, int index, ProfilePtr profile, int order, Expr arg) {
  std::string key = atom_key(kind, index, profile, order, arg);
  std::string lookup = key;
  if (profile) lookup += "@" + std::to_string(reinterpret_cast<std::uintptr_t>(profile.get()));
  AtomInfo info;
  if (kind == AtomKind::Coord) {
    if (index < 1 || index > 63) throw std::invalid_argument("coordinate index out of range: " + std::to_string(index));
    info.coord_mask = std::uint64_t{1} << index;
  } else if (kind != AtomKind::Pi) {
    info = expr_info(arg);
  }
  if (kind == AtomKind::Exp || kind == AtomKind::Inv || kind == AtomKind::Profile) info.transcendental = true;
  if (kind == AtomKind::Profile) info.profile = true;

  InternTable& table = intern_table();
  std::lock_guard<std::mutex> lock(table.mu);
  auto it = table.atoms.find(lookup);
  if (it != table.atoms.end()) return it->second.get();
  auto node = std::make_unique<AtomNode>();
  node->kind = kind;
  node->index = index;
  node->profile = std::move(profile);
  node->order = order;
  node->arg = std::move(arg);
  node->serial = table.next_serial++;
  node->hash = std::hash<std::string>{}(key);
  node->key = std::move(key);
  Atom a = node.get();
  table.atoms.emplace(std::move(lookup), std::move(node));
  {
    std::lock_guard<std::mutex> info_lock(info_mu);
    info_table().emplace(a, info);
  }
  return a;
}

Atom pi_atom() {
  static Atom a = intern(AtomKind::Pi, 0, nullptr, 0, Expr());
  return a;
}

// q with arg = q*pi and 2q integral; returns 2q.
std::optional<long> half_integer_pi_multiple(const Expr& arg) {
  if (arg.term_count() != 1) return std::nullopt;
  const auto& [m, c] = *arg.terms().begin();
  if (m.size() != 1 || m[0].first != pi_atom() || m[0].second != 1) return std::nullopt;
  Rational twice = c * 2;
  if (twice.get_den() != 1 || !twice.get_num().fits_slong_p()) return std::nullopt;
  return twice.get_num().get_si();
}

std::mutex deriv_mu;
std::map<std::pair<std::size_t, int>, Expr>& deriv_cache() {
  static std::map<std::pair<std::size_t, int>, Expr> cache;
  return cache;
}

Expr atom_derivative(Atom a, int i) {
  if ((atom_info(a).coord_mask & (std::uint64_t{1} << i)) == 0) return Expr();
  {
    std::lock_guard<std::mutex> lock(deriv_mu);
    auto it = deriv_cache().find({a->serial, i});
    if (it != deriv_cache().end()) return it->second;
  }
  Expr d;
  switch (a->kind) {
    case AtomKind::Coord: d = Expr(a->index == i ? 1L : 0L); break;
    case AtomKind::Pi: break;
    case AtomKind::Sin: d = cos(a->arg) * a->arg.diff(i); break;
    case AtomKind::Cos: d = -(sin(a->arg) * a->arg.diff(i)); break;
    case AtomKind::Exp: d = Expr::from_atom(a) * a->arg.diff(i); break;
    case AtomKind::Inv: d = -(Expr::from_atom(a, 2) * a->arg.diff(i)); break;
    case AtomKind::Profile: d = profile_call(a->profile, a->order + 1, a->arg) * a->arg.diff(i); break;
  }
  std::lock_guard<std::mutex> lock(deriv_mu);
  deriv_cache().emplace(std::make_pair(a->serial, i), d);
  return d;
}

void collect_atoms_rec(const Expr& e, std::set<Atom>& out) {
  for (const auto& [m, c] : e.terms()) {
    for (const auto& [a, k] : m) {
      if (out.insert(a).second && a->kind != AtomKind::Coord && a->kind != AtomKind::Pi) collect_atoms_rec(a->arg, out);
    }
  }
}

}  // namespace

bool MonomialLess::operator()(const Monomial& a, const Monomial& b) const {
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (a[i].first != b[i].first) return a[i].first->serial < b[i].first->serial;
    if (a[i].second != b[i].second) return a[i].second < b[i].second;
  }
  return a.size() < b.size();
}

Expr::Expr() : Expr(from_terms({})) {}

Expr::Expr(const Rational& value) {
  Terms t;
  if (sgn(value) != 0) t.emplace(Monomial{}, value);
  *this = from_terms(std::move(t));
}

Expr::Expr(long value) : Expr(Rational(value)) {}

Expr Expr::from_terms(Terms terms) {
  auto data = std::make_shared<Data>();
  data->hash = terms_hash(terms);
  data->terms = std::move(terms);
  return Expr(std::shared_ptr<const Data>(std::move(data)));
}

Expr Expr::from_atom(Atom atom, int exponent) {
  Terms acc;
  accumulate(acc, Monomial{{atom, exponent}}, Rational(1));
  return from_terms(std::move(acc));
}

Expr Expr::coord(int i) { return from_atom(intern(AtomKind::Coord, i, nullptr, 0, Expr())); }

Expr Expr::pi() { return from_atom(pi_atom()); }

bool Expr::is_constant() const {
  return terms().empty() || (terms().size() == 1 && terms().begin()->first.empty());
}

std::optional<Rational> Expr::as_constant() const {
  if (terms().empty()) return Rational(0);
  if (terms().size() == 1 && terms().begin()->first.empty()) return terms().begin()->second;
  return std::nullopt;
}

Expr Expr::operator-() const {
  Terms t = terms();
  for (auto& [m, c] : t) c = -c;
  return from_terms(std::move(t));
}

Expr operator+(const Expr& a, const Expr& b) {
  if (a.is_zero()) return b;
  if (b.is_zero()) return a;
  Expr::Terms t = a.terms();
  for (const auto& [m, c] : b.terms()) add_term(t, m, c);
  return Expr::from_terms(std::move(t));
}

Expr operator-(const Expr& a, const Expr& b) {
  if (b.is_zero()) return a;
  Expr::Terms t = a.terms();
  for (const auto& [m, c] : b.terms()) add_term(t, m, -c);
  return Expr::from_terms(std::move(t));
}

Expr operator*(const Expr& a, const Expr& b) {
  if (a.is_zero() || b.is_zero()) return Expr();
  Expr::Terms acc;
  for (const auto& [ma, ca] : a.terms())
    for (const auto& [mb, cb] : b.terms()) accumulate(acc, merge(ma, mb), ca * cb);
  return Expr::from_terms(std::move(acc));
}

Expr operator/(const Expr& a, const Expr& b) {
  if (auto c = b.as_constant()) {
    if (sgn(*c) == 0) throw std::domain_error("division by zero expression");
    Expr::Terms t = a.terms();
    for (auto& [m, v] : t) v /= *c;
    return Expr::from_terms(std::move(t));
  }
  return a * b.inverse();
}

bool operator==(const Expr& a, const Expr& b) {
  if (a.data_ == b.data_) return true;
  return a.hash() == b.hash() && a.terms() == b.terms();
}

Expr Expr::pow(int k) const {
  if (k < 0) return inverse().pow(-k);
  Expr result(1L);
  Expr base = *this;
  while (k > 0) {
    if (k & 1) result = result * base;
    k >>= 1;
    if (k > 0) base = base * base;
  }
  return result;
}

Expr Expr::inverse() const {
  if (is_zero()) throw std::domain_error("reciprocal of the zero expression");
  if (term_count() == 1) {
    const auto& [m, c] = *terms().begin();
    Monomial neg;
    neg.reserve(m.size());
    for (const auto& [a, e] : m) neg.emplace_back(a, -e);
    Terms acc;
    accumulate(acc, neg, Rational(1) / c);
    return from_terms(std::move(acc));
  }
  Rational lead = leading_coefficient(*this);
  Expr normalized = *this / Expr(lead);
  return from_atom(intern(AtomKind::Inv, 0, nullptr, 0, normalized)) / Expr(lead);
}

Expr Expr::diff(int i) const {
  Terms acc;
  for (const auto& [m, c] : terms()) {
    for (std::size_t k = 0; k < m.size(); ++k) {
      Expr da = atom_derivative(m[k].first, i);
      if (da.is_zero()) continue;
      Monomial rest = m;
      const int e = m[k].second;
      if (e == 1) {
        rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(k));
      } else {
        rest[k].second = e - 1;
      }
      const Rational scale = c * e;
      for (const auto& [dm, dc] : da.terms()) accumulate(acc, merge(rest, dm), scale * dc);
    }
  }
  return from_terms(std::move(acc));
}

Expr Expr::substitute(const std::vector<Expr>& values) const {
  std::unordered_map<Atom, Expr> memo;
  std::function<Expr(const Expr&)> sub_expr;
  std::function<Expr(Atom)> sub_atom = [&](Atom a) -> Expr {
    auto it = memo.find(a);
    if (it != memo.end()) return it->second;
    Expr r;
    switch (a->kind) {
      case AtomKind::Coord:
        if (a->index > static_cast<int>(values.size()))
          throw std::invalid_argument("substitution has no value for x" + std::to_string(a->index));
        r = values[static_cast<std::size_t>(a->index - 1)];
        break;
      case AtomKind::Pi: r = Expr::pi(); break;
      case AtomKind::Sin: r = sin(sub_expr(a->arg)); break;
      case AtomKind::Cos: r = cos(sub_expr(a->arg)); break;
      case AtomKind::Exp: r = exp(sub_expr(a->arg)); break;
      case AtomKind::Inv: r = sub_expr(a->arg).inverse(); break;
      case AtomKind::Profile: r = profile_call(a->profile, a->order, sub_expr(a->arg)); break;
    }
    memo.emplace(a, r);
    return r;
  };
  sub_expr = [&](const Expr& e) -> Expr {
    Expr total;
    for (const auto& [m, c] : e.terms()) {
      Expr term{c};
      for (const auto& [a, k] : m) term = term * sub_atom(a).pow(k);
      total += term;
    }
    return total;
  };
  return sub_expr(*this);
}

double Expr::evaluate(std::span<const double> x) const {
  std::unordered_map<Atom, double> memo;
  std::function<double(const Expr&)> eval_expr;
  std::function<double(Atom)> eval_atom = [&](Atom a) -> double {
    auto it = memo.find(a);
    if (it != memo.end()) return it->second;
    double v = 0.0;
    switch (a->kind) {
      case AtomKind::Coord:
        if (a->index > static_cast<int>(x.size()))
          throw std::invalid_argument("point has no value for x" + std::to_string(a->index));
        v = x[static_cast<std::size_t>(a->index - 1)];
        break;
      case AtomKind::Pi: v = M_PI; break;
      case AtomKind::Sin: v = std::sin(eval_expr(a->arg)); break;
      case AtomKind::Cos: v = std::cos(eval_expr(a->arg)); break;
      case AtomKind::Exp: v = std::exp(eval_expr(a->arg)); break;
      case AtomKind::Inv: {
        double d = eval_expr(a->arg);
        if (d == 0.0) throw std::domain_error("reciprocal of zero at evaluation point");
        v = 1.0 / d;
        break;
      }
      case AtomKind::Profile:
        v = a->profile->derivative(eval_expr(a->arg), static_cast<std::size_t>(a->order));
        break;
    }
    memo.emplace(a, v);
    return v;
  };
  eval_expr = [&](const Expr& e) -> double {
    double total = 0.0;
    for (const auto& [m, c] : e.terms()) {
      double t = c.get_d();
      for (const auto& [a, k] : m) {
        const double av = eval_atom(a);
        if (k < 0 && av == 0.0) throw std::domain_error("negative power of zero at evaluation point");
        t *= k == 1 ? av : std::pow(av, k);
      }
      total += t;
    }
    return total;
  };
  return eval_expr(*this);
}

int Expr::max_coord() const {
  std::uint64_t mask = expr_info(*this).coord_mask;
  int best = 0;
  for (int i = 1; i < 64; ++i)
    if (mask & (std::uint64_t{1} << i)) best = i;
  return best;
}

bool Expr::depends_on(int i) const { return (expr_info(*this).coord_mask & (std::uint64_t{1} << i)) != 0; }

bool Expr::has_transcendental_leaves() const { return expr_info(*this).transcendental; }

bool Expr::has_profile() const { return expr_info(*this).profile; }

void Expr::collect_atoms(std::set<Atom>& out) const { collect_atoms_rec(*this, out); }

std::string Expr::str() const {
  if (is_zero()) return "0";
  std::string out;
  bool first = true;
  for (const auto* t : printing_order(*this)) {
    const Monomial& m = t->first;
    Rational c = t->second;
    const bool negative = sgn(c) < 0;
    if (negative) c = -c;
    if (first) {
      if (negative) out += "-";
    } else {
      out += negative ? " - " : " + ";
    }
    first = false;
    std::string body;
    for (const auto& [a, e] : key_sorted(m)) {
      if (!body.empty()) body += "*";
      if (a->kind == AtomKind::Inv) {
        body += a->key + "^-" + std::to_string(e);
      } else {
        body += a->key;
        if (e != 1) body += "^" + std::to_string(e);
      }
    }
    if (body.empty()) {
      out += to_string(c);
    } else if (c == 1) {
      out += body;
    } else {
      out += to_string(c) + "*" + body;
    }
  }
  return out;
}

Expr sin(const Expr& arg) {
  if (arg.is_zero()) return Expr();
  if (auto twice = half_integer_pi_multiple(arg)) {
    const long t = *twice;
    if (t % 2 == 0) return Expr();
    const long q = ((t - 1) / 2) % 2;  // sin((2j+1)π/2) = (-1)^j
    return Expr(q == 0 ? 1L : -1L);
  }
  if (sgn(leading_coefficient(arg)) < 0) return -Expr::from_atom(intern(AtomKind::Sin, 0, nullptr, 0, -arg));
  return Expr::from_atom(intern(AtomKind::Sin, 0, nullptr, 0, arg));
}

Expr cos(const Expr& arg) {
  if (arg.is_zero()) return Expr(1L);
  if (auto twice = half_integer_pi_multiple(arg)) {
    const long t = *twice;
    if (t % 2 != 0) return Expr();
    return Expr((t / 2) % 2 == 0 ? 1L : -1L);
  }
  if (sgn(leading_coefficient(arg)) < 0) return Expr::from_atom(intern(AtomKind::Cos, 0, nullptr, 0, -arg));
  return Expr::from_atom(intern(AtomKind::Cos, 0, nullptr, 0, arg));
}

Expr exp(const Expr& arg) {
  if (arg.is_zero()) return Expr(1L);
  return Expr::from_atom(intern(AtomKind::Exp, 0, nullptr, 0, arg));
}

Expr profile_call(const ProfilePtr& profile, int order, const Expr& arg) {
  if (!profile) throw std::invalid_argument("profile_call with null profile");
  if (order < 0) throw std::invalid_argument("negative profile derivative order");
  return Expr::from_atom(intern(AtomKind::Profile, 0, profile, order, arg));
}

Expr rewrite_profile(const Expr& e, const std::string& profile_name, const ProfileRewrite& fn) {
  std::unordered_map<Atom, Expr> memo;
  std::function<Expr(const Expr&)> rec_expr;
  std::function<Expr(Atom)> rec_atom = [&](Atom a) -> Expr {
    auto it = memo.find(a);
    if (it != memo.end()) return it->second;
    Expr r;
    switch (a->kind) {
      case AtomKind::Coord:
      case AtomKind::Pi: r = Expr::from_atom(a); break;
      case AtomKind::Sin: r = sin(rec_expr(a->arg)); break;
      case AtomKind::Cos: r = cos(rec_expr(a->arg)); break;
      case AtomKind::Exp: r = exp(rec_expr(a->arg)); break;
      case AtomKind::Inv: r = rec_expr(a->arg).inverse(); break;
      case AtomKind::Profile: {
        Expr arg = rec_expr(a->arg);
        if (a->profile->name() == profile_name) {
          r = fn(a->order, arg);
        } else {
          r = profile_call(a->profile, a->order, arg);
        }
        break;
      }
    }
    memo.emplace(a, r);
    return r;
  };
  rec_expr = [&](const Expr& x) -> Expr {
    Expr total;
    for (const auto& [m, c] : x.terms()) {
      Expr term{c};
      for (const auto& [a, k] : m) term = term * rec_atom(a).pow(k);
      total += term;
    }
    return total;
  };
  return rec_expr(e);
}

Expr replace_profile(const Expr& e, const std::string& profile_name, const Rational& value) {
  return rewrite_profile(e, profile_name, [&](int order, const Expr&) { return order == 0 ? Expr(value) : Expr(); });
}

int structural_compare(const Expr& a, const Expr& b) {
  const std::string sa = a.str();
  const std::string sb = b.str();
  return sa < sb ? -1 : (sa == sb ? 0 : 1);
}

}  // namespace logsym
