#include "logsym/bgeometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "logsym/taming.hpp"

namespace logsym {

namespace {

constexpr int kMaxSymbolicDim = 6;

std::string point_str(std::span<const double> p) {
  std::ostringstream os;
  os.precision(6);
  os << "(";
  for (std::size_t i = 0; i < p.size(); ++i) os << (i ? ", " : "") << p[i];
  os << ")";
  return os.str();
}

Expr form_entry(const BForm& omega, int i, int j) {
  if (i == j) return Expr();
  if (i < j) return omega.coefficient(mask_of({i, j}));
  return -omega.coefficient(mask_of({j, i}));
}

std::vector<int> all_indices(int n) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  return idx;
}

/// Inverse-type transform shared by both directions: out_ij = (−1)^{i+j+1} Pf(A_îĵ)/Pf(A), i < j,
/// which equals −A⁻¹ for antisymmetric A.
template <class Entry, class Store>
void negative_inverse(int n, const Entry& entry, const Expr& pf, const Store& store) {
  const Expr inv = pf.inverse();
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      std::vector<int> rest;
      for (int k = 0; k < n; ++k)
        if (k != i && k != j) rest.push_back(k);
      Expr minor = pfaffian(rest, entry);
      if (minor.is_zero()) continue;
      if ((i + j + 1) % 2 != 0) minor = -minor;
      store(i, j, minor * inv);
    }
}

void check_nondegenerate(const Expr& pf, const Chart& chart, const Tolerances& tol, const char* what) {
  ExprProgram prog({pf});
  for (const auto& p : chart.grid(tol.grid, true)) {
    double v = 0.0;
    try {
      v = prog.evaluate(p)[0];
    } catch (const std::domain_error&) {
      throw GeometryError(std::string(what) + " is undefined at " + point_str(p), p);
    }
    if (!(std::fabs(v) >= tol.nondegeneracy))
      throw GeometryError(std::string(what) + " is degenerate at " + point_str(p) + " (Pfaffian " + std::to_string(v) + ")", p);
  }
}

std::vector<std::vector<double>> component_grid(const Chart& chart, double z, std::size_t per_axis) {
  std::vector<std::vector<double>> out;
  for (auto& p : chart.z_grid(per_axis))
    if (p[0] == z) out.push_back(std::move(p));
  return out;
}

Rational component_value(const ZComponent& c) { return c.exact ? *c.exact : rational_from_double(c.x1); }

}  // namespace

std::vector<Expr> b_differential_entries(const BMapModel& f) {
  std::vector<Expr> entries;
  for (int a = 0; a < f.target.dim; ++a) {
    BForm row = pullback(f, BForm::slot(f.target, a));
    for (int b = 0; b < f.source.dim; ++b) entries.push_back(row.coefficient(SlotMask{1} << b));
  }
  return entries;
}

Expr form_pfaffian(const BForm& omega) {
  if (omega.degree() != 2) throw std::invalid_argument("Pfaffian needs a two-form");
  return pfaffian(all_indices(omega.dim()), [&](int i, int j) { return form_entry(omega, i, j); });
}

Expr bivector_pfaffian(const BBivector& pi) {
  return pfaffian(all_indices(pi.dim()), [&](int i, int j) { return pi.at(i, j); });
}

BBivector dual_bivector(const BForm& omega, const Chart& chart, const Tolerances& tol) {
  if (omega.degree() != 2) throw std::invalid_argument("dual_bivector needs a two-form");
  if (omega.dim() > kMaxSymbolicDim) throw std::invalid_argument("symbolic inversion is limited to dimension 6");
  if (!(omega.frame() == chart.frame())) throw std::invalid_argument("form does not live on the chart's frame");
  const Expr pf = form_pfaffian(omega);
  if (pf.is_zero()) throw GeometryError("two-form is degenerate everywhere");
  check_nondegenerate(pf, chart, tol, "two-form");
  BBivector out(omega.frame());
  negative_inverse(
      omega.dim(), [&](int i, int j) { return form_entry(omega, i, j); }, pf,
      [&](int i, int j, const Expr& v) { out.set(i, j, v); });
  return out;
}

BForm invert_bivector(const BBivector& pi, const Chart& chart, const Tolerances& tol) {
  if (pi.dim() > kMaxSymbolicDim) throw std::invalid_argument("symbolic inversion is limited to dimension 6");
  if (!(pi.frame() == chart.frame())) throw std::invalid_argument("bivector does not live on the chart's frame");
  const Expr pf = bivector_pfaffian(pi);
  if (pf.is_zero()) throw GeometryError("bivector is degenerate everywhere");
  check_nondegenerate(pf, chart, tol, "bivector");
  BForm out(pi.frame(), 2);
  negative_inverse(
      pi.dim(), [&](int i, int j) { return pi.at(i, j); }, pf,
      [&](int i, int j, const Expr& v) { out.add(mask_of({i, j}), v); });
  return out;
}

Expr restrict_x1(const Expr& e, const Rational& value, int dim) {
  std::vector<Expr> values;
  values.push_back(Expr(value));
  for (int i = 2; i <= dim; ++i) values.push_back(Expr::coord(i));
  return e.substitute(values);
}

namespace {

/// Shared singular-locus scan. value(p) returns (h, ∂₁h) at p; line(t) returns h along the x1 axis
/// through the chart centre; exact(z) reports whether h restricted to x1 = z is the zero expression.
TransversalityReport scan_singular_locus(const Chart& chart, const Tolerances& tol,
                                         const std::function<std::pair<double, double>(std::span<const double>)>& value,
                                         const std::function<double(double)>& line,
                                         const std::function<bool(const Rational&)>& exact) {
  if (!chart.has_z()) throw std::invalid_argument("transversality check needs a chart with a singular locus");
  TransversalityReport r;
  const int dim = chart.dim();
  const auto points = chart.z_grid(per_axis_count(tol.grid, std::max(dim - 1, 1)));
  r.z_points = points.size();
  r.max_abs_h = 0.0;
  r.min_abs_dh = HUGE_VAL;
  for (const auto& p : points) {
    std::pair<double, double> v;
    try {
      v = value(p);
    } catch (const std::domain_error&) {
      r.reason = "function undefined at " + point_str(p);
      return r;
    }
    r.max_abs_h = std::max(r.max_abs_h, std::fabs(v.first));
    r.min_abs_dh = std::min(r.min_abs_dh, std::fabs(v.second));
  }
  r.exact_on_z = true;
  for (const auto& c : chart.z_components())
    if (!c.exact || !exact(*c.exact)) r.exact_on_z = false;

  std::vector<double> centre(static_cast<std::size_t>(dim));
  for (int i = 1; i < dim; ++i) {
    const Interval& iv = chart.box()[static_cast<std::size_t>(i)];
    centre[static_cast<std::size_t>(i)] = 0.5 * (iv.lo + iv.hi);
  }
  try {
    for (double z : zeros_along_line(line, chart.box()[0], chart.periodic()[0])) {
      bool known = false;
      for (const auto& c : chart.z_components()) known = known || std::fabs(c.x1 - z) < 1e-9;
      if (!known) r.extra_zeros.push_back(z);
    }
  } catch (const std::domain_error&) {
  }
  if (r.extra_zeros.size() > 64) {
    r.reason = "top power vanishes on an open set along x1";
    return r;
  }

  if (r.max_abs_h > tol.zero) {
    r.reason = "does not vanish on Z (max |h| = " + std::to_string(r.max_abs_h) + ")";
  } else if (r.min_abs_dh < tol.derivative) {
    r.reason = "vanishes tangentially on Z (min |d1 h| = " + std::to_string(r.min_abs_dh) + ")";
  } else {
    r.pass = true;
  }
  return r;
}

std::vector<double> centre_point(const Chart& chart, double x1) {
  std::vector<double> p(static_cast<std::size_t>(chart.dim()));
  p[0] = x1;
  for (int i = 1; i < chart.dim(); ++i) {
    const Interval& iv = chart.box()[static_cast<std::size_t>(i)];
    p[static_cast<std::size_t>(i)] = 0.5 * (iv.lo + iv.hi);
  }
  return p;
}

/// Pfaffian transversality evaluated pointwise from the entries, for entries with reciprocal or
/// exponential leaves where the symbolic Pfaffian grows too large. ∂₁Pf = Σ cof_ij ∂₁a_ij with
/// cof_ij = (−1)^{i+j+1} Pf(A_îĵ).
TransversalityReport numeric_pfaffian_scan(const BBivector& pi, const Chart& chart, const Tolerances& tol) {
  const int n = pi.dim();
  std::vector<Expr> entries;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) entries.push_back(pi.at(i, j));
  ExprProgram prog(entries);
  auto fill = [&](const std::vector<double>& v, std::size_t stride, std::size_t offset) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    std::size_t k = 0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        a(i, j) = v[k * stride + offset];
        a(j, i) = -a(i, j);
        ++k;
      }
    return a;
  };
  auto value = [&](std::span<const double> p) {
    std::vector<double> v, g;
    prog.evaluate_with_gradient(p, v, g);
    const Eigen::MatrixXd a = fill(v, 1, 0);
    const Eigen::MatrixXd da = fill(g, static_cast<std::size_t>(n), 0);
    double dh = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        if (da(i, j) == 0.0) continue;
        std::vector<int> rest;
        for (int k = 0; k < n; ++k)
          if (k != i && k != j) rest.push_back(k);
        Eigen::MatrixXd minor(rest.size(), rest.size());
        for (std::size_t r = 0; r < rest.size(); ++r)
          for (std::size_t c = 0; c < rest.size(); ++c) minor(r, c) = a(rest[r], rest[c]);
        const double cof = ((i + j + 1) % 2 == 0 ? 1.0 : -1.0) * pfaffian(minor);
        dh += cof * da(i, j);
      }
    return std::make_pair(pfaffian(a), dh);
  };
  auto line = [&](double t) {
    const std::vector<double> p = centre_point(chart, t);
    return pfaffian(fill(prog.evaluate(p), 1, 0));
  };
  auto exact = [&](const Rational& z) {
    std::vector<Expr> restricted;
    for (const Expr& e : entries) restricted.push_back(restrict_x1(e, z, n));
    std::vector<int> idx = all_indices(n);
    return pfaffian(idx, [&](int i, int j) {
             if (i == j) return Expr();
             const int a = std::min(i, j), b = std::max(i, j);
             const std::size_t k = static_cast<std::size_t>(a * n - a * (a + 1) / 2 + (b - a - 1));
             return i < j ? restricted[k] : -restricted[k];
           }).is_zero();
  };
  TransversalityReport r = scan_singular_locus(chart, tol, value, line, exact);
  r.symbolic_h = false;
  return r;
}

}  // namespace

TransversalityReport transversality(const Expr& h, const Chart& chart, const Tolerances& tol) {
  ExprProgram prog({h, h.diff(1)});
  auto value = [&](std::span<const double> p) {
    const std::vector<double> v = prog.evaluate(p);
    return std::make_pair(v[0], v[1]);
  };
  ExprProgram hp({h});
  auto line = [&](double t) { return hp.evaluate(centre_point(chart, t))[0]; };
  auto exact = [&](const Rational& z) { return restrict_x1(h, z, chart.dim()).is_zero(); };
  TransversalityReport r = scan_singular_locus(chart, tol, value, line, exact);
  r.h = h;
  return r;
}

TransversalityReport log_symplectic_check(const BBivector& pi, const Chart& chart, const Tolerances& tol) {
  if (!pi.frame().is_ordinary()) throw std::invalid_argument("log_symplectic_check needs an ordinary bivector");
  if (pi.dim() != chart.dim()) throw std::invalid_argument("bivector and chart dimensions differ");
  if (pi.dim() > kMaxSymbolicDim) throw std::invalid_argument("symbolic checks are limited to dimension 6");
  const int n = pi.dim();
  bool symbolic = true;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) symbolic = symbolic && !pi.at(i, j).has_transcendental_leaves();
  TransversalityReport r = symbolic ? transversality(bivector_pfaffian(pi), chart, tol) : numeric_pfaffian_scan(pi, chart, tol);
  if (n == 2) {
    r.poisson_method = "trivial";
    return r;
  }
  const auto grid = chart.grid(tol.grid, true);
  if (symbolic) {
    std::vector<Expr> jacobi;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        for (int k = j + 1; k < n; ++k) {
          Expr e;
          for (int l = 0; l < n; ++l) {
            e += pi.at(i, l) * pi.at(j, k).diff(l + 1);
            e += pi.at(j, l) * pi.at(k, i).diff(l + 1);
            e += pi.at(k, l) * pi.at(i, j).diff(l + 1);
          }
          jacobi.push_back(e);
        }
    ZeroVerdict v = zero_test(jacobi, grid, tol.zero);
    r.poisson = v.zero;
    r.poisson_method = v.method;
    if (!r.poisson) r.reason = "Schouten bracket [pi, pi] is nonzero (max " + std::to_string(v.max_abs) + ")";
  } else {
    // Reciprocal or exponential entries: evaluate the Jacobi sums from pointwise entries and partials.
    std::vector<Expr> upper;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) upper.push_back(pi.at(i, j));
    ExprProgram prog(upper);
    double worst = 0.0;
    std::size_t skipped = 0;
    std::vector<double> v, g;
    Eigen::MatrixXd a(n, n);
    std::vector<Eigen::MatrixXd> da(static_cast<std::size_t>(n), Eigen::MatrixXd::Zero(n, n));
    for (const auto& p : grid) {
      try {
        prog.evaluate_with_gradient(p, v, g);
      } catch (const std::domain_error&) {
        ++skipped;
        continue;
      }
      a.setZero();
      std::size_t k = 0;
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j, ++k) {
          a(i, j) = v[k];
          a(j, i) = -v[k];
          for (int l = 0; l < n; ++l) {
            da[static_cast<std::size_t>(l)](i, j) = g[k * static_cast<std::size_t>(n) + static_cast<std::size_t>(l)];
            da[static_cast<std::size_t>(l)](j, i) = -da[static_cast<std::size_t>(l)](i, j);
          }
        }
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
          for (int kk = j + 1; kk < n; ++kk) {
            double e = 0.0;
            for (int l = 0; l < n; ++l) {
              const auto& d = da[static_cast<std::size_t>(l)];
              e += a(i, l) * d(j, kk) + a(j, l) * d(kk, i) + a(kk, l) * d(i, j);
            }
            worst = std::max(worst, std::fabs(e));
          }
    }
    r.poisson = worst <= tol.zero && skipped < grid.size();
    r.poisson_method = r.poisson ? "sampled" : "nonzero";
    if (!r.poisson) r.reason = "Schouten bracket [pi, pi] is nonzero (max " + std::to_string(worst) + ")";
  }
  if (!r.poisson) r.pass = false;
  return r;
}

nlohmann::json TransversalityReport::to_json(const Chart& chart, const Tolerances& tol) const {
  nlohmann::json j;
  j["pass"] = pass;
  j["h"] = symbolic_h ? h.str() : "pointwise Pfaffian of the entries";
  j["max_abs_h_on_z"] = max_abs_h;
  j["min_abs_d1h_on_z"] = std::isfinite(min_abs_dh) ? nlohmann::json(min_abs_dh) : nlohmann::json(nullptr);
  j["exact_zero_on_z"] = exact_on_z;
  j["thresholds"] = {{"zero", tol.zero}, {"derivative", tol.derivative}};
  j["grid"] = grid_spec("singular-locus", per_axis_count(tol.grid, std::max(chart.dim() - 1, 1)), z_points);
  j["z"] = chart.describe().value("z_components_x1", nlohmann::json::array());
  j["extra_zeros_x1"] = extra_zeros;
  if (!poisson_method.empty()) j["poisson"] = {{"ok", poisson}, {"method", poisson_method}};
  if (!reason.empty()) j["reason"] = reason;
  return j;
}

std::vector<CosymplecticData> cosymplectic_extract(const BForm& omega, const Chart& chart, const Tolerances& tol) {
  if (omega.degree() != 2) throw std::invalid_argument("cosymplectic_extract needs a two-form");
  if (!chart.has_z()) throw std::invalid_argument("cosymplectic_extract needs a chart with a singular locus");
  if (!(omega.frame() == chart.frame())) throw std::invalid_argument("form does not live on the chart's frame");
  const int dim = chart.dim();
  const int n = dim / 2;
  const std::size_t per_axis = per_axis_count(tol.grid, std::max(dim - 1, 1));
  std::vector<CosymplecticData> out;
  for (const auto& c : chart.z_components()) {
    const Rational z = component_value(c);
    CosymplecticData d{c.x1, c.exact, BForm(chart.frame(), 1), BForm(chart.frame(), 2), 0.0};
    for (const auto& [m, coef] : omega.coefficients()) {
      const Expr r = restrict_x1(coef, z, dim);
      if (m & 1u)
        d.theta.add(m & ~SlotMask{1}, r);
      else
        d.sigma.add(m, r);
    }
    const auto grid = component_grid(chart, c.x1, per_axis);
    const ZeroVerdict dtheta = zero_test(b_d(d.theta).coefficient_list(), grid, tol.zero);
    if (!dtheta.zero) throw GeometryError("theta is not closed on the component x1 = " + std::to_string(c.x1));
    if (n > 1) {
      const ZeroVerdict dsigma = zero_test(b_d(d.sigma).coefficient_list(), grid, tol.zero);
      if (!dsigma.zero) throw GeometryError("sigma is not closed on the component x1 = " + std::to_string(c.x1));
    }
    BForm top = d.theta;
    for (int k = 1; k < n; ++k) top = wedge(top, d.sigma);
    SlotMask full = 0;
    for (int s = 1; s < dim; ++s) full |= SlotMask{1} << s;
    ExprProgram prog({top.coefficient(full)});
    d.margin = HUGE_VAL;
    for (const auto& p : grid) d.margin = std::min(d.margin, std::fabs(prog.evaluate(p)[0]));
    if (!(d.margin >= tol.margin))
      throw GeometryError("degenerate collar data: theta ^ sigma^(n-1) margin " + std::to_string(d.margin) +
                          " on the component x1 = " + std::to_string(c.x1));
    out.push_back(std::move(d));
  }
  return out;
}

Certificate validate_bmap(const BMapModel& f, const Chart& source, const Tolerances& tol) {
  if (!(f.source == source.frame())) throw std::invalid_argument("map source does not match the chart");
  if (static_cast<int>(f.components.size()) != f.target.dim)
    throw std::invalid_argument("map needs one component per target coordinate");
  Certificate cert("validate_bmap");
  cert.parameters()["source"] = source.describe();
  cert.parameters()["target_defining"] = f.target.is_ordinary() ? "none" : f.target.h.str();
  if (f.target.is_ordinary()) {
    cert.note("target has no singular locus; every smooth map is a b-map");
    return cert;
  }
  Expr u;
  if (f.target.h == f.source.h && f.components[0] == Expr::coord(1) && (!f.u || *f.u == Expr(1))) {
    u = Expr(1);
  } else if (f.target.h == Expr::coord(1)) {
    if (!f.u) throw GeometryError("first component must be supplied in factored form h*u");
    u = *f.u;
    if (!(f.components[0] == f.source.h * u))
      throw GeometryError("first component " + f.components[0].str() + " is not h*u with u = " + u.str());
  } else {
    throw GeometryError("unsupported target defining function " + f.target.h.str());
  }
  cert.parameters()["u"] = u.str();
  const auto grid = source.grid(tol.grid, true);
  cert.grid() = grid_spec("tensor", per_axis_count(tol.grid, source.dim()), grid.size());
  ExprProgram prog({u});
  double min_u = HUGE_VAL;
  std::vector<double> worst;
  for (const auto& p : grid) {
    double v = 0.0;
    try {
      v = std::fabs(prog.evaluate(p)[0]);
    } catch (const std::domain_error&) {
      v = 0.0;
    }
    if (v < min_u) {
      min_u = v;
      worst = p;
    }
  }
  cert.require_at_least("min_abs_u", min_u, tol.unit_margin);
  if (!cert.pass()) cert.note("u vanishes near " + point_str(worst));
  return cert;
}

Eigen::MatrixXd b_differential(const BMapModel& f, std::span<const double> p) {
  const std::vector<double> v = ExprProgram(b_differential_entries(f)).evaluate(p);
  Eigen::MatrixXd m(f.target.dim, f.source.dim);
  for (int a = 0; a < f.target.dim; ++a)
    for (int b = 0; b < f.source.dim; ++b) m(a, b) = v[static_cast<std::size_t>(a * f.source.dim + b)];
  return m;
}

SplittingReport section_splitting_check(const BMapModel& f, const BMapModel& s, const Chart& base, const Tolerances& tol) {
  if (!(f.source == s.target) || !(f.target == s.source) || !(s.source == base.frame()))
    throw std::invalid_argument("section_splitting_check: frames of f, s and the base chart do not match");
  SplittingReport r;
  std::vector<Expr> residual;
  for (int j = 0; j < f.target.dim; ++j)
    residual.push_back(f.components[static_cast<std::size_t>(j)].substitute(s.components) - Expr::coord(j + 1));
  const auto grid = base.grid(tol.grid, true);
  const ZeroVerdict v = zero_test(residual, grid, tol.zero);
  if (!v.zero) throw GeometryError("s is not a section of f (max |f(s(y)) - y| = " + std::to_string(v.max_abs) + ")");
  r.section_method = v.method;

  ExprProgram s_values(s.components);
  ExprProgram ds(b_differential_entries(s));
  ExprProgram df(b_differential_entries(f));
  const int nx = f.source.dim, ny = f.target.dim;
  r.split = true;
  r.min_rank = nx;
  r.min_singular_value = HUGE_VAL;
  for (const auto& y : grid) {
    const std::vector<double> x = s_values.evaluate(y);
    const std::vector<double> dfv = df.evaluate(x);
    const std::vector<double> dsv = ds.evaluate(y);
    Eigen::MatrixXd mf = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(dfv.data(), ny, nx);
    Eigen::MatrixXd ms = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(dsv.data(), nx, ny);
    const Eigen::MatrixXd k = kernel_basis(mf);
    Eigen::MatrixXd joint(nx, k.cols() + ms.cols());
    joint << k, ms;
    const int rank = numerical_rank(joint);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(joint);
    r.min_singular_value = std::min(r.min_singular_value, svd.singularValues().size() < nx ? 0.0 : svd.singularValues()(nx - 1));
    r.min_rank = std::min(r.min_rank, rank);
    if (rank != nx || joint.cols() != nx) r.split = false;
    ++r.points;
  }
  return r;
}

}  // namespace logsym
