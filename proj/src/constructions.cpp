#include "logsym/constructions.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

#include "logsym/taming.hpp"

namespace logsym {

namespace {

constexpr double kE2 = 7.38905609893065022723;

std::string vec_str(std::span<const double> p) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < p.size(); ++i) os << (i ? ", " : "") << p[i];
  os << ")";
  return os.str();
}

Eigen::MatrixXd sym(const Eigen::MatrixXd& a) { return 0.5 * (a + a.transpose()); }

double min_eigenvalue(const Eigen::MatrixXd& s) {
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(s, Eigen::EigenvaluesOnly).eigenvalues()(0);
}

/// Largest dyadic number with 12 significant bits not above t (t > 0).
Rational dyadic_floor(double t) {
  int e = 0;
  std::frexp(t, &e);
  const double scaled = std::floor(std::ldexp(t, 12 - e));
  return rational_from_double(std::ldexp(scaled, e - 12));
}

/// Smallest multiple of 1/256 not below v.
Rational ceil_256(double v) { return Rational(static_cast<long>(std::ceil(v * 256.0)), 256); }

ZeroVerdict closedness(const BForm& omega, const std::vector<std::vector<double>>& grid, double tol) {
  if (omega.degree() == omega.dim()) return ZeroVerdict{true, "exact", 0.0, 0, 0};
  const BForm d = b_d(omega);
  if (d.is_zero()) return ZeroVerdict{true, "exact", 0.0, 0, 0};
  return zero_test(d.coefficient_list(), grid, tol);
}

/// Copy of a form without λ slot onto another frame of the same dimension.
BForm rehome(const BForm& a, const Frame& frame) {
  BForm out(frame, a.degree());
  for (const auto& [m, c] : a.coefficients()) {
    if (m & 1u) throw std::invalid_argument("form has a component along the first coframe slot");
    out.add(m, c);
  }
  return out;
}

std::string mask_str(SlotMask m) {
  std::string s = "e{";
  bool first = true;
  for (int k : slots_of(m)) {
    s += (first ? "" : ",") + std::to_string(k + 1);
    first = false;
  }
  return s + "}";
}

/// Pfaffian of the principal submatrix on the given indices.
double sub_pfaffian(const Eigen::MatrixXd& a, const std::vector<int>& idx) {
  const int m = static_cast<int>(idx.size());
  Eigen::MatrixXd s(m, m);
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < m; ++c) s(r, c) = a(idx[static_cast<std::size_t>(r)], idx[static_cast<std::size_t>(c)]);
  return pfaffian(s);
}

/// min over points of max_k |Pf(S without slot k)|, with S the matrix on slots 1..dim−1: the size
/// of σ^{n−1} for the restriction σ of the form to x1 = const. Equal to 1 in dimension 2.
double restricted_power_margin(const FormSampler& sampler, const std::vector<std::vector<double>>& points, int dim) {
  if (dim == 2) return 1.0;
  double margin = HUGE_VAL;
  for (const auto& p : points) {
    const Eigen::MatrixXd a = sampler(p);
    double best = 0.0;
    for (int skip = 1; skip < dim; ++skip) {
      std::vector<int> idx;
      for (int k = 1; k < dim; ++k)
        if (k != skip) idx.push_back(k);
      best = std::max(best, std::fabs(sub_pfaffian(a, idx)));
    }
    margin = std::min(margin, best);
  }
  return margin;
}

std::vector<double> centre_with_x1(const Chart& chart, double x1) {
  std::vector<double> p(static_cast<std::size_t>(chart.dim()));
  p[0] = x1;
  for (int i = 1; i < chart.dim(); ++i) {
    const Interval& iv = chart.box()[static_cast<std::size_t>(i)];
    p[static_cast<std::size_t>(i)] = 0.5 * (iv.lo + iv.hi);
  }
  return p;
}

}  // namespace

AcsField constant_acs(Eigen::MatrixXd j) {
  return [j = std::move(j)](std::span<const double>) { return j; };
}

AcsField acs_from_exprs(const std::vector<std::vector<Expr>>& entries) {
  const std::size_t n = entries.size();
  std::vector<Expr> flat;
  for (const auto& row : entries) {
    if (row.size() != n) throw std::invalid_argument("almost complex structure must be a square matrix");
    flat.insert(flat.end(), row.begin(), row.end());
  }
  auto program = std::make_shared<ExprProgram>(flat);
  return [program, n](std::span<const double> p) {
    const std::vector<double> v = program->evaluate(p);
    Eigen::MatrixXd j(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < n; ++c) j(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v[r * n + c];
    return j;
  };
}

FormSampler::FormSampler(const BForm& omega) : dim_(omega.dim()) {
  if (omega.degree() != 2) throw std::invalid_argument("FormSampler needs a two-form");
  std::vector<Expr> coefs;
  for (const auto& [m, c] : omega.coefficients()) {
    const std::vector<int> s = slots_of(m);
    slots_.emplace_back(s[0], s[1]);
    coefs.push_back(c);
  }
  program_ = ExprProgram(coefs);
}

Eigen::MatrixXd FormSampler::operator()(std::span<const double> p) const {
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(dim_, dim_);
  if (slots_.empty()) return w;
  const std::vector<double> v = program_.evaluate(p);
  for (std::size_t k = 0; k < slots_.size(); ++k) {
    w(slots_[k].first, slots_[k].second) = v[k];
    w(slots_[k].second, slots_[k].first) = -v[k];
  }
  return w;
}

TamingSearch find_taming_t(const BForm& fstar_omega, const BForm& eta, const AcsField& j, const Chart& chart,
                           const Tolerances& tol, double t_max) {
  if (fstar_omega.degree() != 2 || eta.degree() != 2) throw std::invalid_argument("find_taming_t needs two-forms");
  if (!(fstar_omega.frame() == chart.frame()) || !(eta.frame() == chart.frame()))
    throw std::invalid_argument("forms do not live on the chart's frame");
  if (!(t_max > 0.0)) throw std::invalid_argument("t_max must be positive");
  const int n = chart.dim();
  FormSampler a_of(fstar_omega), e_of(eta);
  const auto grid = chart.grid(tol.grid, true);
  std::mt19937_64 rng(tol.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<Eigen::MatrixXd> s0(grid.size()), s1(grid.size());
  std::vector<double> as, es;
  as.reserve(grid.size() * tol.sphere_samples);
  es.reserve(grid.size() * tol.sphere_samples);
  double t_star = HUGE_VAL;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto& p = grid[i];
    const Eigen::MatrixXd jp = j(p);
    if (jp.rows() != n || jp.cols() != n) throw std::invalid_argument("almost complex structure has the wrong size");
    s0[i] = sym(a_of(p) * jp);
    s1[i] = sym(e_of(p) * jp);
    const double scale = std::max(1.0, s0[i].norm());
    for (std::size_t k = 0; k < tol.sphere_samples; ++k) {
      Eigen::VectorXd v(n);
      for (int c = 0; c < n; ++c) v(c) = gauss(rng);
      v.normalize();
      const double a = v.dot(s0[i] * v);
      const double e = v.dot(s1[i] * v);
      const std::vector<double> dir(v.data(), v.data() + n);
      if (a < -1e-12 * scale)
        throw ConstructionError("pulled-back form does not tame J at " + vec_str(p) + " along " + vec_str(dir) +
                                    " (value " + std::to_string(a) + ")",
                                p, dir);
      if (a <= 1e-14 * scale && e <= 0.0)
        throw ConstructionError("no positive t: both terms are nonpositive at " + vec_str(p) + " along " + vec_str(dir),
                                p, dir);
      if (e < 0.0) t_star = std::min(t_star, a / -e);
      as.push_back(a);
      es.push_back(e);
    }
  }

  TamingSearch out{std::min(t_max, 0.5 * t_star), Certificate("find_taming_t")};
  int halvings = 0;
  double eig = -HUGE_VAL;
  std::vector<double> worst;
  for (; halvings <= 60; ++halvings) {
    eig = HUGE_VAL;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double m = min_eigenvalue(s0[i] + out.t * s1[i]);
      if (m < eig) {
        eig = m;
        worst = grid[i];
      }
    }
    if (eig > 0.0) break;
    out.t *= 0.5;
  }
  double sampled = HUGE_VAL;
  for (std::size_t k = 0; k < as.size(); ++k) sampled = std::min(sampled, as[k] + out.t * es[k]);

  Certificate& cert = out.certificate;
  cert.parameters()["t_max"] = t_max;
  cert.parameters()["t_sampled_threshold"] = std::isfinite(t_star) ? nlohmann::json(t_star) : nlohmann::json("inf");
  cert.parameters()["t"] = out.t;
  cert.parameters()["eigenvalue_halvings"] = halvings;
  cert.parameters()["sphere_samples"] = tol.sphere_samples;
  cert.parameters()["seed"] = tol.seed;
  cert.parameters()["metric"] = "euclidean in the b-frame";
  cert.grid() = grid_spec("tensor+z", per_axis_count(tol.grid, n), grid.size());
  cert.require_at_least("min_sampled_taming", sampled, tol.margin);
  cert.require_at_least("min_pointwise_eigenvalue", eig, tol.margin);
  if (!(eig > 0.0)) cert.note("pointwise taming fails near " + vec_str(worst));
  return out;
}

ThurstonResult thurston_assemble(const ThurstonInput& in, const Tolerances& tol) {
  const BMapModel& f = in.f;
  if (!(f.source == in.total.frame()) || !(f.target == in.base.frame()))
    throw std::invalid_argument("map frames do not match the charts");
  if (!(in.omega_base.frame() == in.base.frame()) || in.omega_base.degree() != 2)
    throw std::invalid_argument("base form must be a two-form on the base chart");
  if (in.cover.empty()) throw std::invalid_argument("cover is empty");
  const Frame ord = Frame::ordinary(in.total.dim());
  if (!(in.reference.frame() == ord) || in.reference.degree() != 2)
    throw std::invalid_argument("reference form must be an ordinary two-form on the total space");
  for (const auto& d : in.cover)
    if (!(d.eta.frame() == ord) || d.eta.degree() != 2 || !(d.alpha.frame() == ord) || d.alpha.degree() != 1)
      throw std::invalid_argument("cover element '" + d.name + "' needs an ordinary two-form and one-form");

  ThurstonResult out{BForm(in.total.frame(), 2), BForm(ord, 2), Rational(0), Certificate("thurston")};
  Certificate& cert = out.certificate;
  const Certificate bmap = validate_bmap(f, in.total, tol);
  cert.absorb("bmap", bmap);
  if (!bmap.pass()) throw ConstructionError("f is not a b-map: " + bmap.failures().front());

  // Cover data.
  const auto base_grid = in.base.grid(tol.grid, true);
  const auto total_grid = in.total.grid(tol.grid, true);
  Expr total_weight;
  for (const auto& d : in.cover) total_weight += d.weight;
  const ZeroVerdict pu = zero_test(total_weight - Expr(1), base_grid, tol.zero);
  cert.require("partition_of_unity", pu.zero, pu.method);
  std::vector<Expr> weights;
  for (const auto& d : in.cover) weights.push_back(d.weight);
  ExprProgram weight_prog(weights);
  double min_weight = HUGE_VAL;
  std::vector<double> outside(in.cover.size(), 0.0);
  for (const auto& y : base_grid) {
    const std::vector<double> w = weight_prog.evaluate(y);
    for (std::size_t i = 0; i < w.size(); ++i) {
      min_weight = std::min(min_weight, w[i]);
      const auto& box = in.cover[i].box;
      bool inside = box.empty();
      if (!inside) {
        inside = true;
        for (std::size_t k = 0; k < box.size() && k < y.size(); ++k) inside = inside && y[k] >= box[k].lo && y[k] <= box[k].hi;
      }
      if (!inside) outside[i] = std::max(outside[i], std::fabs(w[i]));
    }
  }
  cert.require_at_least("min_weight", min_weight, -tol.zero);
  for (std::size_t i = 0; i < in.cover.size(); ++i)
    if (!in.cover[i].box.empty()) cert.require_at_most("weight_outside_box." + in.cover[i].name, outside[i], tol.zero);

  const auto closed_ref = closedness(in.reference, total_grid, tol.zero);
  cert.require("reference_closed", closed_ref.zero, closed_ref.method);
  for (const auto& d : in.cover) {
    const auto closed = closedness(d.eta, total_grid, tol.zero);
    cert.require("fiber_form_closed." + d.name, closed.zero, closed.method);
    const BForm gap = d.eta - in.reference - b_d(d.alpha);
    const ZeroVerdict prim = gap.is_zero() ? ZeroVerdict{true, "exact", 0.0, 0, 0}
                                           : zero_test(gap.coefficient_list(), total_grid, tol.zero);
    cert.require("primitive." + d.name, prim.zero, prim.method);
  }

  // Taming preconditions at every grid point of the total space.
  ExprProgram f_prog(f.components);
  ExprProgram df_prog(b_differential_entries(f));
  FormSampler base_form(in.omega_base);
  std::vector<FormSampler> fiber_forms;
  std::vector<Expr> composed;
  for (const auto& d : in.cover) {
    composed.push_back(d.weight.substitute(f.components));
    fiber_forms.emplace_back(to_b_frame(d.eta, in.total.frame()));
  }
  ExprProgram composed_prog(composed);
  const int n = in.total.dim();
  const int m = in.base.dim();
  double base_margin = HUGE_VAL;
  std::vector<double> fiber_margin(in.cover.size(), HUGE_VAL);
  for (const auto& p : total_grid) {
    const std::vector<double> y = f_prog.evaluate(p);
    const std::vector<double> dfv = df_prog.evaluate(p);
    Eigen::MatrixXd t(m, n);
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < n; ++b) t(a, b) = dfv[static_cast<std::size_t>(a * n + b)];
    const Eigen::MatrixXd jp = in.j(p);
    const TamingReport r = is_tame(base_form(y), t, jp);
    if (!r.tame)
      throw ConstructionError("J is not (omega_Y, f)-tame at " + vec_str(p) + ": " + r.reason, p);
    base_margin = std::min(base_margin, r.margin);
    const Eigen::MatrixXd k = kernel_basis(t);
    if (k.cols() == 0) continue;
    const Eigen::MatrixXd jk = k.transpose() * jp * k;
    const std::vector<double> w = composed_prog.evaluate(p);
    for (std::size_t i = 0; i < in.cover.size(); ++i) {
      if (!(w[i] > tol.zero)) continue;
      const TamingReport fr = is_tame(fiber_forms[i](p), k, jk);
      if (!fr.tame)
        throw ConstructionError("fiber form '" + in.cover[i].name + "' does not tame J on ker b df at " + vec_str(p) +
                                    (fr.reason.empty() ? "" : ": " + fr.reason),
                                p);
      fiber_margin[i] = std::min(fiber_margin[i], fr.margin);
    }
  }
  cert.require_at_least("min_base_taming", base_margin, tol.margin);
  for (std::size_t i = 0; i < in.cover.size(); ++i)
    if (std::isfinite(fiber_margin[i])) cert.require_at_least("min_fiber_taming." + in.cover[i].name, fiber_margin[i], tol.margin);

  // η = ξ + d(Σ (φᵢ∘f) αᵢ)
  BForm glued(ord, 1);
  for (std::size_t i = 0; i < in.cover.size(); ++i) glued = glued + composed[i] * in.cover[i].alpha;
  out.eta = in.reference + b_d(glued);
  const BForm eta_b = to_b_frame(out.eta, in.total.frame());
  const BForm pulled = pullback(f, in.omega_base);

  TamingSearch search = find_taming_t(pulled, eta_b, in.j, in.total, tol, in.t_max);
  cert.absorb("search", search.certificate);
  if (!(search.t > 0.0)) throw ConstructionError("no positive t found at grid resolution");
  out.t = dyadic_floor(search.t);
  out.omega = pulled + Expr(out.t) * eta_b;

  const ZeroVerdict closed = closedness(out.omega, total_grid, tol.zero);
  cert.require("closed", closed.zero, closed.method);
  FormSampler result(out.omega);
  double min_pf = HUGE_VAL;
  for (const auto& p : total_grid) min_pf = std::min(min_pf, std::fabs(pfaffian(result(p))));
  cert.require_at_least("min_abs_pfaffian", min_pf, tol.nondegeneracy);
  cert.parameters()["t"] = to_string(out.t);
  cert.parameters()["t_value"] = to_double(out.t);
  cert.parameters()["cover"] = nlohmann::json::array();
  for (const auto& d : in.cover) cert.parameters()["cover"].push_back(d.name);
  cert.parameters()["total"] = in.total.describe();
  cert.parameters()["base"] = in.base.describe();
  cert.grid() = grid_spec("tensor+z", per_axis_count(tol.grid, n), total_grid.size());
  return out;
}

Eigen::MatrixXd complex_structure_matrix(int dim) {
  if (dim % 2 != 0) throw std::invalid_argument("complex structure needs an even dimension");
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(dim, dim);
  for (int k = 0; k < dim; k += 2) {
    j(k + 1, k) = 1.0;
    j(k, k + 1) = -1.0;
  }
  return j;
}

BForm homotopy_primitive(const BForm& closed) {
  if (!closed.frame().is_ordinary()) throw std::invalid_argument("homotopy_primitive needs an ordinary form");
  const int k = closed.degree();
  if (k < 1) throw std::invalid_argument("homotopy_primitive needs a form of positive degree");
  BForm out(closed.frame(), k - 1);
  for (const auto& [mask, coef] : closed.coefficients()) {
    // ∫₀¹ t^{k−1} a(tx) dt, term by term.
    Expr averaged;
    for (const auto& [mono, c] : coef.terms()) {
      int degree = 0;
      Expr term{c};
      for (const auto& [atom, e] : mono) {
        if (atom->kind == AtomKind::Coord)
          degree += e;
        else if (atom->kind != AtomKind::Pi)
          throw std::invalid_argument("homotopy_primitive needs polynomial coefficients");
        term *= Expr::from_atom(atom, e);
      }
      averaged += Expr(Rational(1, k + degree)) * term;
    }
    const std::vector<int> slots = slots_of(mask);
    for (std::size_t pos = 0; pos < slots.size(); ++pos) {
      std::vector<int> rest;
      for (std::size_t q = 0; q < slots.size(); ++q)
        if (q != pos) rest.push_back(slots[q]);
      const Expr sign = pos % 2 == 0 ? Expr(1) : Expr(-1);
      const Expr c = sign * Expr::coord(slots[pos] + 1) * averaged;
      if (rest.empty())
        out = out + BForm::scalar(closed.frame(), c);
      else
        out = out + BForm::term(closed.frame(), rest, c);
    }
  }
  return out;
}

LefschetzResult lefschetz_local_eta(const LefschetzModel& model, const Tolerances& tol) {
  if (!(model.r0 > 0.0) || !(model.r0 < model.r1)) throw std::invalid_argument("ball radii must satisfy 0 < r0 < r1");
  const int dim = 4;
  const Frame frame = Frame::ordinary(dim);
  const BForm sigma = BForm::term(frame, {0, 1}, Expr(1)) + BForm::term(frame, {2, 3}, Expr(1));
  const BForm sigma_y = model.fiber_form.value_or(sigma);
  if (!(sigma_y.frame() == frame) || sigma_y.degree() != 2)
    throw std::invalid_argument("fiber form must be an ordinary two-form on C^2");
  const BForm beta = model.fiber_primitive ? *model.fiber_primitive : homotopy_primitive(sigma_y);
  const BForm alpha = model.primitive ? *model.primitive : homotopy_primitive(sigma);
  if (!(beta.frame() == frame) || beta.degree() != 1 || !(alpha.frame() == frame) || alpha.degree() != 1)
    throw std::invalid_argument("primitives must be ordinary one-forms on C^2");

  const double radius = 1.2 * model.r1;
  const Chart ball(dim, std::vector<Interval>(dim, Interval{-radius, radius}), {}, std::nullopt);
  const auto grid = ball.grid(std::min<std::size_t>(tol.grid, 2401), false);

  LefschetzResult out{BForm(frame, 2), sigma, Profile::radial_bump("lefschetz_bump", model.r0, model.r1),
                      Certificate("lefschetz_local")};
  Certificate& cert = out.certificate;
  const ZeroVerdict sy_closed = closedness(sigma_y, grid, tol.zero);
  if (!sy_closed.zero) throw GeometryError("fiber form is not closed");
  auto check_primitive = [&](const BForm& p, const BForm& target, const std::string& name) {
    const BForm gap = b_d(p) - target;
    const ZeroVerdict v = gap.is_zero() ? ZeroVerdict{true, "exact", 0.0, 0, 0} : zero_test(gap.coefficient_list(), grid, tol.zero);
    cert.require(name, v.zero, v.method);
  };
  check_primitive(beta, sigma_y, "fiber_primitive");
  check_primitive(alpha, sigma, "primitive");

  Expr q;
  for (int i = 1; i <= dim; ++i) q += Expr::coord(i) * Expr::coord(i);
  const Expr bump = profile_call(out.bump, 0, q);
  out.eta = b_d(bump * beta + (Expr(1) - bump) * alpha);

  cert.require("closed", b_d(out.eta).is_zero(), "exact");
  const BForm inner = out.eta.map([&](const Expr& c) { return replace_profile(c, out.bump->name(), Rational(0)); });
  const BForm outer = out.eta.map([&](const Expr& c) { return replace_profile(c, out.bump->name(), Rational(1)); });
  cert.require("equals_sigma_inside_r0", inner == sigma, "exact");
  cert.require("equals_fiber_form_outside_r1", outer == sigma_y, "exact");

  // Taming on ker df at sampled regular points: w = (−z2, z1), Jw = i·w.
  const Eigen::MatrixXd j = complex_structure_matrix(dim);
  FormSampler eta_at(out.eta);
  std::mt19937_64 rng(tol.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  double margin_in = HUGE_VAL, margin_mid = HUGE_VAL, margin_out = HUGE_VAL;
  std::size_t regular = 0;
  std::vector<double> worst;
  double worst_value = HUGE_VAL;
  for (std::size_t s = 0; s < model.fiber_samples; ++s) {
    Eigen::Vector4d dir;
    for (int c = 0; c < dim; ++c) dir(c) = gauss(rng);
    dir.normalize();
    const double r = radius * (0.001 + 0.999 * uniform(rng));
    const Eigen::Vector4d p = r * dir;
    const std::vector<double> pt(p.data(), p.data() + dim);
    // f = z1² + z2² with z1 = x1 + i x2, z2 = x3 + i x4
    const double re = p(0) * p(0) - p(1) * p(1) + p(2) * p(2) - p(3) * p(3);
    const double im = 2.0 * (p(0) * p(1) + p(2) * p(3));
    if (std::hypot(re, im) > 1e-12) ++regular;
    const Eigen::Vector4d w(-p(2), -p(3), p(0), p(1));
    const double value = w.dot(eta_at(pt) * (j * w)) / w.squaredNorm();
    double& bucket = r <= model.r0 ? margin_in : (r >= model.r1 ? margin_out : margin_mid);
    bucket = std::min(bucket, value);
    if (value < worst_value) {
      worst_value = value;
      worst = pt;
    }
  }
  cert.parameters()["r0"] = model.r0;
  cert.parameters()["r1"] = model.r1;
  cert.parameters()["sample_radius"] = radius;
  cert.parameters()["bump"] = out.bump->describe();
  cert.parameters()["fiber_form"] = sigma_y.str();
  cert.parameters()["fiber_primitive"] = beta.str();
  cert.parameters()["primitive"] = alpha.str();
  cert.parameters()["regular_samples"] = regular;
  cert.grid() = grid_spec("ball-random", 0, model.fiber_samples);
  cert.require_at_least("min_fiber_taming", worst_value, tol.margin);
  if (std::isfinite(margin_in)) cert.require_at_least("min_fiber_taming.inner", margin_in, tol.margin);
  if (std::isfinite(margin_mid)) cert.require_at_least("min_fiber_taming.transition", margin_mid, tol.margin);
  if (std::isfinite(margin_out)) cert.require_at_least("min_fiber_taming.outer", margin_out, tol.margin);
  if (!(worst_value >= tol.margin)) cert.note("taming fails near " + vec_str(worst));
  return out;
}

double default_collar_width(const Chart& chart) {
  ExprProgram h({chart.frame().h});
  double top = 0.0;
  for (double x : chart.axis(0, 4097)) top = std::max(top, std::fabs(h.evaluate(centre_with_x1(chart, x))[0]));
  return std::min(0.5 * top, 1.0);
}

FoldResult log_to_folded(const BForm& omega_b, const Chart& chart, const Tolerances& tol, const FoldOptions& options) {
  if (!chart.has_z()) throw std::invalid_argument("log_to_folded needs a chart with a singular locus");
  if (!(omega_b.frame() == chart.frame()) || omega_b.degree() != 2)
    throw std::invalid_argument("log_to_folded needs a two-form on the chart's frame");
  const int dim = chart.dim();
  const auto collar = cosymplectic_extract(omega_b, chart, tol);
  for (const auto& [m, c] : omega_b.coefficients())
    if (c.depends_on(1))
      throw GeometryError("collar normal form required: coefficient of " + mask_str(m) + " depends on x1");

  FoldResult out{BForm(Frame::ordinary(dim), 2), 0.0, 0.0, options.profile, Certificate("log_to_folded")};
  if (!out.profile) out.profile = Profile::log_fold_interp("log_fold");
  if (out.profile->kind() != ProfileKind::LogFoldInterp) throw std::invalid_argument("log_to_folded needs a log_fold_interp profile");
  const ProfileValidation pv = validate_profile(*out.profile, 4096);
  if (!pv.ok) throw ConstructionError("profile '" + out.profile->name() + "' is invalid: " + pv.problems.front());

  out.collar_width = options.collar_width.value_or(default_collar_width(chart));
  if (!(out.collar_width > 0.0)) throw std::invalid_argument("collar width must be positive");
  const Rational c = ceil_256((kE2 + 1.0) / out.collar_width);
  out.scale = to_double(c);
  const Expr& h = chart.frame().h;
  const Expr g = Expr(c) * profile_call(out.profile, 1, Expr(c) * h);
  for (const auto& [m, coef] : omega_b.coefficients()) out.omega.add(m, (m & 1u) ? g * coef : coef);

  Certificate& cert = out.certificate;
  const auto grid = chart.grid(tol.grid, true);
  const ZeroVerdict closed = closedness(out.omega, grid, tol.zero);
  cert.require("closed", closed.zero, closed.method);

  const TransversalityReport fold = transversality(form_pfaffian(out.omega), chart, tol);
  cert.require("fold_transversality", fold.pass, fold.reason);
  cert.require_at_most("fold.max_abs_top_power_on_z", fold.max_abs_h, tol.zero);
  cert.require_at_least("fold.min_abs_d1_top_power_on_z", fold.min_abs_dh, tol.derivative);
  const auto zgrid = chart.z_grid(per_axis_count(tol.grid, std::max(dim - 1, 1)));
  cert.require_at_least("restricted_power_margin", restricted_power_margin(FormSampler(out.omega), zgrid, dim), tol.margin);

  // Where |c·h| ≥ e² the profile derivative is 1/s, so the output is the anchor-inverse.
  const BForm logged = out.omega.map([&](const Expr& e) {
    return rewrite_profile(e, out.profile->name(), [](int order, const Expr& arg) {
      if (order != 1) throw std::logic_error("unexpected profile order");
      return arg.inverse();
    });
  });
  const BForm anchor_inverse = to_ordinary(omega_b);
  cert.require("outside_collar_exact", logged == anchor_inverse, "profile derivative replaced by 1/s");
  const double reach = kE2 / out.scale;
  ExprProgram h_prog({h});
  FormSampler folded(out.omega), original(anchor_inverse);
  double gap = 0.0;
  std::size_t outside = 0;
  for (const auto& p : grid) {
    if (std::fabs(h_prog.evaluate(p)[0]) < reach) continue;
    ++outside;
    gap = std::max(gap, (folded(p) - original(p)).cwiseAbs().maxCoeff());
  }
  cert.require_at_most("outside_collar_gap", gap, 1e-9);

  cert.parameters()["collar_width"] = out.collar_width;
  cert.parameters()["scale"] = to_string(c);
  cert.parameters()["collar_reach_abs_h"] = reach;
  cert.parameters()["outside_samples"] = outside;
  cert.parameters()["profile"] = out.profile->describe();
  cert.parameters()["fold"] = fold.to_json(chart, tol);
  cert.parameters()["components"] = nlohmann::json::array();
  for (const auto& d : collar)
    cert.parameters()["components"].push_back({{"x1", d.z}, {"theta", d.theta.str()}, {"sigma", d.sigma.str()}});
  cert.grid() = grid_spec("tensor+z", per_axis_count(tol.grid, dim), grid.size());
  return out;
}

UnfoldResult folded_to_log(const BForm& omega, const BForm& theta, const Chart& chart, const Tolerances& tol,
                           const UnfoldOptions& options) {
  if (!chart.has_z()) throw std::invalid_argument("folded_to_log needs a chart whose frame defines Z");
  const int dim = chart.dim();
  const Frame ord = Frame::ordinary(dim);
  if (!(omega.frame() == ord) || omega.degree() != 2) throw std::invalid_argument("folded_to_log needs an ordinary two-form");
  if (theta.dim() != dim || theta.degree() != 1) throw std::invalid_argument("theta must be a one-form of the chart's dimension");
  const BForm theta_o = rehome(theta, ord);
  for (const auto& [m, c] : theta_o.coefficients())
    if (c.depends_on(1)) throw GeometryError("theta must not depend on x1 (coefficient of " + mask_str(m) + ")");

  UnfoldResult out{BForm(chart.frame(), 2), Rational(0), nullptr, Certificate("folded_to_log"), {}};
  Certificate& cert = out.certificate;
  const auto grid = chart.grid(tol.grid, true);
  const auto zgrid = chart.z_grid(per_axis_count(tol.grid, std::max(dim - 1, 1)));

  if (!closedness(omega, grid, tol.zero).zero) throw GeometryError("input form is not closed");
  const TransversalityReport fold = transversality(form_pfaffian(omega), chart, tol);
  if (!fold.pass) throw GeometryError("input is not folded along Z: " + fold.reason);
  FormSampler folded(omega);
  const double power_margin = restricted_power_margin(folded, zgrid, dim);
  if (!(power_margin >= tol.margin)) throw GeometryError("input is not folded: omega^(n-1) vanishes on Z");
  if (!closedness(theta_o, grid, tol.zero).zero) throw GeometryError("theta is not closed");

  const BForm base = to_b_frame(omega, chart.frame());
  const BForm theta_b = rehome(theta_o, chart.frame());
  const BForm lambda_theta = wedge(BForm::slot(chart.frame(), 0), theta_b);
  FormSampler base_at(base), lt_at(lambda_theta);
  // θ∧ω^{n−1}|_Z is the Pfaffian of λ∧θ + ω at Z in the b-frame.
  double theta_margin = HUGE_VAL;
  for (const auto& p : zgrid) theta_margin = std::min(theta_margin, std::fabs(pfaffian(base_at(p) + lt_at(p))));
  if (!(theta_margin >= tol.margin))
    throw GeometryError("theta missing or degenerate: theta ^ omega^(n-1) on Z has margin " + std::to_string(theta_margin));

  const double width = options.collar_width.value_or(default_collar_width(chart));
  const double a = options.r0 * width, b = options.r1 * width;
  if (!(width > 0.0) || !(a > 0.0) || !(a < b)) throw std::invalid_argument("collar radii must satisfy 0 < r0 < r1");
  if (!(b < 1.0)) throw std::invalid_argument("collar cutoff must stay below |h| = 1");
  out.weight = Profile::log_cutoff_weight("unfold_weight", a, b);
  const Expr& h = chart.frame().h;
  const BForm term = profile_call(out.weight, 0, h) * lambda_theta;
  FormSampler term_at(term);
  ExprProgram h_prog({h});

  // Orientation: Pf(base + t·term) = P0 + t·P1 (term has rank 2); pick the sign of t that agrees
  // with P0 at a point near the first component where the weight equals 1.
  const double z = chart.z_components().front().x1;
  const Interval& axis = chart.box()[0];
  double delta = 0.125 * (axis.hi - axis.lo);
  std::vector<double> probe;
  for (int k = 0; k < 80; ++k, delta *= 0.5) {
    for (double sgn : {1.0, -1.0}) {
      const double x1 = z + sgn * delta;
      if (!chart.periodic()[0] && (x1 < axis.lo || x1 > axis.hi)) continue;
      std::vector<double> p = centre_with_x1(chart, x1);
      const double hv = std::fabs(h_prog.evaluate(p)[0]);
      if (hv > 0.0 && hv <= a) {
        probe = p;
        break;
      }
    }
    if (!probe.empty()) break;
  }
  if (probe.empty()) throw ConstructionError("no orientation probe point near Z");
  const double p0 = pfaffian(base_at(probe));
  const double p1 = pfaffian(base_at(probe) + term_at(probe)) - p0;
  if (p0 == 0.0 || p1 == 0.0) throw ConstructionError("orientation probe is degenerate", probe);
  const int sign = p0 * p1 > 0.0 ? 1 : -1;

  std::vector<double> q0(grid.size()), q1(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Eigen::MatrixXd w0 = base_at(grid[i]);
    q0[i] = pfaffian(w0);
    q1[i] = pfaffian(w0 + term_at(grid[i])) - q0[i];
  }
  Rational t = rational_from_double(options.t_start) * sign;
  bool found = false;
  double min_pf = 0.0;
  std::vector<double> worst;
  int halvings = 0;
  for (; halvings <= options.max_halvings; ++halvings) {
    const double td = to_double(t);
    min_pf = HUGE_VAL;
    double orientation = 0.0;
    bool consistent = true;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double v = q0[i] + td * q1[i];
      if (std::fabs(v) < min_pf) {
        min_pf = std::fabs(v);
        worst = grid[i];
      }
      if (orientation == 0.0) orientation = v;
      if (v * orientation < 0.0) consistent = false;
    }
    if (consistent && min_pf >= tol.nondegeneracy) {
      found = true;
      break;
    }
    t /= 2;
  }
  if (!found) throw ConstructionError("no valid t at grid resolution", worst);
  out.t = t;
  out.omega = base + Expr(t) * term;

  const ZeroVerdict closed = closedness(out.omega, grid, tol.zero);
  cert.require("closed", closed.zero, closed.method);
  cert.require_at_least("min_abs_b_pfaffian", min_pf, tol.nondegeneracy);
  const BForm outside = out.omega.map([&](const Expr& e) { return replace_profile(e, out.weight->name(), Rational(0)); });
  cert.require("outside_collar_exact", outside == base, "weight vanishes beyond r1");
  const BBivector pi = dual_bivector(out.omega, chart, tol);
  out.log_check = log_symplectic_check(pi.anchor(), chart, tol);
  cert.require("log_symplectic", out.log_check.pass && out.log_check.poisson, out.log_check.reason);
  cert.require("same_z", out.log_check.extra_zeros.empty(), "no zeros of the top power off Z");

  cert.parameters()["t"] = to_string(out.t);
  cert.parameters()["t_value"] = to_double(out.t);
  cert.parameters()["halvings"] = halvings;
  cert.parameters()["orientation_probe"] = probe;
  cert.parameters()["collar_width"] = width;
  cert.parameters()["cutoff"] = {{"a", a}, {"b", b}};
  cert.parameters()["weight"] = out.weight->describe();
  cert.parameters()["theta_margin"] = theta_margin;
  cert.parameters()["restricted_power_margin"] = power_margin;
  cert.parameters()["log_check"] = out.log_check.to_json(chart, tol);
  cert.grid() = grid_spec("tensor+z", per_axis_count(tol.grid, dim), grid.size());
  return out;
}

}  // namespace logsym
