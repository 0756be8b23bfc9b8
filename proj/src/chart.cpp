#include "logsym/chart.hpp"

#include <algorithm>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <stdexcept>

namespace logsym {

namespace {

std::optional<Rational> snap_exact(const Expr& f, double z) {
  for (long q = 1; q <= 64; ++q) {
    const double p = std::round(z * static_cast<double>(q));
    if (std::fabs(p / static_cast<double>(q) - z) > 1e-9) continue;
    Rational r(static_cast<long>(p), q);
    r.canonicalize();
    std::vector<Expr> values = {Expr(r)};
    if (f.substitute(values).is_zero()) return r;
    return std::nullopt;
  }
  return std::nullopt;
}

}  // namespace

std::size_t per_axis_count(std::size_t total, int dim) {
  std::size_t n = static_cast<std::size_t>(std::ceil(std::pow(static_cast<double>(total), 1.0 / dim) - 1e-9));
  return std::max<std::size_t>(n, 2);
}

std::vector<double> zeros_along_line(const std::function<double(double)>& eval, Interval range, bool periodic,
                                     std::size_t samples) {
  std::vector<double> out;
  const std::size_t n = periodic ? samples : samples + 1;
  std::vector<double> ts(n), vs(n);
  for (std::size_t k = 0; k < n; ++k) {
    ts[k] = range.lo + (range.hi - range.lo) * static_cast<double>(k) / static_cast<double>(samples);
    vs[k] = eval(ts[k]);
  }
  auto add = [&](double z) {
    for (double c : out)
      if (std::fabs(c - z) < 1e-9) return;
    out.push_back(z);
  };
  for (std::size_t k = 0; k < n; ++k) {
    if (vs[k] == 0.0) add(ts[k]);
    const std::size_t next = k + 1;
    if (next == n && !periodic) break;
    const double a = ts[k];
    const double b = next < n ? ts[next] : range.hi;
    const double va = vs[k];
    const double vb = next < n ? vs[next] : eval(range.hi);
    if (va != 0.0 && vb != 0.0 && (va < 0) != (vb < 0)) {
      boost::uintmax_t iters = 100;
      auto tol = boost::math::tools::eps_tolerance<double>(52);
      auto [lo, hi] = boost::math::tools::toms748_solve(eval, a, b, va, vb, tol, iters);
      double z = 0.5 * (lo + hi);
      if (periodic && z >= range.hi - 1e-12) z = range.lo;
      add(z);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<ZComponent> zeros_along_x1(const Expr& f, Interval range, bool periodic, std::size_t samples) {
  if (f.max_coord() > 1) throw std::invalid_argument("defining function must depend on x1 only");
  auto eval = [&](double t) {
    const double p[1] = {t};
    return f.evaluate(p);
  };
  std::vector<ZComponent> out;
  for (double z : zeros_along_line(eval, range, periodic, samples)) {
    ZComponent c{z, snap_exact(f, z)};
    // Snap near-exact zeros to the rational location when h vanishes there identically.
    if (c.exact) c.x1 = to_double(*c.exact);
    bool dup = false;
    for (const auto& o : out) dup = dup || std::fabs(o.x1 - c.x1) < 1e-9;
    if (!dup) out.push_back(c);
  }
  std::sort(out.begin(), out.end(), [](const ZComponent& a, const ZComponent& b) { return a.x1 < b.x1; });
  return out;
}

Chart::Chart(int dim, std::vector<Interval> box, std::vector<bool> periodic, std::optional<Expr> defining)
    : box_(std::move(box)), periodic_(std::move(periodic)) {
  if (dim < 2 || dim % 2 != 0) throw std::invalid_argument("chart dimension must be even and at least 2");
  if (dim > 62) throw std::invalid_argument("chart dimension too large");
  if (box_.size() != static_cast<std::size_t>(dim)) throw std::invalid_argument("chart box has wrong arity");
  if (periodic_.empty()) periodic_.assign(static_cast<std::size_t>(dim), false);
  if (periodic_.size() != static_cast<std::size_t>(dim)) throw std::invalid_argument("periodic flags have wrong arity");
  for (const auto& iv : box_)
    if (!(iv.lo < iv.hi)) throw std::invalid_argument("chart box interval is empty");
  frame_.dim = dim;
  frame_.h = defining ? *defining : Expr(1);
  if (frame_.h.max_coord() > 1) throw std::invalid_argument("defining function must depend on x1 only");
  locate_zeros();
  if (has_z()) {
    if (z_.empty()) throw std::invalid_argument("defining function has no zero in the chart");
    for (const auto& z : z_) {
      const bool interior = periodic_[0] || (z.x1 > box_[0].lo && z.x1 < box_[0].hi);
      if (!interior) throw std::invalid_argument("singular locus must lie in the interior of the chart");
    }
  }
}

void Chart::locate_zeros() {
  z_.clear();
  if (!has_z()) return;
  z_ = zeros_along_x1(frame_.h, box_[0], periodic_[0]);
}

Chart Chart::standard(int dim, double half_width) {
  return Chart(dim, std::vector<Interval>(static_cast<std::size_t>(dim), Interval{-half_width, half_width}), {},
               Expr::coord(1));
}

Chart Chart::torus(int dim) {
  Expr h = sin(2 * Expr::pi() * Expr::coord(1)) / (2 * Expr::pi());
  return Chart(dim, std::vector<Interval>(static_cast<std::size_t>(dim), Interval{0.0, 1.0}),
               std::vector<bool>(static_cast<std::size_t>(dim), true), h);
}

Chart Chart::torus_plain(int dim) {
  return Chart(dim, std::vector<Interval>(static_cast<std::size_t>(dim), Interval{0.0, 1.0}),
               std::vector<bool>(static_cast<std::size_t>(dim), true), std::nullopt);
}

std::vector<double> Chart::axis(int i, std::size_t n) const {
  const Interval& iv = box_[static_cast<std::size_t>(i)];
  std::vector<double> out(n);
  if (periodic_[static_cast<std::size_t>(i)]) {
    for (std::size_t k = 0; k < n; ++k) out[k] = iv.lo + (iv.hi - iv.lo) * static_cast<double>(k) / static_cast<double>(n);
  } else if (n == 1) {
    out[0] = 0.5 * (iv.lo + iv.hi);
  } else {
    for (std::size_t k = 0; k < n; ++k)
      out[k] = iv.lo + (iv.hi - iv.lo) * static_cast<double>(k) / static_cast<double>(n - 1);
  }
  return out;
}

std::vector<std::vector<double>> Chart::grid_per_axis(std::size_t per_axis, bool include_z) const {
  std::vector<std::vector<double>> axes;
  for (int i = 0; i < dim(); ++i) axes.push_back(axis(i, per_axis));
  if (include_z) {
    for (const auto& z : z_) axes[0].push_back(z.x1);
    std::sort(axes[0].begin(), axes[0].end());
    axes[0].erase(std::unique(axes[0].begin(), axes[0].end(), [](double a, double b) { return std::fabs(a - b) < 1e-14; }),
                  axes[0].end());
  }
  std::vector<std::vector<double>> points;
  std::vector<std::size_t> idx(static_cast<std::size_t>(dim()), 0);
  while (true) {
    std::vector<double> p(static_cast<std::size_t>(dim()));
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = axes[i][idx[i]];
    points.push_back(std::move(p));
    std::size_t k = 0;
    while (k < idx.size()) {
      if (++idx[k] < axes[k].size()) break;
      idx[k] = 0;
      ++k;
    }
    if (k == idx.size()) break;
  }
  return points;
}

std::vector<std::vector<double>> Chart::grid(std::size_t total, bool include_z) const {
  return grid_per_axis(per_axis_count(total, dim()), include_z);
}

std::vector<std::vector<double>> Chart::z_grid(std::size_t per_axis) const {
  std::vector<std::vector<double>> out;
  if (z_.empty()) return out;
  std::vector<std::vector<double>> axes;
  for (int i = 1; i < dim(); ++i) axes.push_back(axis(i, per_axis));
  for (const auto& z : z_) {
    std::vector<std::size_t> idx(axes.size(), 0);
    while (true) {
      std::vector<double> p(static_cast<std::size_t>(dim()));
      p[0] = z.x1;
      for (std::size_t i = 0; i < axes.size(); ++i) p[i + 1] = axes[i][idx[i]];
      out.push_back(std::move(p));
      std::size_t k = 0;
      while (k < idx.size()) {
        if (++idx[k] < axes[k].size()) break;
        idx[k] = 0;
        ++k;
      }
      if (k == idx.size()) break;
    }
  }
  return out;
}

nlohmann::json Chart::describe() const {
  nlohmann::json j;
  j["dim"] = dim();
  nlohmann::json box = nlohmann::json::array();
  for (const auto& iv : box_) box.push_back({iv.lo, iv.hi});
  j["box"] = box;
  j["periodic"] = periodic_;
  j["has_z"] = has_z();
  if (has_z()) {
    j["defining"] = frame_.h.str();
    nlohmann::json zs = nlohmann::json::array();
    for (const auto& z : z_) zs.push_back(z.exact ? nlohmann::json(to_string(*z.exact)) : nlohmann::json(z.x1));
    j["z_components_x1"] = zs;
  }
  return j;
}

}  // namespace logsym
