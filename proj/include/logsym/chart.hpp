#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "logsym/expr.hpp"

namespace logsym {

/// Coordinate frame of a chart: dimension and the defining function h(x1) of the singular locus.
/// The b-coframe is {λ = dx1/h, dx2, ..., dx_dim}. h = x1 is the standard model; h ≡ 1 means no
/// singular locus, and the b-coframe is then the ordinary coframe.
struct Frame {
  int dim = 2;
  Expr h = Expr::coord(1);

  static Frame standard(int dim) { return Frame{dim, Expr::coord(1)}; }
  static Frame ordinary(int dim) { return Frame{dim, Expr(1)}; }
  bool is_ordinary() const { return h == Expr(1); }
  friend bool operator==(const Frame& a, const Frame& b) { return a.dim == b.dim && a.h == b.h; }
};

struct Interval {
  double lo = -1.0;
  double hi = 1.0;
};

/// A zero of the defining function along x1.
struct ZComponent {
  double x1 = 0.0;
  std::optional<Rational> exact;  ///< set when h vanishes exactly (canonical form) at this rational
};

class Chart {
 public:
  Chart() = default;
  /// defining: h(x1); std::nullopt gives a chart without singular locus.
  Chart(int dim, std::vector<Interval> box, std::vector<bool> periodic, std::optional<Expr> defining);

  /// Box [-half_width, half_width]^dim with h = x1.
  static Chart standard(int dim, double half_width = 1.0);
  /// Periodic box [0,1)^dim with h = sin(2π x1)/(2π), Z = {x1 ∈ {0, 1/2}}.
  static Chart torus(int dim);
  /// Periodic box [0,1)^dim without singular locus.
  static Chart torus_plain(int dim);

  int dim() const { return frame_.dim; }
  const Frame& frame() const { return frame_; }
  bool has_z() const { return !frame_.is_ordinary(); }
  const std::vector<Interval>& box() const { return box_; }
  const std::vector<bool>& periodic() const { return periodic_; }
  const std::vector<ZComponent>& z_components() const { return z_; }

  /// Axis samples: n points (endpoints included for closed axes, half-open for periodic ones).
  std::vector<double> axis(int i, std::size_t n) const;
  /// Tensor grid with per-axis count ceil(total^(1/dim)); x1 axis augmented by Z locations if asked.
  std::vector<std::vector<double>> grid(std::size_t total, bool include_z) const;
  std::vector<std::vector<double>> grid_per_axis(std::size_t per_axis, bool include_z) const;
  /// Grid on the singular locus: x1 fixed to each Z component, other axes sampled.
  std::vector<std::vector<double>> z_grid(std::size_t per_axis) const;

  nlohmann::json describe() const;

 private:
  void locate_zeros();

  Frame frame_;
  std::vector<Interval> box_;
  std::vector<bool> periodic_;
  std::vector<ZComponent> z_;
};

/// Zeros of a function of x1 alone on [lo, hi] (half-open when periodic): exact sample hits and
/// refined sign changes.
std::vector<ZComponent> zeros_along_x1(const Expr& f, Interval range, bool periodic, std::size_t samples = 4096);
/// Zeros of a numeric function on [lo, hi]: exact sample hits and refined sign changes, sorted.
std::vector<double> zeros_along_line(const std::function<double(double)>& f, Interval range, bool periodic,
                                     std::size_t samples = 4096);

std::size_t per_axis_count(std::size_t total, int dim);

}  // namespace logsym
