#include "logsym/profile.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <stdexcept>

namespace logsym {

namespace {

constexpr double kE2 = 7.38905609893065022723;  // e^2
constexpr double kInnerWidth = 0.25;             // blend of r² into the middle slope on [1, 1.25]
constexpr double kMeshWidth = 1.0 / 128.0;

// ψ(τ) = exp(-1/τ) for τ > 0. Below 1/700 it underflows, and so do all its derivatives.
Jet psi(const Jet& tau) {
  if (tau.value() <= 1.0 / 700.0) return Jet(tau.order(), 0.0);
  Jet one(tau.order(), 1.0);
  return exp(-(one / tau));
}

Jet constant_jet(std::size_t order, double v) { return Jet(order, v); }

Jet sqrt_jet(const Jet& a) { return exp(0.5 * log(a)); }

Jet flip_odd(Jet j) {
  for (std::size_t k = 1; k <= j.order(); k += 2) j.coef(k) = -j.coef(k);
  return j;
}

/// Composite 20-point Gauss-Legendre on cells of width kMeshWidth.
template <class F>
double integrate(F f, double a, double b) {
  if (b <= a) return 0.0;
  const std::size_t cells = static_cast<std::size_t>(std::ceil((b - a) / kMeshWidth));
  const double w = (b - a) / static_cast<double>(cells);
  double total = 0.0;
  for (std::size_t i = 0; i < cells; ++i) {
    const double lo = a + w * static_cast<double>(i);
    total += boost::math::quadrature::gauss<double, 20>::integrate(f, lo, lo + w);
  }
  return total;
}

}  // namespace

std::string to_string(ProfileKind kind) {
  switch (kind) {
    case ProfileKind::LogFoldInterp: return "log_fold_interp";
    case ProfileKind::RadialBump: return "radial_bump";
    case ProfileKind::Step: return "step";
    case ProfileKind::LogCutoffWeight: return "log_cutoff_weight";
  }
  return "unknown";
}

Jet smooth_step(const Jet& tau) {
  if (tau.value() <= 0.0) return constant_jet(tau.order(), 0.0);
  if (tau.value() >= 1.0) return constant_jet(tau.order(), 1.0);
  Jet a = psi(tau);
  Jet b = psi(1.0 - tau);
  return a / (a + b);
}

double smooth_step(double tau) { return smooth_step(Jet(0, tau)).value(); }

Profile::Profile(std::string name, ProfileKind kind, std::vector<double> params)
    : name_(std::move(name)), kind_(kind), params_(std::move(params)) {
  switch (kind_) {
    case ProfileKind::LogFoldInterp: {
      // Solve for κ so that 1 + ∫_1^{e²} f' = log(e²) = 2.
      auto s1 = [](double r) { return smooth_step((r - 1.0) / kInnerWidth); };
      auto s2 = [](double r) { return smooth_step(r - (kE2 - 1.0)); };
      auto fixed = [&](double r) { return (1.0 - s1(r)) * 2.0 * r + s2(r) / r; };
      auto weight = [&](double r) { return s1(r) * (1.0 - s2(r)); };
      const double b1 = 1.0 + kInnerWidth;
      const double b2 = kE2 - 1.0;
      double fixed_int = integrate(fixed, 1.0, b1) + integrate(fixed, b1, b2) + integrate(fixed, b2, kE2);
      double weight_int = integrate(weight, 1.0, b1) + integrate(weight, b1, b2) + integrate(weight, b2, kE2);
      kappa_ = (1.0 - fixed_int) / weight_int;
      if (!(kappa_ > 0.0)) throw std::logic_error("log_fold_interp blend constant is not positive");
      // Cumulative values of f on a uniform mesh of [1, e²].
      auto fp = [this](double q) { return log_fold_derivative_jet(q, 0).value(); };
      const std::size_t cells = static_cast<std::size_t>(std::ceil((kE2 - 1.0) / kMeshWidth));
      mesh_.assign(cells + 1, 1.0);
      for (std::size_t i = 0; i < cells; ++i) {
        const double a = 1.0 + kMeshWidth * static_cast<double>(i);
        mesh_[i + 1] = mesh_[i] + boost::math::quadrature::gauss<double, 20>::integrate(fp, a, a + kMeshWidth);
      }
      break;
    }
    case ProfileKind::RadialBump:
    case ProfileKind::Step:
    case ProfileKind::LogCutoffWeight:
      if (params_.size() != 2 || !(params_[0] < params_[1]))
        throw std::invalid_argument("profile '" + name_ + "' needs two increasing parameters");
      if (kind_ != ProfileKind::Step && params_[0] <= 0.0)
        throw std::invalid_argument("profile '" + name_ + "' needs a positive inner parameter");
      break;
  }
}

std::shared_ptr<const Profile> Profile::log_fold_interp(std::string name) {
  return std::make_shared<const Profile>(std::move(name), ProfileKind::LogFoldInterp, std::vector<double>{});
}

std::shared_ptr<const Profile> Profile::radial_bump(std::string name, double inner, double outer) {
  return std::make_shared<const Profile>(std::move(name), ProfileKind::RadialBump, std::vector<double>{inner, outer});
}

std::shared_ptr<const Profile> Profile::step(std::string name, double a, double b) {
  return std::make_shared<const Profile>(std::move(name), ProfileKind::Step, std::vector<double>{a, b});
}

std::shared_ptr<const Profile> Profile::log_cutoff_weight(std::string name, double a, double b) {
  return std::make_shared<const Profile>(std::move(name), ProfileKind::LogCutoffWeight,
                                         std::vector<double>{a, b});
}

Jet Profile::log_fold_derivative_jet(double r, std::size_t order) const {
  Jet x = Jet::variable(order, r);
  Jet s1 = smooth_step((x + (-1.0)) * (1.0 / kInnerWidth));
  Jet s2 = smooth_step(x + (1.0 - kE2));
  Jet one(order, 1.0);
  return (one - s1) * x * 2.0 + s1 * (one - s2) * kappa_ + s2 / x;
}

double Profile::log_fold_value(double r) const {
  if (r <= 1.0) return r * r;
  if (r >= kE2) return std::log(r);
  auto fp = [this](double q) { return log_fold_derivative_jet(q, 0).value(); };
  const std::size_t i = std::min(static_cast<std::size_t>((r - 1.0) / kMeshWidth), mesh_.size() - 2);
  const double a = 1.0 + kMeshWidth * static_cast<double>(i);
  return mesh_[i] + boost::math::quadrature::gauss<double, 20>::integrate(fp, a, r);
}

Jet Profile::log_fold_jet(double s, std::size_t order) const {
  const double r = std::fabs(s);
  if (r <= 1.0) {
    Jet x = Jet::variable(order, s);
    return x * x;
  }
  Jet out(order, log_fold_value(r));
  if (order >= 1) {
    Jet d = log_fold_derivative_jet(r, order - 1);
    for (std::size_t k = 1; k <= order; ++k) out.coef(k) = d.coef(k - 1) / static_cast<double>(k);
  }
  return s < 0.0 ? flip_odd(out) : out;
}

Jet Profile::jet(double s, std::size_t order) const {
  switch (kind_) {
    case ProfileKind::LogFoldInterp:
      return log_fold_jet(s, order);
    case ProfileKind::Step: {
      Jet x = Jet::variable(order, s);
      return smooth_step((x + (-params_[0])) * (1.0 / (params_[1] - params_[0])));
    }
    case ProfileKind::RadialBump: {
      const double inner = params_[0];
      const double outer = params_[1];
      if (s <= inner * inner) return Jet(order, 0.0);
      if (s >= outer * outer) return Jet(order, 1.0);
      Jet r = sqrt_jet(Jet::variable(order, s));
      return smooth_step((r + (-inner)) * (1.0 / (outer - inner)));
    }
    case ProfileKind::LogCutoffWeight: {
      const double a = params_[0];
      const double b = params_[1];
      const double r = std::fabs(s);
      if (r <= a) return Jet(order, 1.0);
      if (r >= b) return Jet(order, 0.0);
      // Work in r = |s| (even function), with c = 1 - S, c' = -S'.
      Jet x = Jet::variable(order + 1, r);
      Jet step = smooth_step((x + (-a)) * (1.0 / (b - a)));
      Jet xr = Jet::variable(order, r);
      Jet c(order, 0.0), dc(order, 0.0);
      for (std::size_t k = 0; k <= order; ++k) {
        c.coef(k) = (k == 0 ? 1.0 : 0.0) - step.coef(k);
        dc.coef(k) = -static_cast<double>(k + 1) * step.coef(k + 1);
      }
      Jet out = c + xr * log(xr) * dc;
      return s < 0.0 ? flip_odd(out) : out;
    }
  }
  throw std::logic_error("unknown profile kind");
}

double Profile::derivative(double s, std::size_t k) const { return jet(s, k).derivative(k); }

nlohmann::json Profile::describe() const {
  nlohmann::json j;
  j["name"] = name_;
  j["kind"] = to_string(kind_);
  j["step"] = "S(t) = p(t)/(p(t)+p(1-t)), p(t) = exp(-1/t) for t>0, 0 otherwise";
  switch (kind_) {
    case ProfileKind::LogFoldInterp:
      j["formula"] =
          "F(s) = f(|s|); f(r) = r^2 on [0,1], log r on [e^2,inf); between, f(r) = 1 + integral_1^r f', "
          "f'(r) = (1-S1(r))*2r + S1(r)*(1-S2(r))*kappa + S2(r)/r, S1(r) = S((r-1)/0.25), S2(r) = S(r-(e^2-1))";
      j["kappa"] = kappa_;
      break;
    case ProfileKind::RadialBump:
      j["formula"] = "argument is squared radius q; value S((sqrt(q)-inner)/(outer-inner))";
      j["inner"] = params_[0];
      j["outer"] = params_[1];
      break;
    case ProfileKind::Step:
      j["formula"] = "S((s-a)/(b-a))";
      j["a"] = params_[0];
      j["b"] = params_[1];
      break;
    case ProfileKind::LogCutoffWeight:
      j["formula"] = "B(s) = c(|s|) + |s| log|s| c'(|s|), c(r) = 1 - S((r-a)/(b-a))";
      j["a"] = params_[0];
      j["b"] = params_[1];
      break;
  }
  return j;
}

ProfileValidation validate_profile(const Profile& profile, std::size_t samples) {
  ProfileValidation v;
  v.samples = samples;
  double lo = 0.0, hi = 1.0;
  switch (profile.kind()) {
    case ProfileKind::LogFoldInterp: lo = 0.0; hi = kE2 + 2.0; break;
    case ProfileKind::RadialBump: lo = 0.0; hi = 1.21 * profile.params()[1] * profile.params()[1]; break;
    case ProfileKind::Step:
    case ProfileKind::LogCutoffWeight: {
      const double a = profile.params()[0], b = profile.params()[1];
      lo = a - 0.1 * (b - a);
      hi = b + 0.1 * (b - a);
      if (profile.kind() == ProfileKind::LogCutoffWeight) lo = std::max(lo, 0.0);
      break;
    }
  }
  v.min_increment = HUGE_VAL;
  v.min_value = HUGE_VAL;
  v.max_value = -HUGE_VAL;
  double prev = 0.0;
  const double fd_h = 1e-6 * (hi - lo);
  for (std::size_t i = 0; i < samples; ++i) {
    const double s = lo + (hi - lo) * (static_cast<double>(i) + 0.5) / static_cast<double>(samples);
    const double f = profile.value(s);
    v.min_value = std::min(v.min_value, f);
    v.max_value = std::max(v.max_value, f);
    if (i > 0) v.min_increment = std::min(v.min_increment, f - prev);
    prev = f;
    const double d = profile.derivative(s, 1);
    const double fd = (profile.value(s + fd_h) - profile.value(s - fd_h)) / (2.0 * fd_h);
    const double scale = std::max({1.0, std::fabs(d), std::fabs(fd)});
    v.max_fd_rel_error = std::max(v.max_fd_rel_error, std::fabs(d - fd) / scale);
  }
  if (profile.kind() == ProfileKind::LogFoldInterp && !(v.min_increment > 0.0)) {
    v.ok = false;
    v.problems.push_back("log_fold_interp is not strictly increasing on the sample");
  }
  if ((profile.kind() == ProfileKind::RadialBump || profile.kind() == ProfileKind::Step) &&
      (v.min_value < 0.0 || v.max_value > 1.0)) {
    v.ok = false;
    v.problems.push_back("bump leaves [0,1]");
  }
  if (v.max_fd_rel_error > 1e-6) {
    v.ok = false;
    v.problems.push_back("derivative disagrees with finite differences");
  }
  return v;
}

void ProfileTable::add(ProfilePtr profile) {
  const std::string name = profile->name();
  if (!table_.emplace(name, std::move(profile)).second)
    throw std::invalid_argument("duplicate profile name '" + name + "'");
}

ProfilePtr ProfileTable::find(const std::string& name) const {
  auto it = table_.find(name);
  return it == table_.end() ? nullptr : it->second;
}

}  // namespace logsym
