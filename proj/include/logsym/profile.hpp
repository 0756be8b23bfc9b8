#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "logsym/jet.hpp"

namespace logsym {

enum class ProfileKind {
  /// Even C^∞ function F(s) = f(|s|), f = r² on [0,1], f = log r on [e², ∞), f' > 0 on (0, ∞).
  LogFoldInterp,
  /// Function of the squared radius ρ: 0 for √ρ ≤ inner, 1 for √ρ ≥ outer.
  RadialBump,
  /// S((s - a)/(b - a)) with S the standard smooth step.
  Step,
  /// B(s) = c(|s|) + |s| log|s| c'(|s|) with c = 1 - Step(a, b); derivative of c(|s|) log|s| in log|s|.
  LogCutoffWeight,
};

std::string to_string(ProfileKind kind);

/// Standard C^∞ step: 0 for τ ≤ 0, 1 for τ ≥ 1, strictly increasing between.
Jet smooth_step(const Jet& tau);
double smooth_step(double tau);

class Profile {
 public:
  Profile(std::string name, ProfileKind kind, std::vector<double> params);

  static std::shared_ptr<const Profile> log_fold_interp(std::string name);
  static std::shared_ptr<const Profile> radial_bump(std::string name, double inner, double outer);
  static std::shared_ptr<const Profile> step(std::string name, double a, double b);
  static std::shared_ptr<const Profile> log_cutoff_weight(std::string name, double a, double b);

  const std::string& name() const { return name_; }
  ProfileKind kind() const { return kind_; }
  const std::vector<double>& params() const { return params_; }

  /// Taylor jet of the profile at s up to the given order.
  Jet jet(double s, std::size_t order) const;
  /// k-th derivative at s.
  double derivative(double s, std::size_t k) const;
  double value(double s) const { return derivative(s, 0); }

  /// Blend constant of the log/fold interpolation (see README); zero for other kinds.
  double kappa() const { return kappa_; }

  /// Parameters, the defining formula and constants, as serialized into certificates.
  nlohmann::json describe() const;

 private:
  Jet log_fold_jet(double s, std::size_t order) const;
  Jet log_fold_derivative_jet(double r, std::size_t order) const;
  double log_fold_value(double r) const;

  std::string name_;
  ProfileKind kind_;
  std::vector<double> params_;
  double kappa_ = 0.0;
  std::vector<double> mesh_;
};

using ProfilePtr = std::shared_ptr<const Profile>;

struct ProfileValidation {
  bool ok = true;
  double min_increment = 0.0;    ///< monotone kinds only
  double min_value = 0.0;
  double max_value = 0.0;
  double max_fd_rel_error = 0.0;  ///< derivative vs centered finite difference
  std::size_t samples = 0;
  std::vector<std::string> problems;
};

/// Dense-sample checks: monotonicity of log_fold_interp, range of bumps, derivative consistency.
ProfileValidation validate_profile(const Profile& profile, std::size_t samples);

class ProfileTable {
 public:
  void add(ProfilePtr profile);
  ProfilePtr find(const std::string& name) const;
  const std::map<std::string, ProfilePtr>& all() const { return table_; }

 private:
  std::map<std::string, ProfilePtr> table_;
};

}  // namespace logsym
