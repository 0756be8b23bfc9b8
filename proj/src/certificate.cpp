#include "logsym/certificate.hpp"

#include <cmath>

namespace logsym {

namespace {

nlohmann::json number(double v) {
  if (std::isfinite(v)) return v;
  return v > 0 ? "inf" : (v < 0 ? "-inf" : "nan");
}

}  // namespace

nlohmann::json Tolerances::describe() const {
  return {{"zero", zero},
          {"derivative", derivative},
          {"margin", margin},
          {"nondegeneracy", nondegeneracy},
          {"unit_margin", unit_margin},
          {"grid", grid},
          {"sphere_samples", sphere_samples},
          {"seed", seed}};
}

void Certificate::require_at_least(const std::string& name, double value, double threshold) {
  const bool ok = value >= threshold;
  margins_[name] = {{"value", number(value)}, {"threshold", threshold}, {"bound", "min"}, {"ok", ok}};
  if (!ok) failures_.push_back(name + " = " + std::to_string(value) + " below " + std::to_string(threshold));
}

void Certificate::require_at_most(const std::string& name, double value, double threshold) {
  const bool ok = value <= threshold;
  margins_[name] = {{"value", number(value)}, {"threshold", threshold}, {"bound", "max"}, {"ok", ok}};
  if (!ok) failures_.push_back(name + " = " + std::to_string(value) + " above " + std::to_string(threshold));
}

void Certificate::require(const std::string& name, bool ok, const std::string& detail) {
  checks_[name] = {{"ok", ok}, {"detail", detail}};
  if (!ok) failures_.push_back(detail.empty() ? name : name + ": " + detail);
}

void Certificate::fail(const std::string& reason) { failures_.push_back(reason); }

void Certificate::note(const std::string& text) { notes_.push_back(text); }

double Certificate::margin(const std::string& name) const {
  const auto& v = margins_.at(name).at("value");
  if (v.is_number()) return v.get<double>();
  const std::string s = v.get<std::string>();
  return s == "inf" ? HUGE_VAL : (s == "-inf" ? -HUGE_VAL : NAN);
}

void Certificate::absorb(const std::string& prefix, const Certificate& other) {
  for (auto it = other.margins_.begin(); it != other.margins_.end(); ++it) margins_[prefix + "." + it.key()] = it.value();
  for (auto it = other.checks_.begin(); it != other.checks_.end(); ++it) checks_[prefix + "." + it.key()] = it.value();
  for (const auto& n : other.notes_) notes_.push_back(prefix + ": " + n);
  for (const auto& f : other.failures_) failures_.push_back(prefix + ": " + f);
}

nlohmann::json Certificate::to_json() const {
  nlohmann::json j;
  j["construction"] = construction_;
  j["pass"] = pass();
  j["parameters"] = parameters_;
  j["grid"] = grid_;
  j["margins"] = margins_;
  j["checks"] = checks_;
  if (!notes_.empty()) j["notes"] = notes_;
  if (!failures_.empty()) j["failures"] = failures_;
  return j;
}

nlohmann::json grid_spec(const std::string& kind, std::size_t per_axis, std::size_t points) {
  return {{"kind", kind}, {"per_axis", per_axis}, {"points", points}};
}

}  // namespace logsym
