#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace logsym {

/// Thresholds and sampling sizes shared by every check; recorded in each certificate.
struct Tolerances {
  double zero = 1e-10;           ///< |value| counted as zero
  double derivative = 1e-6;      ///< minimal |∂₁h| on the singular locus
  double margin = 1e-8;          ///< minimal positive margin (nondegeneracy, collar data)
  double nondegeneracy = 1e-9;   ///< minimal |Pfaffian| for inversion
  double unit_margin = 1e-6;     ///< minimal |u| for b-maps
  std::size_t grid = 10000;      ///< base points per chart grid
  std::size_t sphere_samples = 32;
  std::uint64_t seed = 1;

  nlohmann::json describe() const;
};

/// Verification record: parameters, grid, named margins with thresholds, and verdict.
class Certificate {
 public:
  Certificate() = default;
  explicit Certificate(std::string construction) : construction_(std::move(construction)) {}

  /// Records value and requires value >= threshold.
  void require_at_least(const std::string& name, double value, double threshold);
  /// Records value and requires value <= threshold.
  void require_at_most(const std::string& name, double value, double threshold);
  /// Records a named boolean check.
  void require(const std::string& name, bool ok, const std::string& detail = "");
  void fail(const std::string& reason);
  void note(const std::string& text);

  nlohmann::json& parameters() { return parameters_; }
  nlohmann::json& grid() { return grid_; }
  const nlohmann::json& parameters() const { return parameters_; }
  const nlohmann::json& grid() const { return grid_; }

  bool pass() const { return failures_.empty(); }
  const std::vector<std::string>& failures() const { return failures_; }
  const std::string& construction() const { return construction_; }
  /// Value of a recorded margin; throws std::out_of_range when absent.
  double margin(const std::string& name) const;

  /// Merges another certificate's checks under a prefix.
  void absorb(const std::string& prefix, const Certificate& other);

  nlohmann::json to_json() const;

 private:
  std::string construction_;
  nlohmann::json parameters_ = nlohmann::json::object();
  nlohmann::json grid_ = nlohmann::json::object();
  nlohmann::json margins_ = nlohmann::json::object();
  nlohmann::json checks_ = nlohmann::json::object();
  std::vector<std::string> notes_;
  std::vector<std::string> failures_;
};

/// Grid description for certificates.
nlohmann::json grid_spec(const std::string& kind, std::size_t per_axis, std::size_t points);

}  // namespace logsym
