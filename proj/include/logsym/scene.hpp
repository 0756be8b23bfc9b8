#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "logsym/bform.hpp"
#include "logsym/certificate.hpp"
#include "logsym/chart.hpp"
#include "logsym/profile.hpp"
#include "logsym/topology.hpp"

namespace logsym {

/// Malformed scene: JSON syntax, schema, expression syntax or an unresolved name.
class SceneError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FormEntry {
  Chart chart;
  BForm form;
};

struct BivectorEntry {
  Chart chart;
  BBivector bivector;
};

struct MapEntry {
  std::string source;
  std::string target;
  BMapModel model;
};

/// Parsed scene file: named objects plus the task list (validated against the objects).
struct Scene {
  std::string origin;
  nlohmann::json config = nlohmann::json::object();
  ProfileTable profiles;
  std::map<std::string, Chart> charts;
  std::map<std::string, FormEntry> forms;
  std::map<std::string, BivectorEntry> bivectors;
  std::map<std::string, MapEntry> maps;
  std::map<std::string, std::vector<std::vector<Expr>>> structures;  ///< almost complex structures
  std::map<std::string, Eigen::MatrixXd> matrices;
  std::map<std::string, CohomologyRing> rings;
  std::map<std::string, TriangulatedSurface> surfaces;
  nlohmann::json tasks = nlohmann::json::array();

  /// Throws SceneError with the JSON path (and line/column for syntax errors).
  static Scene parse(const std::string& text, const std::string& origin = "<scene>");
  static Scene load(const std::filesystem::path& path);
};

/// Default tolerances overridden by the scene's "config" block.
Tolerances scene_tolerances(const Scene& scene);

struct RunOptions {
  Tolerances tol;
  std::optional<std::string> only;  ///< task kind: verify, construct, convert, check or profile
  bool timing = false;              ///< adds wall-clock fields (reports are then not reproducible)
  std::filesystem::path table_dir = ".";
};

struct Report {
  nlohmann::json json;
  int exit_code = 0;  ///< 0 when every task passes, 2 otherwise
};

/// Runs the tasks in declaration order. Operation errors are recorded on the task.
Report run(const Scene& scene, const RunOptions& options);

/// Columnar text "r f(r) f'(r)" on a uniform grid plus the profile's landmark points, with a
/// commented header holding the parameters.
std::string emit_profile_table(const Profile& profile, std::size_t samples);

}  // namespace logsym
