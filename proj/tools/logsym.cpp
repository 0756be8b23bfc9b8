#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "logsym/scene.hpp"

namespace {

struct Flags {
  std::string scene;
  std::optional<std::size_t> grid;
  std::optional<std::size_t> sphere_samples;
  std::optional<double> tol_zero;
  std::optional<double> tol_margin;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool timing = false;
};

int execute(const Flags& f, std::optional<std::string> only) {
  logsym::Scene scene;
  try {
    scene = logsym::Scene::load(f.scene);
  } catch (const logsym::SceneError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 1;
  }
  logsym::RunOptions opt;
  opt.tol = logsym::scene_tolerances(scene);
  if (f.grid) opt.tol.grid = *f.grid;
  if (f.sphere_samples) opt.tol.sphere_samples = *f.sphere_samples;
  if (f.tol_zero) opt.tol.zero = *f.tol_zero;
  if (f.tol_margin) opt.tol.margin = *f.tol_margin;
  if (f.seed) opt.tol.seed = *f.seed;
  opt.only = std::move(only);
  opt.timing = f.timing;
  if (!f.out.empty()) {
    const auto parent = std::filesystem::path(f.out).parent_path();
    if (!parent.empty()) opt.table_dir = parent;
  }

  const logsym::Report report = logsym::run(scene, opt);
  const std::string text = report.json.dump(2) + "\n";
  if (f.out.empty()) {
    std::cout << text;
  } else {
    std::ofstream os(f.out, std::ios::binary);
    if (!os) {
      std::cerr << "cannot write " << f.out << "\n";
      return 1;
    }
    os << text;
  }
  for (const auto& t : report.json["tasks"])
    if (!t["pass"].get<bool>()) {
      std::cerr << "FAIL " << t["name"].get<std::string>();
      if (t.contains("error")) std::cerr << ": " << t["error"].get<std::string>();
      std::cerr << "\n";
    }
  return report.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"logsym: log-symplectic chart toolkit (scene files in, JSON reports out)"};
  app.require_subcommand(1);
  Flags flags;

  const std::vector<std::pair<std::string, std::string>> commands{
      {"run", "run every task"},
      {"verify", "run verify tasks"},
      {"construct", "run construct tasks"},
      {"convert", "run convert tasks"},
      {"check", "run topology check tasks"},
      {"profile", "run profile tasks (tables and validation)"}};
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("scene", flags.scene, "scene JSON file")->required();
    sub->add_option("--grid", flags.grid, "base points per chart grid");
    sub->add_option("--sphere-samples", flags.sphere_samples, "unit-sphere directions per point");
    sub->add_option("--tol-zero", flags.tol_zero, "zero tolerance");
    sub->add_option("--tol-margin", flags.tol_margin, "minimal positive margin");
    sub->add_option("--seed", flags.seed, "random seed");
    sub->add_option("--out", flags.out, "report path (stdout when absent); profile tables go beside it");
    sub->add_flag("--timing", flags.timing, "add wall-clock fields to the report");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  for (const auto* sub : app.get_subcommands()) {
    const std::string name = sub->get_name();
    return execute(flags, name == "run" ? std::nullopt : std::optional<std::string>(name));
  }
  return 1;
}
