#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "logsym/scene.hpp"

namespace fs = std::filesystem;
using namespace logsym;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("logsym_cli_" + std::to_string(::getpid())) / name;
  fs::create_directories(dir);
  return dir;
}

struct Outcome {
  int code;
  std::string err;
};

Outcome cli(const std::string& args, const fs::path& dir) {
  const fs::path err = dir / "stderr.txt";
  const std::string cmd = "\"" + std::string(LOGSYM_CLI) + "\" " + args + " > \"" + (dir / "stdout.txt").string() +
                          "\" 2> \"" + err.string() + "\"";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(err)};
}

std::vector<fs::path> example_scenes() {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(SCENES_DIR))
    if (e.path().extension() == ".json") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

fs::path write_scene(const fs::path& dir, const std::string& name, const std::string& text) {
  const fs::path p = dir / name;
  std::ofstream(p, std::ios::binary) << text;
  return p;
}

}  // namespace

TEST_CASE("example scenes are reproducible byte for byte") {
  const auto scenes = example_scenes();
  REQUIRE(scenes.size() >= 9);
  const fs::path a = scratch("first"), b = scratch("second");
  for (const auto& s : scenes) {
    const std::string name = s.stem().string() + ".report.json";
    CHECK(cli("run \"" + s.string() + "\" --seed 7 --out \"" + (a / name).string() + "\"", a).code == 0);
    CHECK(cli("run \"" + s.string() + "\" --seed 7 --out \"" + (b / name).string() + "\"", b).code == 0);
    INFO(s.string());
    CHECK(slurp(a / name) == slurp(b / name));
  }
  CHECK(slurp(a / "log_fold_interp.txt") == slurp(b / "log_fold_interp.txt"));
  CHECK_FALSE(slurp(a / "log_fold_interp.txt").empty());
}

TEST_CASE("exit-code contract") {
  const fs::path dir = scratch("codes");
  const std::string torus_chart = R"("charts": {"T2": {"preset": "torus", "dim": 2}})";

  struct Case {
    std::string name;
    std::string text;
    std::string args;
    int code;
    std::string message;
  };
  const std::vector<Case> cases{
      {"empty", R"({"tasks": []})", "run", 0, ""},
      {"sin_torus_check",
       "{" + torus_chart + R"(, "bivectors": {"p": {"chart": "T2", "expr": "(sin(2*pi*x1))*e{1,2}"}},
        "tasks": [{"verify": "log_symplectic", "bivector": "p"}]})",
       "run", 0, ""},
      {"filtered_out",
       "{" + torus_chart + R"(, "bivectors": {"p": {"chart": "T2", "expr": "(x1^2)*e{1,2}"}},
        "tasks": [{"verify": "log_symplectic", "bivector": "p"}]})",
       "check", 0, ""},
      {"undefined_form", "{" + torus_chart + R"(, "tasks": [{"verify": "closed", "form": "ghost"}]})", "run", 1,
       "ghost"},
      {"syntax", "{\n  \"tasks\": [\n    {\"verify\": }\n  ]\n}", "run", 1, "line 3"},
      {"unknown_op", R"({"tasks": [{"verify": "everything"}]})", "run", 1, "everything"},
      {"missing_arg", R"({"tasks": [{"check": "surface"}]})", "run", 1, "surface"},
      {"bad_expression",
       "{" + torus_chart + R"(, "forms": {"w": {"chart": "T2", "degree": 2, "expr": "(sin(x1)*e{1,2}"}}})", "run", 1,
       "forms.w.expr"},
      {"coordinate_out_of_range",
       "{" + torus_chart + R"(, "forms": {"w": {"chart": "T2", "degree": 2, "expr": "(x3)*e{1,2}"}}})", "run", 1,
       "forms.w"},
      {"unknown_key", R"({"task": []})", "run", 1, "task"},
      {"redefined_output",
       "{" + torus_chart + R"(, "forms": {"w": {"chart": "T2", "degree": 2, "expr": "e{1,2}"}},
        "tasks": [{"convert": "to_ordinary", "form": "w", "output": "w"}]})",
       "run", 1, "already defined"},
      {"asymmetric_ring", R"({"rings": {"r": {"Q": [[1, 2], [0, 1]]}}})", "run", 1, "symmetric"},
      {"expect_mismatch",
       R"({"surfaces": {"rp2": {"preset": "projective_plane"}}, "tasks": [{"check": "surface", "surface": "rp2", "expect": true}]})",
       "run", 2, ""},
      {"not_transverse",
       "{" + torus_chart + R"(, "bivectors": {"p": {"chart": "T2", "expr": "(sin(2*pi*x1)^2)*e{1,2}"}},
        "tasks": [{"verify": "log_symplectic", "bivector": "p"}]})",
       "run", 2, ""},
      {"symplectic_not_folded",
       R"({"charts": {"B": {"preset": "standard", "dim": 2}},
        "forms": {"w": {"chart": "B", "frame": "ordinary", "degree": 2, "expr": "e{1,2}"},
                  "t": {"chart": "B", "frame": "ordinary", "degree": 1, "expr": "e{2}"}},
        "tasks": [{"construct": "fold2log", "form": "w", "theta": "t"}]})",
       "run", 2, ""},
      {"open_surface",
       R"({"surfaces": {"disk": {"vertices": 4, "triangles": [[0, 1, 2], [0, 2, 3]]}},
        "tasks": [{"check": "surface", "surface": "disk"}]})",
       "run", 2, "not closed"},
      {"real_eigenvalue",
       R"({"matrices": {"A": [[1, 0], [0, 2]]}, "tasks": [{"verify": "retract", "matrix": "A"}]})", "run", 2, ""},
  };
  for (const auto& c : cases) {
    INFO(c.name);
    const fs::path p = write_scene(dir, c.name + ".json", c.text);
    const Outcome o = cli(c.args + " \"" + p.string() + "\"", dir);
    CHECK(o.code == c.code);
    if (!c.message.empty()) CHECK(o.err.find(c.message) != std::string::npos);
  }
  CHECK(cli("run \"" + (dir / "absent.json").string() + "\"", dir).code == 1);
  CHECK(cli("run \"" + (dir / "empty.json").string() + "\" --grid many", dir).code == 1);
  CHECK(cli("frobnicate", dir).code == 1);

  const Scene empty = Scene::parse(R"({"tasks": []})");
  const Report r = run(empty, {scene_tolerances(empty)});
  CHECK(r.exit_code == 0);
  CHECK(r.json["tasks"].empty());
}

TEST_CASE("single log-symplectic check on the sin torus") {
  const Scene s = Scene::parse(R"({"charts": {"T2": {"preset": "torus", "dim": 2}},
    "bivectors": {"p": {"chart": "T2", "expr": "(sin(2*pi*x1))*e{1,2}"}},
    "tasks": [{"verify": "log_symplectic", "bivector": "p"}]})");
  const Report r = run(s, {scene_tolerances(s)});
  CHECK(r.exit_code == 0);
  REQUIRE(r.json["tasks"].size() == 1);
  CHECK(r.json["tasks"][0]["pass"] == true);
  CHECK(r.json["tasks"][0]["result"]["report"]["pass"] == true);
}

TEST_CASE("command-line flags override the scene config") {
  const Scene s = Scene::parse(R"({"config": {"grid": 100, "seed": 3}, "tasks": []})");
  Tolerances t = scene_tolerances(s);
  CHECK(t.grid == 100);
  CHECK(t.seed == 3);
  const fs::path dir = scratch("flags");
  const fs::path p = write_scene(dir, "cfg.json", R"({"config": {"grid": 100}, "tasks": []})");
  REQUIRE(cli("run \"" + p.string() + "\" --grid 64 --tol-zero 1e-12 --out \"" + (dir / "r.json").string() + "\"", dir)
              .code == 0);
  const auto report = nlohmann::json::parse(slurp(dir / "r.json"));
  CHECK(report["config"]["grid"] == 64);
  CHECK(report["config"]["zero"] == 1e-12);
  CHECK_FALSE(report.contains("wall_clock_s"));
}

TEST_CASE("profile table") {
  const auto f = Profile::log_fold_interp("F");
  const std::string text = emit_profile_table(*f, 101);
  std::istringstream in(text);
  std::string line;
  std::vector<std::array<double, 3>> rows;
  int header = 0;
  while (std::getline(in, line)) {
    if (line.rfind('#', 0) == 0) {
      ++header;
      continue;
    }
    std::istringstream ls(line);
    std::array<double, 3> row{};
    ls >> row[0] >> row[1] >> row[2];
    rows.push_back(row);
  }
  CHECK(header == 3);
  CHECK(text.find("log_fold_interp") != std::string::npos);
  const double e2 = std::exp(2.0);
  bool saw_half = false, saw_log = false;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k][0] == 0.5) {
      saw_half = true;
      CHECK(rows[k][1] == doctest::Approx(0.25).epsilon(1e-15));
    }
    if (rows[k][0] == e2 + 1.0) {
      saw_log = true;
      CHECK(rows[k][1] == doctest::Approx(std::log(e2 + 1.0)).epsilon(1e-15));
    }
    if (k > 0 && rows[k - 1][0] > 0.0) CHECK(rows[k][1] > rows[k - 1][1]);
  }
  CHECK(saw_half);
  CHECK(saw_log);
  CHECK(rows.size() >= 101);
}
