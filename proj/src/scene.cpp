#include "logsym/scene.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

#include "logsym/bgeometry.hpp"
#include "logsym/constructions.hpp"
#include "logsym/parse.hpp"
#include "logsym/program.hpp"
#include "logsym/taming.hpp"

namespace logsym {

namespace {

using json = nlohmann::json;

constexpr const char* kVersion = "1.0.0";

[[noreturn]] void fail(const std::string& where, const std::string& what) { throw SceneError(where + ": " + what); }

const json& need(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) fail(where, "missing \"" + key + "\"");
  return obj.at(key);
}

std::string need_string(const json& obj, const std::string& key, const std::string& where) {
  const json& v = need(obj, key, where);
  if (!v.is_string()) fail(where + "." + key, "expected a string");
  return v.get<std::string>();
}

double number_or(const json& obj, const std::string& key, double fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  if (!obj.at(key).is_number()) fail(where + "." + key, "expected a number");
  return obj.at(key).get<double>();
}

long integer_or(const json& obj, const std::string& key, long fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  if (!obj.at(key).is_number_integer()) fail(where + "." + key, "expected an integer");
  return obj.at(key).get<long>();
}

std::vector<Interval> parse_box(const json& v, const std::string& where) {
  if (!v.is_array()) fail(where, "expected an array of [lo, hi] pairs");
  std::vector<Interval> box;
  for (const auto& iv : v) {
    if (!iv.is_array() || iv.size() != 2 || !iv[0].is_number() || !iv[1].is_number())
      fail(where, "expected [lo, hi] pairs");
    const double lo = iv[0].get<double>(), hi = iv[1].get<double>();
    if (!(lo < hi)) fail(where, "empty interval");
    box.push_back({lo, hi});
  }
  return box;
}

Expr parse_expr_at(const std::string& text, const ParseContext& ctx, const std::string& where) {
  try {
    return parse_expr(text, ctx);
  } catch (const ParseError& e) {
    fail(where, e.what());
  }
}

Expr expr_entry(const json& v, const ParseContext& ctx, const std::string& where) {
  if (v.is_string()) return parse_expr_at(v.get<std::string>(), ctx, where);
  if (v.is_number_integer()) return Expr(Rational(v.get<long>()));
  if (v.is_number()) return Expr(Rational(v.get<double>()));
  fail(where, "expected an expression string or a number");
}

Chart parse_chart(const json& spec, const ParseContext& base_ctx, const std::string& where) {
  if (!spec.is_object()) fail(where, "expected an object");
  const long dim = integer_or(spec, "dim", 0, where);
  if (dim < 1 || dim > 6) fail(where + ".dim", "dimension must be between 1 and 6");
  if (spec.contains("preset")) {
    const std::string preset = need_string(spec, "preset", where);
    if (preset == "standard") return Chart::standard(static_cast<int>(dim), number_or(spec, "half_width", 1.0, where));
    if (preset == "torus") return Chart::torus(static_cast<int>(dim));
    if (preset == "torus_plain") return Chart::torus_plain(static_cast<int>(dim));
    fail(where + ".preset", "unknown preset \"" + preset + "\"");
  }
  std::vector<Interval> box = parse_box(need(spec, "box", where), where + ".box");
  if (box.size() != static_cast<std::size_t>(dim)) fail(where + ".box", "needs one interval per coordinate");
  std::vector<bool> periodic(box.size(), false);
  if (spec.contains("periodic")) {
    const json& p = spec.at("periodic");
    if (!p.is_array() || p.size() != box.size()) fail(where + ".periodic", "needs one flag per coordinate");
    for (std::size_t i = 0; i < box.size(); ++i) {
      if (!p[i].is_boolean()) fail(where + ".periodic", "expected booleans");
      periodic[i] = p[i].get<bool>();
    }
  }
  std::optional<Expr> h;
  if (spec.contains("h") && !spec.at("h").is_null()) {
    ParseContext ctx = base_ctx;
    ctx.max_coord = 1;
    h = expr_entry(spec.at("h"), ctx, where + ".h");
  }
  try {
    return Chart(static_cast<int>(dim), std::move(box), std::move(periodic), h);
  } catch (const std::exception& e) {
    fail(where, e.what());
  }
}

Frame frame_for(const Chart& chart, const std::string& kind, const std::string& where) {
  if (kind == "b") return chart.frame();
  if (kind == "ordinary") return Frame::ordinary(chart.dim());
  fail(where, "frame must be \"b\" or \"ordinary\"");
}

const Chart& chart_ref(const Scene& s, const json& spec, const std::string& where) {
  const std::string name = need_string(spec, "chart", where);
  const auto it = s.charts.find(name);
  if (it == s.charts.end()) fail(where + ".chart", "undefined chart \"" + name + "\"");
  return it->second;
}

ProfilePtr parse_profile(const std::string& name, const json& spec, const std::string& where) {
  const std::string kind = need_string(spec, "kind", where);
  try {
    if (kind == "log_fold_interp") return Profile::log_fold_interp(name);
    if (kind == "radial_bump")
      return Profile::radial_bump(name, number_or(spec, "inner", 0.25, where), number_or(spec, "outer", 0.75, where));
    if (kind == "step") return Profile::step(name, number_or(spec, "a", 0.0, where), number_or(spec, "b", 1.0, where));
    if (kind == "log_cutoff_weight")
      return Profile::log_cutoff_weight(name, number_or(spec, "a", 0.25, where), number_or(spec, "b", 0.75, where));
  } catch (const std::invalid_argument& e) {
    fail(where, e.what());
  }
  fail(where + ".kind", "unknown profile kind \"" + kind + "\"");
}

TriangulatedSurface parse_surface(const json& spec, const std::string& where) {
  if (!spec.is_object()) fail(where, "expected an object");
  TriangulatedSurface s;
  try {
    if (spec.contains("preset")) {
      const std::string preset = need_string(spec, "preset", where);
      const int m = static_cast<int>(integer_or(spec, "m", 3, where)), n = static_cast<int>(integer_or(spec, "n", 3, where));
      if (preset == "torus") s = TriangulatedSurface::torus(m, n);
      else if (preset == "klein_bottle") s = TriangulatedSurface::klein_bottle(m, n);
      else if (preset == "projective_plane") s = TriangulatedSurface::projective_plane();
      else if (preset == "octahedron") s = TriangulatedSurface::octahedron();
      else fail(where + ".preset", "unknown preset \"" + preset + "\"");
    } else {
      s.vertex_count = static_cast<int>(integer_or(spec, "vertices", 0, where));
      const json& tris = need(spec, "triangles", where);
      if (!tris.is_array()) fail(where + ".triangles", "expected an array");
      for (const auto& t : tris) {
        if (!t.is_array() || t.size() != 3) fail(where + ".triangles", "expected vertex triples");
        std::array<int, 3> tri{};
        for (std::size_t k = 0; k < 3; ++k) {
          if (!t[k].is_number_integer()) fail(where + ".triangles", "expected integer vertices");
          tri[k] = t[k].get<int>();
        }
        s.triangles.push_back(tri);
      }
    }
  } catch (const TopologyError& e) {
    fail(where, e.what());
  }
  for (long k = integer_or(spec, "subdivide", 0, where); k > 0; --k) s = barycentric_subdivision(s);
  return s;
}

Eigen::MatrixXd parse_matrix(const json& v, const std::string& where) {
  if (!v.is_array() || v.empty()) fail(where, "expected a nonempty array of rows");
  const std::size_t cols = v[0].is_array() ? v[0].size() : 0;
  Eigen::MatrixXd m(static_cast<Eigen::Index>(v.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_array() || v[i].size() != cols) fail(where, "rows must have equal length");
    for (std::size_t j = 0; j < cols; ++j) {
      if (!v[i][j].is_number()) fail(where, "expected numbers");
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v[i][j].get<double>();
    }
  }
  return m;
}

// Task schema: argument name → kind of referenced object.
enum class Ref { Form, Bivector, Map, Structure, Matrix, Ring, Surface, Profile };

struct OpSpec {
  std::vector<std::pair<std::string, Ref>> required;
  std::vector<std::pair<std::string, Ref>> optional;
  std::optional<Ref> output;
};

const std::map<std::string, std::map<std::string, OpSpec>>& op_table() {
  static const std::map<std::string, std::map<std::string, OpSpec>> table = [] {
    const OpSpec log2fold{{{"form", Ref::Form}}, {}, Ref::Form};
    const OpSpec fold2log{{{"form", Ref::Form}}, {{"theta", Ref::Form}, {"theta_from", Ref::Form}}, Ref::Form};
    std::map<std::string, std::map<std::string, OpSpec>> t;
    t["verify"] = {
        {"closed", {{{"form", Ref::Form}}, {}, {}}},
        {"log_symplectic", {{}, {{"form", Ref::Form}, {"bivector", Ref::Bivector}}, {}}},
        {"duality_roundtrip", {{{"form", Ref::Form}}, {}, {}}},
        {"cosymplectic", {{{"form", Ref::Form}}, {}, {}}},
        {"bmap", {{{"map", Ref::Map}}, {}, {}}},
        {"splitting", {{{"map", Ref::Map}, {"section", Ref::Map}}, {}, {}}},
        {"retract", {{{"matrix", Ref::Matrix}}, {}, {}}},
        {"tame", {{{"omega", Ref::Matrix}, {"t", Ref::Matrix}, {"j", Ref::Matrix}}, {}, {}}},
        {"pair_lemma",
         {{{"f", Ref::Matrix}, {"bf", Ref::Matrix}, {"rho_v", Ref::Matrix}, {"rho_w", Ref::Matrix}, {"v1", Ref::Matrix},
           {"w1", Ref::Matrix}},
          {},
          {}}}};
    t["construct"] = {
        {"thurston", {{{"map", Ref::Map}, {"omega_base", Ref::Form}, {"reference", Ref::Form}, {"acs", Ref::Structure}}, {}, Ref::Form}},
        {"lefschetz-local",
         {{}, {{"fiber_form", Ref::Form}, {"fiber_primitive", Ref::Form}, {"primitive", Ref::Form}}, Ref::Form}},
        {"log2fold", log2fold},
        {"fold2log", fold2log}};
    t["convert"] = {{"dual_bivector", {{{"form", Ref::Form}}, {}, Ref::Bivector}},
                    {"invert_bivector", {{{"bivector", Ref::Bivector}}, {}, Ref::Form}},
                    {"anchor", {{{"bivector", Ref::Bivector}}, {}, Ref::Bivector}},
                    {"to_ordinary", {{{"form", Ref::Form}}, {}, Ref::Form}},
                    {"log2fold", log2fold},
                    {"fold2log", fold2log}};
    t["check"] = {{"surface", {{{"surface", Ref::Surface}}, {}, {}}},
                  {"obstruction_a", {{{"ring", Ref::Ring}}, {}, {}}},
                  {"obstruction_b", {{{"ring", Ref::Ring}}, {}, {}}}};
    t["profile"] = {{"table", {{{"target", Ref::Profile}}, {}, {}}}, {"validate", {{{"target", Ref::Profile}}, {}, {}}}};
    return t;
  }();
  return table;
}

const char* ref_name(Ref r) {
  switch (r) {
    case Ref::Form: return "form";
    case Ref::Bivector: return "bivector";
    case Ref::Map: return "map";
    case Ref::Structure: return "structure";
    case Ref::Matrix: return "matrix";
    case Ref::Ring: return "ring";
    case Ref::Surface: return "surface";
    case Ref::Profile: return "profile";
  }
  return "object";
}

std::pair<std::string, std::string> task_kind(const json& task, const std::string& where) {
  std::string kind;
  for (const auto& [k, ops] : op_table())
    if (task.contains(k)) {
      if (!kind.empty()) fail(where, "a task names exactly one of verify/construct/convert/check/profile");
      kind = k;
    }
  if (kind.empty()) fail(where, "task names none of verify/construct/convert/check/profile");
  if (!task.at(kind).is_string()) fail(where + "." + kind, "expected an operation name");
  return {kind, task.at(kind).get<std::string>()};
}

std::string task_name(const json& task, std::size_t index) {
  if (task.contains("name") && task.at("name").is_string()) return task.at("name").get<std::string>();
  return "task" + std::to_string(index + 1);
}

void validate_tasks(const Scene& s) {
  std::map<Ref, std::set<std::string>> names;
  for (const auto& [k, v] : s.forms) names[Ref::Form].insert(k);
  for (const auto& [k, v] : s.bivectors) names[Ref::Bivector].insert(k);
  for (const auto& [k, v] : s.maps) names[Ref::Map].insert(k);
  for (const auto& [k, v] : s.structures) names[Ref::Structure].insert(k);
  for (const auto& [k, v] : s.matrices) names[Ref::Matrix].insert(k);
  for (const auto& [k, v] : s.rings) names[Ref::Ring].insert(k);
  for (const auto& [k, v] : s.surfaces) names[Ref::Surface].insert(k);
  for (const auto& [k, v] : s.profiles.all()) names[Ref::Profile].insert(k);

  auto resolve = [&](const json& task, const std::string& arg, Ref ref, const std::string& where) {
    if (!task.at(arg).is_string()) fail(where + "." + arg, "expected a name");
    const std::string name = task.at(arg).get<std::string>();
    if (!names[ref].count(name)) fail(where + "." + arg, std::string("undefined ") + ref_name(ref) + " \"" + name + "\"");
  };

  std::set<std::string> task_names;
  for (std::size_t i = 0; i < s.tasks.size(); ++i) {
    const json& task = s.tasks[i];
    const std::string where = "tasks[" + std::to_string(i) + "]";
    if (!task.is_object()) fail(where, "expected an object");
    const std::string name = task_name(task, i);
    if (!task_names.insert(name).second) fail(where + ".name", "duplicate task name \"" + name + "\"");
    const auto [kind, op] = task_kind(task, where);
    const auto& ops = op_table().at(kind);
    const auto it = ops.find(op);
    if (it == ops.end()) fail(where + "." + kind, "unknown operation \"" + op + "\"");
    const OpSpec& spec = it->second;
    for (const auto& [arg, ref] : spec.required) {
      if (!task.contains(arg)) fail(where, "missing \"" + arg + "\"");
      resolve(task, arg, ref, where);
    }
    for (const auto& [arg, ref] : spec.optional)
      if (task.contains(arg)) resolve(task, arg, ref, where);
    if (op == "log_symplectic" && task.contains("form") == task.contains("bivector"))
      fail(where, "log_symplectic needs exactly one of \"form\" and \"bivector\"");
    if (op == "fold2log" && task.contains("theta") == task.contains("theta_from"))
      fail(where, "fold2log needs exactly one of \"theta\" and \"theta_from\"");
    if (op == "thurston") {
      const json& cover = need(task, "cover", where);
      if (!cover.is_array() || cover.empty()) fail(where + ".cover", "expected a nonempty array");
      for (std::size_t c = 0; c < cover.size(); ++c) {
        const std::string cw = where + ".cover[" + std::to_string(c) + "]";
        need_string(cover[c], "weight", cw);
        for (const char* arg : {"eta", "alpha"}) {
          need(cover[c], arg, cw);
          resolve(cover[c], arg, Ref::Form, cw);
        }
        if (cover[c].contains("box")) parse_box(cover[c].at("box"), cw + ".box");
      }
    }
    if (op == "surface" && task.contains("z")) {
      const json& z = task.at("z");
      if (!z.is_array()) fail(where + ".z", "expected an array of edges");
      for (const auto& e : z)
        if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() || !e[1].is_number_integer())
          fail(where + ".z", "edges are pairs of vertex indices");
    }
    if (op == "obstruction_a") {
      const long n = integer_or(task, "n", s.rings.at(task.at("ring").get<std::string>()).n.value_or(2), where);
      if (n != 2 && n != 3) fail(where + ".n", "obstruction_a supports n = 2 and n = 3");
      if (integer_or(task, "box", 10, where) < 1) fail(where + ".box", "box must be positive");
    }
    if (op == "table") {
      need_string(task, "file", where);
      if (integer_or(task, "samples", 257, where) < 2) fail(where + ".samples", "need at least two samples");
    }
    if (task.contains("expect") && !task.at("expect").is_boolean()) fail(where + ".expect", "expected a boolean");
    if (task.contains("output")) {
      if (!spec.output) fail(where + ".output", "operation \"" + op + "\" has no output");
      if (!task.at("output").is_string()) fail(where + ".output", "expected a name");
      const std::string out = task.at("output").get<std::string>();
      if (!names[*spec.output].insert(out).second) fail(where + ".output", "name \"" + out + "\" already defined");
    }
  }
}

}  // namespace

Scene Scene::parse(const std::string& text, const std::string& origin) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SceneError(origin + ": JSON " + e.what());
  }
  if (!root.is_object()) throw SceneError(origin + ": the scene must be a JSON object");
  static const std::set<std::string> known{"name",     "description", "config", "profiles", "charts", "forms",
                                           "bivectors", "maps",       "structures", "matrices", "rings", "surfaces",
                                           "tasks"};
  for (const auto& [key, value] : root.items())
    if (!known.count(key)) fail(origin, "unknown top-level key \"" + key + "\"");

  Scene s;
  s.origin = origin;
  const json empty = json::object();
  auto section = [&](const char* key) -> const json& {
    if (!root.contains(key)) return empty;
    if (!root.at(key).is_object()) fail(key, "expected an object of named entries");
    return root.at(key);
  };

  if (root.contains("config")) {
    s.config = section("config");
    static const std::set<std::string> cfg{"zero", "derivative", "margin", "nondegeneracy", "unit_margin", "grid",
                                           "sphere_samples", "seed"};
    for (const auto& [k, v] : s.config.items()) {
      if (!cfg.count(k)) fail("config", "unknown setting \"" + k + "\"");
      if (!v.is_number()) fail("config." + k, "expected a number");
    }
  }
  for (const auto& [name, spec] : section("profiles").items()) s.profiles.add(parse_profile(name, spec, "profiles." + name));
  const ParseContext base{&s.profiles, 0};
  for (const auto& [name, spec] : section("charts").items()) s.charts.emplace(name, parse_chart(spec, base, "charts." + name));

  for (const auto& [name, spec] : section("forms").items()) {
    const std::string where = "forms." + name;
    const Chart& chart = chart_ref(s, spec, where);
    const long degree = integer_or(spec, "degree", -1, where);
    if (degree < 0 || degree > chart.dim()) fail(where + ".degree", "degree must be between 0 and the chart dimension");
    const Frame frame = frame_for(chart, spec.contains("frame") ? need_string(spec, "frame", where) : "b", where + ".frame");
    try {
      s.forms.emplace(name, FormEntry{chart, parse_form(need_string(spec, "expr", where), frame, static_cast<int>(degree),
                                                        ParseContext{&s.profiles, chart.dim()})});
    } catch (const ParseError& e) {
      fail(where + ".expr", e.what());
    } catch (const std::invalid_argument& e) {
      fail(where + ".expr", e.what());
    }
  }
  for (const auto& [name, spec] : section("bivectors").items()) {
    const std::string where = "bivectors." + name;
    const Chart& chart = chart_ref(s, spec, where);
    const Frame frame =
        frame_for(chart, spec.contains("frame") ? need_string(spec, "frame", where) : "ordinary", where + ".frame");
    try {
      s.bivectors.emplace(name, BivectorEntry{chart, parse_bivector(need(spec, "expr", where), frame,
                                                                    ParseContext{&s.profiles, chart.dim()})});
    } catch (const ParseError& e) {
      fail(where + ".expr", e.what());
    } catch (const std::invalid_argument& e) {
      fail(where + ".expr", e.what());
    }
  }
  for (const auto& [name, spec] : section("maps").items()) {
    const std::string where = "maps." + name;
    const std::string source = need_string(spec, "source", where), target = need_string(spec, "target", where);
    if (!s.charts.count(source)) fail(where + ".source", "undefined chart \"" + source + "\"");
    if (!s.charts.count(target)) fail(where + ".target", "undefined chart \"" + target + "\"");
    const Chart& src = s.charts.at(source);
    const Chart& tgt = s.charts.at(target);
    const json& comps = need(spec, "components", where);
    if (!comps.is_array() || comps.size() != static_cast<std::size_t>(tgt.dim()))
      fail(where + ".components", "needs one expression per target coordinate");
    const ParseContext ctx{&s.profiles, src.dim()};
    BMapModel model{src.frame(), tgt.frame(), {}, std::nullopt};
    for (std::size_t i = 0; i < comps.size(); ++i)
      model.components.push_back(expr_entry(comps[i], ctx, where + ".components[" + std::to_string(i) + "]"));
    if (spec.contains("u") && !spec.at("u").is_null()) model.u = expr_entry(spec.at("u"), ctx, where + ".u");
    s.maps.emplace(name, MapEntry{source, target, std::move(model)});
  }
  for (const auto& [name, spec] : section("structures").items()) {
    const std::string where = "structures." + name;
    std::vector<std::vector<Expr>> entries;
    if (spec.contains("standard")) {
      const long dim = integer_or(spec, "standard", 0, where);
      if (dim < 2 || dim % 2) fail(where + ".standard", "needs an even dimension");
      const Eigen::MatrixXd j = complex_structure_matrix(static_cast<int>(dim));
      for (Eigen::Index r = 0; r < j.rows(); ++r) {
        entries.emplace_back();
        for (Eigen::Index c = 0; c < j.cols(); ++c) entries.back().push_back(Expr(Rational(j(r, c))));
      }
    } else {
      const json& rows = need(spec, "matrix", where);
      if (!rows.is_array() || rows.empty()) fail(where + ".matrix", "expected rows");
      for (std::size_t r = 0; r < rows.size(); ++r) {
        if (!rows[r].is_array() || rows[r].size() != rows.size()) fail(where + ".matrix", "expected a square matrix");
        entries.emplace_back();
        for (std::size_t c = 0; c < rows.size(); ++c)
          entries.back().push_back(expr_entry(rows[r][c], ParseContext{&s.profiles, static_cast<int>(rows.size())},
                                              where + ".matrix"));
      }
    }
    s.structures.emplace(name, std::move(entries));
  }
  for (const auto& [name, spec] : section("matrices").items())
    s.matrices.emplace(name, parse_matrix(spec, "matrices." + name));
  for (const auto& [name, spec] : section("rings").items()) {
    const std::string where = "rings." + name;
    CohomologyRing ring;
    const json& q = need(spec, "Q", where);
    if (!q.is_array()) fail(where + ".Q", "expected an array of rows");
    for (const auto& row : q) {
      if (!row.is_array()) fail(where + ".Q", "expected an array of rows");
      ring.q.emplace_back();
      for (const auto& v : row) {
        if (!v.is_number_integer()) fail(where + ".Q", "entries must be integers");
        ring.q.back().push_back(v.get<long>());
      }
    }
    if (spec.contains("b2") && integer_or(spec, "b2", 0, where) != ring.b2()) fail(where + ".b2", "does not match the size of Q");
    if (spec.contains("n")) ring.n = static_cast<int>(integer_or(spec, "n", 2, where));
    try {
      ring.validate();
    } catch (const TopologyError& e) {
      fail(where, e.what());
    }
    s.rings.emplace(name, std::move(ring));
  }
  for (const auto& [name, spec] : section("surfaces").items()) s.surfaces.emplace(name, parse_surface(spec, "surfaces." + name));

  if (root.contains("tasks")) {
    if (!root.at("tasks").is_array()) fail("tasks", "expected an array");
    s.tasks = root.at("tasks");
  }
  validate_tasks(s);
  return s;
}

Scene Scene::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SceneError(path.string() + ": cannot open scene file");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string origin = path.filename().string();
  try {
    return parse(buf.str(), origin);
  } catch (const SceneError& e) {
    const std::string message = e.what();
    if (message.rfind(origin + ":", 0) == 0) throw;
    throw SceneError(origin + ": " + message);
  }
}

Tolerances scene_tolerances(const Scene& scene) {
  Tolerances t;
  const json& c = scene.config;
  t.zero = c.value("zero", t.zero);
  t.derivative = c.value("derivative", t.derivative);
  t.margin = c.value("margin", t.margin);
  t.nondegeneracy = c.value("nondegeneracy", t.nondegeneracy);
  t.unit_margin = c.value("unit_margin", t.unit_margin);
  t.grid = c.value("grid", t.grid);
  t.sphere_samples = c.value("sphere_samples", t.sphere_samples);
  t.seed = c.value("seed", t.seed);
  return t;
}

std::string emit_profile_table(const Profile& profile, std::size_t samples) {
  const double e2 = std::exp(2.0);
  const auto& p = profile.params();
  double lo = 0.0, hi = 1.0;
  std::vector<double> landmarks;
  switch (profile.kind()) {
    case ProfileKind::LogFoldInterp:
      hi = 2.0 * (e2 + 1.0);
      landmarks = {0.5, 1.0, e2, e2 + 1.0};
      break;
    case ProfileKind::RadialBump:
      hi = 2.25 * p[1] * p[1];
      landmarks = {p[0] * p[0], p[1] * p[1]};
      break;
    case ProfileKind::Step:
      lo = p[0] - 0.5 * (p[1] - p[0]);
      hi = p[1] + 0.5 * (p[1] - p[0]);
      landmarks = {p[0], p[1]};
      break;
    case ProfileKind::LogCutoffWeight:
      hi = 1.5 * p[1];
      landmarks = {p[0], p[1]};
      break;
  }
  std::vector<double> rows;
  for (std::size_t k = 0; k < samples; ++k)
    rows.push_back(lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(samples - 1));
  rows.insert(rows.end(), landmarks.begin(), landmarks.end());
  std::sort(rows.begin(), rows.end());
  rows.erase(std::unique(rows.begin(), rows.end()), rows.end());

  std::string out = "# profile " + profile.name() + " (" + to_string(profile.kind()) + ")\n";
  out += "# parameters " + profile.describe().dump() + "\n";
  out += "# columns r f(r) f'(r)\n";
  char line[96];
  for (double r : rows) {
    std::snprintf(line, sizeof line, "%.17g %.17g %.17g\n", r, profile.value(r), profile.derivative(r, 1));
    out += line;
  }
  return out;
}

namespace {

struct Workspace {
  std::map<std::string, FormEntry> forms;
  std::map<std::string, BivectorEntry> bivectors;
};

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

// Smallest |Pf| over a grid twice as fine per axis as the certificate grid, Z included.
double dense_min_abs_pfaffian(const BForm& omega, const Chart& chart, const Tolerances& tol, int factor,
                              std::size_t& points) {
  const FormSampler sample(omega);
  const auto grid = chart.grid_per_axis(static_cast<std::size_t>(factor) * per_axis_count(tol.grid, chart.dim()), true);
  points = grid.size();
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& p : grid) worst = std::min(worst, std::fabs(pfaffian(sample(p))));
  return worst;
}

class TaskRunner {
 public:
  TaskRunner(const Scene& scene, const RunOptions& options) : scene_(scene), opt_(options) {
    ws_.forms = scene.forms;
    ws_.bivectors = scene.bivectors;
  }

  /// Fills result and returns pass.
  bool run(const std::string& kind, const std::string& op, const json& task, json& out) {
    const Tolerances& tol = opt_.tol;
    if (kind == "verify") return verify(op, task, out, tol);
    if (kind == "check") return check(op, task, out);
    if (kind == "profile") return profile(op, task, out);
    return transform(op, task, out, tol);
  }

 private:
  const FormEntry& form(const json& task, const std::string& key) { return ws_.forms.at(task.at(key).get<std::string>()); }
  const BivectorEntry& bivector(const json& task, const std::string& key) {
    return ws_.bivectors.at(task.at(key).get<std::string>());
  }
  const Eigen::MatrixXd& matrix(const json& task, const std::string& key) {
    return scene_.matrices.at(task.at(key).get<std::string>());
  }
  const MapEntry& map(const json& task, const std::string& key) { return scene_.maps.at(task.at(key).get<std::string>()); }

  void store_form(const json& task, const Chart& chart, const BForm& f) {
    if (task.contains("output")) ws_.forms.insert_or_assign(task.at("output").get<std::string>(), FormEntry{chart, f});
  }
  void store_bivector(const json& task, const Chart& chart, const BBivector& b) {
    if (task.contains("output"))
      ws_.bivectors.insert_or_assign(task.at("output").get<std::string>(), BivectorEntry{chart, b});
  }

  bool verify(const std::string& op, const json& task, json& out, const Tolerances& tol) {
    if (op == "closed") {
      const FormEntry& f = form(task, "form");
      ZeroVerdict z{true, "exact", 0.0, 0, 0};
      const BForm d = f.form.degree() == f.chart.dim() ? BForm(f.form.frame(), 0) : b_d(f.form);
      if (!d.is_zero()) z = zero_test(d.coefficient_list(), f.chart.grid(tol.grid, true), tol.zero);
      out["closed"] = z.zero;
      out["method"] = z.method;
      out["max_abs"] = z.max_abs;
      return z.zero;
    }
    if (op == "log_symplectic") {
      Chart chart;
      BBivector pi(Frame::ordinary(1));
      if (task.contains("form")) {
        const FormEntry& f = form(task, "form");
        chart = f.chart;
        pi = dual_bivector(f.form, chart, tol).anchor();
      } else {
        const BivectorEntry& b = bivector(task, "bivector");
        chart = b.chart;
        pi = b.bivector.frame().is_ordinary() ? b.bivector : b.bivector.anchor();
      }
      const TransversalityReport r = log_symplectic_check(pi, chart, tol);
      out["report"] = r.to_json(chart, tol);
      return r.pass;
    }
    if (op == "duality_roundtrip") {
      const FormEntry& f = form(task, "form");
      const BBivector p = dual_bivector(f.form, f.chart, tol);
      const BForm back = invert_bivector(p, f.chart, tol);
      const BForm diff = back - f.form;
      ZeroVerdict z{true, "exact", 0.0, 0, 0};
      if (!diff.is_zero()) z = zero_test(diff.coefficient_list(), f.chart.grid(tol.grid, true), 1e-9);
      out["bivector"] = p.str();
      out["method"] = z.method;
      out["max_coefficient_error"] = z.max_abs;
      const TransversalityReport r = log_symplectic_check(p.anchor(), f.chart, tol);
      out["log_symplectic"] = r.to_json(f.chart, tol);
      return z.zero && r.pass;
    }
    if (op == "cosymplectic") {
      const FormEntry& f = form(task, "form");
      json comps = json::array();
      for (const auto& c : cosymplectic_extract(f.form, f.chart, tol)) {
        json j{{"x1", c.z}, {"theta", c.theta.str()}, {"sigma", c.sigma.str()}, {"margin", c.margin}};
        if (c.exact) j["x1_exact"] = to_string(*c.exact);
        comps.push_back(j);
      }
      out["components"] = comps;
      return true;
    }
    if (op == "bmap") {
      const MapEntry& m = map(task, "map");
      const Certificate c = validate_bmap(m.model, scene_.charts.at(m.source), tol);
      out["certificate"] = c.to_json();
      return c.pass();
    }
    if (op == "splitting") {
      const MapEntry& f = map(task, "map");
      const MapEntry& s = map(task, "section");
      const SplittingReport r = section_splitting_check(f.model, s.model, scene_.charts.at(s.source), tol);
      out["split"] = r.split;
      out["points"] = r.points;
      out["min_rank"] = r.min_rank;
      out["min_singular_value"] = r.min_singular_value;
      out["section_method"] = r.section_method;
      return r.split;
    }
    if (op == "retract") {
      RetractionInfo info;
      const Eigen::MatrixXd j = retract_to_acs(matrix(task, "matrix"), &info);
      out["j"] = matrix_json(j);
      out["residual"] = info.residual;
      out["refinement_steps"] = info.refinement_steps;
      return info.residual <= 1e-10;
    }
    if (op == "tame") {
      const TamingReport r = is_tame(matrix(task, "omega"), matrix(task, "t"), matrix(task, "j"));
      out["tame"] = r.tame;
      out["margin"] = r.margin;
      out["kernel_dim"] = r.kernel_dim;
      out["kernel_invariant"] = r.kernel_invariant;
      if (!r.reason.empty()) out["reason"] = r.reason;
      return r.tame;
    }
    // pair_lemma
    const PairLemmaReport r = verify_pair_lemma(matrix(task, "f"), matrix(task, "bf"), matrix(task, "rho_v"),
                                                matrix(task, "rho_w"), matrix(task, "v1"), matrix(task, "w1"));
    json hyps = json::array();
    for (const auto& h : r.hypotheses) hyps.push_back({{"name", h.name}, {"ok", h.ok}, {"detail", h.detail}});
    out["hypotheses"] = hyps;
    out["hypotheses_hold"] = r.hypotheses_hold;
    out["conclusion"] = r.conclusion;
    out["ker_bf_dim"] = r.ker_bf_dim;
    out["ker_f_dim"] = r.ker_f_dim;
    return r.hypotheses_hold && r.conclusion;
  }

  bool transform(const std::string& op, const json& task, json& out, const Tolerances& tol) {
    if (op == "thurston") return thurston(task, out, tol);
    if (op == "lefschetz-local") {
      LefschetzModel model;
      model.r0 = number_or(task, "r0", model.r0, "task");
      model.r1 = number_or(task, "r1", model.r1, "task");
      model.fiber_samples = static_cast<std::size_t>(integer_or(task, "fiber_samples", 512, "task"));
      if (task.contains("fiber_form")) model.fiber_form = form(task, "fiber_form").form;
      if (task.contains("fiber_primitive")) model.fiber_primitive = form(task, "fiber_primitive").form;
      if (task.contains("primitive")) model.primitive = form(task, "primitive").form;
      const LefschetzResult r = lefschetz_local_eta(model, tol);
      const double radius = 1.2 * model.r1;
      const Chart ball(4, std::vector<Interval>(4, Interval{-radius, radius}), std::vector<bool>(4, false), std::nullopt);
      store_form(task, ball, r.eta);
      out["eta"] = r.eta.str();
      out["sigma"] = r.sigma.str();
      out["bump"] = r.bump->describe();
      out["certificate"] = r.certificate.to_json();
      return r.certificate.pass();
    }
    if (op == "log2fold") {
      const FormEntry& f = form(task, "form");
      FoldOptions o;
      if (task.contains("collar_width")) o.collar_width = number_or(task, "collar_width", 0.0, "task");
      const FoldResult r = log_to_folded(f.form, f.chart, tol, o);
      store_form(task, f.chart, r.omega);
      out["omega"] = r.omega.str();
      out["collar_width"] = r.collar_width;
      out["scale"] = r.scale;
      out["profile"] = r.profile->describe();
      out["certificate"] = r.certificate.to_json();
      return r.certificate.pass();
    }
    if (op == "fold2log") {
      const FormEntry& f = form(task, "form");
      BForm theta = task.contains("theta") ? form(task, "theta").form : BForm(f.chart.frame(), 1);
      if (task.contains("theta_from")) {
        const FormEntry& src = form(task, "theta_from");
        const auto comps = cosymplectic_extract(src.form, src.chart, tol);
        if (comps.empty()) throw GeometryError("theta_from: the form has no singular locus");
        theta = comps.front().theta;
      }
      UnfoldOptions o;
      if (task.contains("collar_width")) o.collar_width = number_or(task, "collar_width", 0.0, "task");
      o.r0 = number_or(task, "r0", o.r0, "task");
      o.r1 = number_or(task, "r1", o.r1, "task");
      const UnfoldResult r = folded_to_log(f.form, theta, f.chart, tol, o);
      store_form(task, f.chart, r.omega);
      out["omega"] = r.omega.str();
      out["theta"] = theta.str();
      out["t"] = to_string(r.t);
      out["weight"] = r.weight->describe();
      out["certificate"] = r.certificate.to_json();
      out["log_symplectic"] = r.log_check.to_json(f.chart, tol);
      return r.certificate.pass() && r.log_check.pass;
    }
    if (op == "dual_bivector") {
      const FormEntry& f = form(task, "form");
      const BBivector p = dual_bivector(f.form, f.chart, tol);
      store_bivector(task, f.chart, p);
      out["bivector"] = p.str();
      return true;
    }
    if (op == "invert_bivector") {
      const BivectorEntry& b = bivector(task, "bivector");
      const BForm w = invert_bivector(b.bivector, b.chart, tol);
      store_form(task, b.chart, w);
      out["form"] = w.str();
      return true;
    }
    if (op == "anchor") {
      const BivectorEntry& b = bivector(task, "bivector");
      const BBivector a = b.bivector.anchor();
      store_bivector(task, b.chart, a);
      out["bivector"] = a.str();
      return true;
    }
    // to_ordinary
    const FormEntry& f = form(task, "form");
    const BForm o = to_ordinary(f.form);
    store_form(task, f.chart, o);
    out["form"] = o.str();
    return true;
  }

  bool thurston(const json& task, json& out, const Tolerances& tol) {
    const MapEntry& m = map(task, "map");
    const Chart& total = scene_.charts.at(m.source);
    const Chart& base = scene_.charts.at(m.target);
    const auto& j = scene_.structures.at(task.at("acs").get<std::string>());
    if (j.size() != static_cast<std::size_t>(total.dim()))
      throw std::invalid_argument("almost complex structure has the wrong size");
    ThurstonInput in{m.model, total, base, form(task, "omega_base").form, form(task, "reference").form, {},
                     acs_from_exprs(j), number_or(task, "t_max", 1.0, "task")};
    const ParseContext ctx{&scene_.profiles, base.dim()};
    for (std::size_t c = 0; c < task.at("cover").size(); ++c) {
      const json& cd = task.at("cover")[c];
      CoverDatum d{cd.value("name", "cover" + std::to_string(c + 1)),
                   cd.contains("box") ? parse_box(cd.at("box"), "cover") : std::vector<Interval>{},
                   parse_expr_at(cd.at("weight").get<std::string>(), ctx, "cover.weight"), form(cd, "eta").form,
                   form(cd, "alpha").form};
      in.cover.push_back(std::move(d));
    }
    const ThurstonResult r = thurston_assemble(in, tol);
    store_form(task, total, r.omega);
    const int factor = static_cast<int>(integer_or(task, "dense_factor", 2, "task"));
    std::size_t points = 0;
    const double dense = dense_min_abs_pfaffian(r.omega, total, tol, factor, points);
    out["omega"] = r.omega.str();
    out["eta"] = r.eta.str();
    out["t"] = to_string(r.t);
    out["t_value"] = to_double(r.t);
    out["certificate"] = r.certificate.to_json();
    out["dense_check"] = {{"factor", factor}, {"points", points}, {"min_abs_pfaffian", dense},
                          {"threshold", tol.nondegeneracy}, {"ok", dense >= tol.nondegeneracy}};
    return r.certificate.pass() && dense >= tol.nondegeneracy;
  }

  bool check(const std::string& op, const json& task, json& out) {
    bool verdict = false;
    if (op == "surface") {
      Z2Cycle z;
      if (task.contains("z"))
        for (const auto& e : task.at("z")) z.edges.push_back({e[0].get<int>(), e[1].get<int>()});
      const SurfaceReport r = surface_log_admissibility(scene_.surfaces.at(task.at("surface").get<std::string>()), z);
      out["report"] = r.to_json();
      verdict = r.admissible;
    } else {
      const CohomologyRing& ring = scene_.rings.at(task.at("ring").get<std::string>());
      if (op == "obstruction_a") {
        const int n = static_cast<int>(integer_or(task, "n", ring.n.value_or(2), "task"));
        const ObstructionAReport r = obstruction_a(ring, n, static_cast<int>(integer_or(task, "box", 10, "task")));
        out["report"] = r.to_json();
        verdict = r.witness.has_value();
      } else {
        const ObstructionBReport r = obstruction_b(ring);
        out["report"] = r.to_json();
        verdict = !r.obstructed;
      }
    }
    out["verdict"] = verdict;
    if (!task.contains("expect")) return true;
    out["expected"] = task.at("expect").get<bool>();
    return verdict == task.at("expect").get<bool>();
  }

  bool profile(const std::string& op, const json& task, json& out) {
    const ProfilePtr p = scene_.profiles.find(task.at("target").get<std::string>());
    const std::size_t samples = static_cast<std::size_t>(integer_or(task, "samples", 257, "task"));
    const ProfileValidation v = validate_profile(*p, samples);
    out["profile"] = p->describe();
    out["validation"] = {{"ok", v.ok},
                         {"samples", v.samples},
                         {"min_increment", v.min_increment},
                         {"min_value", v.min_value},
                         {"max_value", v.max_value},
                         {"max_fd_rel_error", v.max_fd_rel_error},
                         {"problems", v.problems}};
    if (op == "table") {
      const std::string file = task.at("file").get<std::string>();
      const std::string text = emit_profile_table(*p, samples);
      const std::filesystem::path path = opt_.table_dir / file;
      std::ofstream os(path, std::ios::binary);
      if (!os) throw std::runtime_error("cannot write " + path.string());
      os << text;
      out["file"] = file;
      out["rows"] = std::count(text.begin(), text.end(), '\n') - 3;
    }
    return v.ok;
  }

  const Scene& scene_;
  const RunOptions& opt_;
  Workspace ws_;
};

}  // namespace

Report run(const Scene& scene, const RunOptions& options) {
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  Report report;
  json tasks = json::array();
  TaskRunner runner(scene, options);
  std::size_t passed = 0, failed = 0;
  for (std::size_t i = 0; i < scene.tasks.size(); ++i) {
    const json& task = scene.tasks[i];
    const auto [kind, op] = task_kind(task, "tasks[" + std::to_string(i) + "]");
    if (options.only && *options.only != kind) continue;
    json entry{{"name", task_name(task, i)}, {"kind", kind}, {"op", op}};
    json result = json::object();
    const auto t0 = clock::now();
    bool pass = false;
    try {
      pass = runner.run(kind, op, task, result);
    } catch (const ConstructionError& e) {
      entry["error"] = e.what();
      if (!e.point().empty()) entry["error_point"] = e.point();
      if (!e.direction().empty()) entry["error_direction"] = e.direction();
    } catch (const GeometryError& e) {
      entry["error"] = e.what();
      if (!e.point().empty()) entry["error_point"] = e.point();
    } catch (const std::exception& e) {
      entry["error"] = e.what();
    }
    entry["pass"] = pass;
    entry["result"] = result;
    if (options.timing) entry["wall_clock_s"] = std::chrono::duration<double>(clock::now() - t0).count();
    (pass ? passed : failed)++;
    tasks.push_back(entry);
  }
  report.json = {{"tool", "logsym"},
                 {"version", kVersion},
                 {"scene", scene.origin},
                 {"filter", options.only.value_or("all")},
                 {"config", options.tol.describe()},
                 {"tasks", tasks},
                 {"summary", {{"tasks", passed + failed}, {"passed", passed}, {"failed", failed}}}};
  if (options.timing) report.json["wall_clock_s"] = std::chrono::duration<double>(clock::now() - start).count();
  report.exit_code = failed ? 2 : 0;
  return report;
}

}  // namespace logsym
