#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <unistd.h>

#include "logsym/bgeometry.hpp"
#include "logsym/constructions.hpp"
#include "logsym/scene.hpp"
#include "logsym/taming.hpp"
#include "logsym/topology.hpp"
#include "support/linalg_data.hpp"
#include "support/random_forms.hpp"
#include "support/scenes.hpp"

using namespace logsym;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// 1. b_d∘b_d = 0 and the graded Leibniz rule, exact normal-form zero.
Outcome b_complex() {
  std::mt19937_64 rng(101);
  int forms = 0, failures = 0;
  for (int dim : {2, 4, 6}) {
    std::uniform_int_distribution<int> deg(0, dim - 2);
    for (int trial = 0; trial < 100; ++trial) {
      const Frame fr = trial % 2 ? Chart::torus(dim).frame() : Frame::standard(dim);
      const int p = deg(rng);
      std::uniform_int_distribution<int> other(0, dim - 1 - p);
      const int q = other(rng);
      const BForm a = testing::random_form(rng, fr, p);
      const BForm b = testing::random_form(rng, fr, q);
      ++forms;
      if (!b_d(b_d(a)).is_zero()) ++failures;
      const BForm lhs = b_d(wedge(a, b));
      const BForm rhs = wedge(b_d(a), b) + Expr(p % 2 == 0 ? 1 : -1) * wedge(a, b_d(b));
      if (!(lhs - rhs).is_zero()) ++failures;
    }
  }
  return {failures == 0 && forms == 300, std::to_string(forms) + " forms, " + std::to_string(failures) + " failures"};
}

// 2. invert(dual(ω)) = ω to 1e-9 on samples; anchor image passes the log-symplectic check.
Outcome duality() {
  std::mt19937_64 rng(202);
  Tolerances tol;
  tol.grid = 600;
  int count = 0, log_fail = 0;
  double worst = 0.0;
  for (int k = 0; k < 200; ++k) {
    const int dim = 2 + 2 * (k % 3);
    const Chart chart = (k / 3) % 2 ? Chart::torus(dim) : Chart::standard(dim);
    const BForm omega = testing::random_bsymplectic(rng, chart, 200);
    const BBivector pi = dual_bivector(omega, chart, tol);
    const BForm back = invert_bivector(pi, chart, tol);
    const BForm diff = back - omega;
    if (!diff.is_zero()) {
      ExprProgram prog(diff.coefficient_list());
      for (const auto& p : chart.grid(300, true))
        for (double v : prog.evaluate(p)) worst = std::max(worst, std::fabs(v));
    }
    if (!log_symplectic_check(pi.anchor(), chart, tol).pass) ++log_fail;
    ++count;
  }
  return {count == 200 && worst <= 1e-9 && log_fail == 0,
          std::to_string(count) + " forms, max coefficient error " + fmt("%.2e", worst) + ", log-check failures " +
              std::to_string(log_fail)};
}

// 3. Retraction to complex structures.
Outcome retraction() {
  std::mt19937_64 rng(303);
  double square = 0.0, idem = 0.0, equi = 0.0, fixed = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const int n = 2 * (1 + k % 4);
    const Eigen::MatrixXd a = testing::random_eigenfree(rng, n);
    const Eigen::MatrixXd j = retract_to_acs(a);
    square = std::max(square, (j * j + Eigen::MatrixXd::Identity(n, n)).norm());
    idem = std::max(idem, (retract_to_acs(j) - j).norm());
  }
  for (int k = 0; k < 200; ++k) {
    const int m = 2 * (1 + k % 2), extra = 2 * (k % 3);
    const testing::CommutingTriple c = testing::random_commuting(rng, m, extra);
    equi = std::max(equi, (c.t * retract_to_acs(c.a) - retract_to_acs(c.b) * c.t).norm() / c.t.norm());
  }
  for (int k = 0; k < 100; ++k) {
    const int n = 2 * (1 + k % 4);
    const Eigen::MatrixXd j = testing::random_complex_structure(rng, n);
    fixed = std::max(fixed, (retract_to_acs(j) - j).norm());
  }
  return {square <= 1e-10 && idem <= 1e-10 && equi <= 1e-9 && fixed <= 1e-12,
          "|j^2+I| " + fmt("%.1e", square) + ", idempotence " + fmt("%.1e", idem) + ", equivariance/|T| " +
              fmt("%.1e", equi) + ", fixed " + fmt("%.1e", fixed)};
}

// 4. Thurston certificate on T²×T² with an independent 2× dense determinant check.
Outcome thurston() {
  Tolerances tol;  // 10⁴ base points × 32 directions
  const ThurstonInput in = testing::torus_product_thurston();
  const ThurstonResult r = thurston_assemble(in, tol);
  const double margin = r.certificate.margin("search.min_sampled_taming");
  const std::size_t points = r.certificate.grid().value("points", std::size_t{0});
  const FormSampler sample(r.omega);
  const std::size_t per_axis = 2 * per_axis_count(tol.grid, 4);
  double det = HUGE_VAL;
  std::size_t dense = 0;
  for (const auto& p : in.total.grid_per_axis(per_axis, true)) {
    det = std::min(det, sample(p).determinant());
    ++dense;
  }
  double det_z = HUGE_VAL;
  for (const auto& p : in.total.z_grid(per_axis)) det_z = std::min(det_z, sample(p).determinant());
  const bool ok = r.certificate.pass() && r.t > 0 && margin > 0 && points >= 10000 && tol.sphere_samples >= 32 &&
                  det > 0 && det_z > 0;
  return {ok, "t = " + to_string(r.t) + ", taming margin " + fmt("%.4f", margin) + " on " + std::to_string(points) +
                  "x" + std::to_string(tol.sphere_samples) + ", min b-det " + fmt("%.4f", det) + " on " +
                  std::to_string(dense) + " points, on Z " + fmt("%.4f", det_z)};
}

// 5. Lefschetz local model: closed, equals σ inside r0, positive on regular fiber tangent planes.
Outcome lefschetz() {
  Tolerances tol;
  const Frame fr = Frame::ordinary(4);
  LefschetzModel model;
  model.fiber_form = parse_form("2*e{1,2} + 2*e{3,4} + (3/10*x1*x3)*e{1,3}", fr, 2, {});
  const LefschetzResult r = lefschetz_local_eta(model, tol);
  const bool closed = b_d(r.eta).is_zero();
  const bool inner = r.eta.map([&](const Expr& c) { return replace_profile(c, r.bump->name(), Rational(0)); }) == r.sigma;

  std::mt19937_64 rng(505);
  std::normal_distribution<double> g(0.0, 1.0);
  const Eigen::MatrixXd j = complex_structure_matrix(4);
  const FormSampler eta(r.eta), sigma(r.sigma);
  double worst = HUGE_VAL, inner_gap = 0.0;
  int fibers = 0;
  for (int s = 0; s < 600; ++s) {
    Eigen::Vector4d p(g(rng), g(rng), g(rng), g(rng));
    p *= 1.2 * model.r1 * (s + 1) / 600.0 / p.norm();
    Eigen::MatrixXd jac(2, 4);
    jac << 2 * p(0), -2 * p(1), 2 * p(2), -2 * p(3),  //
        2 * p(1), 2 * p(0), 2 * p(3), 2 * p(2);
    const Eigen::MatrixXd k = kernel_basis(jac);
    if (k.cols() != 2) continue;
    ++fibers;
    const Eigen::VectorXd v = k.col(0);
    const std::vector<double> pt(p.data(), p.data() + 4);
    worst = std::min(worst, v.dot(eta(pt) * (j * v)));
    if (p.norm() <= model.r0) inner_gap = std::max(inner_gap, (eta(pt) - sigma(pt)).cwiseAbs().maxCoeff());
  }
  return {closed && inner && inner_gap == 0.0 && fibers >= 500 && worst > 0 && r.certificate.pass(),
          std::string("closed ") + (closed ? "exact" : "no") + ", equals sigma inside r0 " + (inner ? "exact" : "no") +
              ", min fiber area " + fmt("%.4f", worst) + " on " + std::to_string(fibers) + " fibers"};
}

// 6. log → folded → log on the sin torus and the Darboux collar.
Outcome conversions() {
  Tolerances tol;
  std::vector<std::pair<Chart, BForm>> cases;
  const Chart t2 = Chart::torus(2);
  cases.emplace_back(t2, parse_form("(2*pi)*e{1,2}", t2.frame(), 2, {}));
  const Chart c4 = Chart::standard(4);
  cases.emplace_back(c4, parse_form("e{1,2} + e{3,4}", c4.frame(), 2, {}));
  bool ok = true;
  std::string detail;
  for (const auto& [chart, omega] : cases) {
    const auto collar = cosymplectic_extract(omega, chart, tol);
    const FoldResult fold = log_to_folded(omega, chart, tol);
    // Independent fold oracle: top power from the numeric Pfaffian, normal derivative by central difference.
    const FormSampler folded(fold.omega);
    double max_h = 0.0, min_dh = HUGE_VAL;
    for (auto p : chart.z_grid(per_axis_count(tol.grid, chart.dim() - 1))) {
      max_h = std::max(max_h, std::fabs(pfaffian(folded(p))));
      const double x1 = p[0], step = 1e-5;
      p[0] = x1 + step;
      const double up = pfaffian(folded(p));
      p[0] = x1 - step;
      const double down = pfaffian(folded(p));
      min_dh = std::min(min_dh, std::fabs(up - down) / (2 * step));
    }
    const double restricted = fold.certificate.margin("restricted_power_margin");
    const UnfoldResult back = folded_to_log(fold.omega, collar.front().theta, chart, tol);
    const bool same_z = back.log_check.pass && back.log_check.extra_zeros.empty();

    const FormSampler got(back.omega), want(omega), got_fold(fold.omega), want_fold(to_ordinary(omega));
    ExprProgram h({chart.frame().h});
    double gap = 0.0, fold_gap = 0.0;
    for (const auto& p : chart.grid(tol.grid, true)) {
      if (std::fabs(h.evaluate(p)[0]) < fold.collar_width) continue;
      gap = std::max(gap, (got(p) - want(p)).cwiseAbs().maxCoeff());
      fold_gap = std::max(fold_gap, (got_fold(p) - want_fold(p)).cwiseAbs().maxCoeff());
    }
    const bool exact = fold.certificate.to_json()["checks"]["outside_collar_exact"]["ok"] == true;
    const bool case_ok = fold.certificate.pass() && back.certificate.pass() && max_h <= 1e-10 && min_dh >= 1e-6 &&
                         restricted > 0 && same_z && gap <= 1e-9 && fold_gap <= 1e-9;
    ok = ok && case_ok;
    detail += (detail.empty() ? "" : "; ") + std::string("dim ") + std::to_string(chart.dim()) + ": |h|_Z " +
              fmt("%.1e", max_h) + ", |d1 h|_Z " + fmt("%.3g", min_dh) + ", power margin " + fmt("%.3g", restricted) +
              ", same Z " + (same_z ? "yes" : "no") + ", outside gap " + fmt("%.1e", std::max(gap, fold_gap)) +
              (exact ? " (fold exact)" : "");
  }
  return {ok, detail};
}

// 7. Topological verdicts, exact and invariant under unimodular changes and relabelings.
Outcome topology() {
  std::mt19937 rng(707);
  const auto rp2 = TriangulatedSurface::projective_plane();
  const auto torus = TriangulatedSurface::torus(3, 3);
  auto relabel = [&](const TriangulatedSurface& s) {
    std::vector<int> perm(static_cast<std::size_t>(s.vertex_count));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    TriangulatedSurface out{s.vertex_count, {}};
    std::bernoulli_distribution flip(0.5);
    for (const auto& t : s.triangles) {
      std::array<int, 3> u{perm[static_cast<std::size_t>(t[0])], perm[static_cast<std::size_t>(t[1])],
                           perm[static_cast<std::size_t>(t[2])]};
      if (flip(rng)) std::swap(u[1], u[2]);
      out.triangles.push_back(u);
    }
    return out;
  };
  auto change = [&](const std::vector<std::vector<long>>& q) {
    const int n = static_cast<int>(q.size());
    std::vector<std::vector<long>> p(q.size(), std::vector<long>(q.size(), 0));
    for (int i = 0; i < n; ++i) p[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] = 1;
    std::uniform_int_distribution<int> idx(0, n - 1), coef(-2, 2);
    for (int step = 0; step < 4; ++step) {
      const int i = idx(rng), j = idx(rng);
      if (i == j) continue;
      const int c = coef(rng);
      for (int r = 0; r < n; ++r) p[static_cast<std::size_t>(r)][static_cast<std::size_t>(j)] += c * p[static_cast<std::size_t>(r)][static_cast<std::size_t>(i)];
    }
    std::vector<std::vector<long>> out(q.size(), std::vector<long>(q.size(), 0));
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c)
          for (int d = 0; d < n; ++d)
            out[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] +=
                p[static_cast<std::size_t>(c)][static_cast<std::size_t>(a)] * q[static_cast<std::size_t>(c)][static_cast<std::size_t>(d)] *
                p[static_cast<std::size_t>(d)][static_cast<std::size_t>(b)];
    return out;
  };
  const std::vector<std::vector<long>> definite{{1, 0}, {0, 1}}, hyperbolic{{0, 1}, {1, 0}};
  std::vector<std::vector<long>> t4(6, std::vector<long>(6, 0));
  for (int k = 0; k < 3; ++k) t4[static_cast<std::size_t>(2 * k)][static_cast<std::size_t>(2 * k + 1)] = t4[static_cast<std::size_t>(2 * k + 1)][static_cast<std::size_t>(2 * k)] = 1;

  bool ok = !surface_log_admissibility(rp2, {}).admissible && surface_log_admissibility(torus, {}).admissible &&
            !obstruction_a(CohomologyRing{{}, 2}, 2).witness && obstruction_a(CohomologyRing{t4, 2}, 2).witness &&
            obstruction_b(CohomologyRing{definite, 2}).obstructed && obstruction_b(CohomologyRing{definite, 2}).definite &&
            obstruction_b(CohomologyRing{hyperbolic, 2}).has_witness &&
            !obstruction_b(CohomologyRing{hyperbolic, 2}).obstructed;
  const bool base_ok = ok;
  int changes = 0;
  for (int k = 0; k < 50; ++k) {
    ok = ok && !surface_log_admissibility(relabel(rp2), {}).admissible;
    ok = ok && surface_log_admissibility(relabel(torus), {}).admissible;
    const auto d = obstruction_b(CohomologyRing{change(definite), 2});
    const auto h = obstruction_b(CohomologyRing{change(hyperbolic), 2});
    ok = ok && d.obstructed && d.definite && !d.has_witness;
    ok = ok && h.has_witness && !h.obstructed && h.rational_witness &&
         CohomologyRing{change(hyperbolic), 2}.b2() == 2;
    const auto qt = change(t4);
    ok = ok && obstruction_a(CohomologyRing{qt, 2}, 2).witness.has_value();
    const auto w = obstruction_b(CohomologyRing{qt, 2});
    ok = ok && w.rational_witness && CohomologyRing{qt, 2}.form(*w.rational_witness, *w.rational_witness) == 0;
    ++changes;
  }
  return {ok, std::string("paper verdicts ") + (base_ok ? "match" : "differ") + ", " + std::to_string(changes) +
                  " unimodular changes and relabelings"};
}

// 8. Pair lemma on generated and mutated tuples.
Outcome pair_lemma() {
  std::mt19937_64 rng(808);
  int pos = 0, neg = 0;
  for (int k = 0; k < 100; ++k) {
    const auto d = testing::random_pair_data(rng);
    const auto r = verify_pair_lemma(d.f, d.bf, d.rho_v, d.rho_w, d.v1, d.w1);
    if (r.hypotheses_hold && r.conclusion) ++pos;
  }
  using testing::PairMutation;
  const PairMutation kinds[] = {PairMutation::Commutativity, PairMutation::ImageV, PairMutation::ImageW,
                                PairMutation::Quotient, PairMutation::Kernel};
  for (int k = 0; k < 100; ++k) {
    const PairMutation m = kinds[k % 5];
    const auto d = testing::random_pair_data(rng, m);
    const auto r = verify_pair_lemma(d.f, d.bf, d.rho_v, d.rho_w, d.v1, d.w1);
    const auto failed = r.failed();
    if (!r.hypotheses_hold && failed.size() == 1 && failed.front() == testing::mutation_hypothesis(m)) ++neg;
  }
  return {pos == 100 && neg == 100,
          std::to_string(pos) + "/100 accepted, " + std::to_string(neg) + "/100 negatives flag the mutated hypothesis"};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

int cli(const std::string& args) {
  const std::string cmd = "\"" + std::string(LOGSYM_CLI) + "\" " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// 9. Byte-identical reruns of the example suite and the exit-code contract.
Outcome cli_determinism() {
  const fs::path root = fs::temp_directory_path() / ("logsym_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(root / "a");
  fs::create_directories(root / "b");
  std::vector<std::pair<fs::path, int>> cases;
  for (const auto& e : fs::directory_iterator(SCENES_DIR))
    if (e.path().extension() == ".json") cases.emplace_back(e.path(), 0);
  const std::size_t examples = cases.size();
  for (const auto& e : fs::directory_iterator(CONTRACT_DIR)) {
    const std::string name = e.path().filename().string();
    if (name.size() > 5 && name.rfind("exit", 0) == 0) cases.emplace_back(e.path(), name[4] - '0');
  }
  std::sort(cases.begin(), cases.end());
  int identical = 0, codes = 0;
  for (const auto& [path, expected] : cases) {
    const std::string report = path.stem().string() + ".json";
    const int first = cli("run \"" + path.string() + "\" --seed 11 --out \"" + (root / "a" / report).string() + "\"");
    const int second = cli("run \"" + path.string() + "\" --seed 11 --out \"" + (root / "b" / report).string() + "\"");
    if (first == expected && second == expected) ++codes;
    if (expected != 1 && slurp(root / "a" / report) == slurp(root / "b" / report) && !slurp(root / "a" / report).empty())
      ++identical;
  }
  const std::size_t with_reports = static_cast<std::size_t>(
      std::count_if(cases.begin(), cases.end(), [](const auto& c) { return c.second != 1; }));
  fs::remove_all(root);
  return {codes == static_cast<int>(cases.size()) && static_cast<std::size_t>(identical) == with_reports &&
              cases.size() >= 20,
          std::to_string(identical) + "/" + std::to_string(with_reports) + " reports identical (" +
              std::to_string(examples) + " example scenes), exit codes " + std::to_string(codes) + "/" +
              std::to_string(cases.size())};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"b-complex axioms", b_complex},          {"duality roundtrip", duality},
      {"retraction", retraction},               {"Thurston certificate", thurston},
      {"Lefschetz local model", lefschetz},     {"log/folded conversions", conversions},
      {"topology verdicts", topology},          {"pair lemma", pair_lemma},
      {"CLI determinism", cli_determinism}};
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s %zu %s: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  return failed ? 1 : 0;
}
