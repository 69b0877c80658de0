// Acceptance checks: one PASS/FAIL line per criterion.
//
//   qab_acceptance [--criterion K]... [--configs DIR] [--runs DIR]
//
// Criteria 6, 7 and 11 read the stored census and Langevin runs (hours of
// compute); their manifests must match the shipped configs. Criterion 12
// re-executes stored tasks and compares bytes.

#include "qab/harness.hpp"
#include "qab/instance.hpp"
#include "qab/langevin.hpp"
#include "qab/meanfield.hpp"
#include "qab/stats.hpp"
#include "qab/textio.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace qab;
namespace fs = std::filesystem;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double x, int prec = 4) {
  char b[64];
  std::snprintf(b, sizeof(b), "%.*g", prec, x);
  return b;
}

std::string g_configs, g_runs;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("qab_acceptance_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// Runs a shipped config into a scratch directory.
RunRecord run_shipped(const std::string& file, const std::string& tag) {
  auto c = load_config((fs::path(g_configs) / file).string());
  c.output = scratch(tag).string();
  return run_experiment(c);
}

const ReportLine* find_line(const Report& r, const std::string& q) {
  for (const auto& l : r.lines)
    if (l.quantity == q) return &l;
  return nullptr;
}

// A stored run is usable when it is complete and was produced by the shipped config.
std::string stored_run_problem(const std::string& file, RunRecord* out) {
  const auto c = load_config((fs::path(g_configs) / file).string());
  const fs::path dir = fs::path(g_runs) / c.output;
  if (!fs::exists(dir / "manifest.json"))
    return "no stored run at " + dir.string() + " (qab run " + (fs::path(g_configs) / file).string() + ")";
  *out = load_record(dir.string());
  if (out->config_hash != config_hash(c)) return "stored run at " + dir.string() + " has a different config";
  if (!out->complete) return "stored run at " + dir.string() + " is incomplete";
  if (out->failures) return "stored run has " + std::to_string(out->failures) + " failed task(s)";
  return "";
}

Outcome c1_classical_oracle() {
  double worst = 0.0;
  std::size_t n = 0;
  for (Eigen::Index ns : {8, 12, 16, 20})
    for (std::uint64_t s = 0; s < 100; ++s, ++n) {
      const auto inst = generate(ns, Disorder::gaussian, derive_seed(1, "acceptance-classical", std::uint64_t(ns), s));
      const double a = solve_classical(inst).e0, b = brute_force_classical(inst).e0;
      worst = std::max(worst, std::abs(a - b) / std::abs(b));
    }
  return {worst <= 1e-12, "max relative energy difference " + fmt(worst) + " over " + std::to_string(n) +
                              " instances (tolerance 1e-12)"};
}

Outcome gap_slope(const std::string& file, const std::string& tag, double expected, double tol) {
  const auto rec = run_shipped(file, tag);
  const auto rep = report(rec);
  const ReportLine* l = nullptr;
  for (const auto& x : rep.lines)
    if (x.quantity.rfind("slope", 0) == 0 && x.quantity.find("(gaussian)") != std::string::npos) l = &x;
  if (!l) return {false, "no slope in report: " + format_report(rep)};
  std::string detail = "slope " + fmt(l->observed) + " [95% CI " + fmt(l->ci_lo) + ", " + fmt(l->ci_hi) + "], expected " +
                       fmt(expected) + " +- " + fmt(tol) + "; medians";
  for (const auto& x : rep.lines)
    if (x.quantity.rfind("median", 0) == 0) detail += " " + fmt(x.observed);
  return {std::abs(l->observed - expected) <= tol, detail};
}

Outcome c2_classical_gap() {
  return gap_slope("classical.yaml", "classical", -1.0, 0.2);
}

Outcome c3_meanfield() {
  const double m0 = magnetization(0.0), want = std::sqrt(2.0 / std::numbers::pi);
  const bool a = std::abs(m0 - want) <= 1e-8;
  const bool b = magnetization(1.0) == 0.0 && magnetization(1.5) == 0.0;
  std::vector<double> x, y;
  for (double e = 1e-4; e <= 1e-3 * 1.0001; e *= std::pow(10.0, 0.25)) {
    x.push_back(std::log(e));
    y.push_back(std::log(magnetization(1.0 - e)));
  }
  const double slope = fit_line(Eigen::Map<Eigen::VectorXd>(x.data(), long(x.size())),
                                Eigen::Map<Eigen::VectorXd>(y.data(), long(y.size())))
                           .slope;
  const bool c = std::abs(slope - 0.5) <= 0.02;
  const double g = 0.01, n = 1.0;
  const double ratio = effective_mass(g, n) * 4.0 * std::sqrt(std::numbers::pi) * g * g / n;
  const bool d = std::abs(ratio - 1.0) <= 0.01;
  return {a && b && c && d, "m(0) - sqrt(2/pi) = " + fmt(m0 - want) + (a ? " ok" : " FAIL") +
                                "; m(1) = m(1.5) = 0" + (b ? " ok" : " FAIL") + "; slope of ln m vs ln(1 - gamma) " +
                                fmt(slope) + (c ? " ok" : " FAIL") + "; M 4 sqrt(pi) gamma^2 / N at gamma 0.01 = " +
                                fmt(ratio, 6) + (d ? " ok" : " FAIL (expected 1 +- 0.01)")};
}

Outcome c4_qcp() {
  return gap_slope("qcp.yaml", "qcp", -1.0 / 3.0, 0.05);
}

Outcome c5_glass() {
  return gap_slope("glass.yaml", "glass", -0.25, 0.05);
}

Outcome c6_census() {
  RunRecord rec;
  if (const auto p = stored_run_problem("census.yaml", &rec); !p.empty()) return {false, p};
  const auto rep = report(rec);
  const ReportLine* g = find_line(rep, "alpha: mean events vs ln N (gaussian)");
  const ReportLine* b = find_line(rep, "alpha: mean events vs ln N (bimodal)");
  if (!g || !b) return {false, "alpha fits missing: " + format_report(rep)};
  const bool ok_g = std::abs(g->observed - 0.15) <= 0.05;
  const bool ok_b = b->ci_lo <= 0.0 && b->ci_hi >= 0.0;
  std::string means;
  for (const auto& l : rep.lines)
    if (l.quantity.rfind("mean events", 0) == 0 && l.quantity.find("gaussian") != std::string::npos)
      means += " " + fmt(l.observed);
  return {ok_g && ok_b, "gaussian alpha " + fmt(g->observed) + " [" + fmt(g->ci_lo) + ", " + fmt(g->ci_hi) +
                            "] expected 0.15 +- 0.05" + (ok_g ? " ok" : " FAIL") + "; mean events per N" + means +
                            "; bimodal slope " + fmt(b->observed) + " [" + fmt(b->ci_lo) + ", " + fmt(b->ci_hi) + "]" +
                            (ok_b ? " ok" : " FAIL")};
}

Outcome c7_exponent() {
  RunRecord rec;
  if (const auto p = stored_run_problem("census.yaml", &rec); !p.empty()) return {false, p};
  std::vector<InstanceEvents> gauss;
  for (const auto& r : read_census(rec.dir))
    if (r.dist == Disorder::gaussian) gauss.push_back(r);
  try {
    const auto f = fit_action_exponent(gauss);
    return {std::abs(f.slope - 0.75) <= 0.1, "slope " + fmt(f.slope) + " [" + fmt(f.ci_lo) + ", " + fmt(f.ci_hi) +
                                                 "] over " + std::to_string(f.n_points) +
                                                 " events, expected 0.75 +- 0.1"};
  } catch (const std::exception& e) {
    return {false, std::string("fit impossible: ") + e.what()};
  }
}

Outcome c8_persistence() {
  std::vector<double> hz;
  for (double t = 25.0; t <= 3200.0; t *= 2.0) hz.push_back(t);
  PersistenceOptions opt;
  opt.fit_from = 50.0;
  const auto r = persistence_check(100000, hz, derive_seed(1, "acceptance-persistence"), opt);
  return {std::abs(r.exponent - 0.25) <= 0.02, "exponent " + fmt(r.exponent) + " +- " + fmt(r.exponent_se) +
                                                   " over " + std::to_string(r.n_paths) +
                                                   " paths, expected 0.25 +- 0.02; S(2T)/S(T) " + fmt(r.doubling_ratio)};
}

Outcome c9_equilibrium() {
  AiryPotentialTable t;
  try {
    t = build_airy_table(-6.0, 8.0, 14001);
  } catch (const std::exception& e) {
    return {false, std::string("psi not positive on [-6, 8]: ") + e.what()};
  }
  double psi_min = 1e300;
  for (Eigen::Index i = 0; i < t.nu.size(); ++i) psi_min = std::min(psi_min, airy_psi(t.nu[i]));
  const auto ks = fokker_planck_check(t, 100000, 1.0, 1e-3, derive_seed(1, "acceptance-equilibrium"));
  return {psi_min > 0.0 && ks.statistic < 0.02, "min psi on [-6, 8] " + fmt(psi_min) + "; KS " + fmt(ks.statistic) +
                                                    " at 1e5 samples after tau = 1 (limit 0.02)"};
}

Outcome c10_xcheck() {
  const auto rec = run_shipped("xcheck.yaml", "xcheck");
  if (rec.failures) return {false, std::to_string(rec.failures) + " xcheck task(s) failed"};
  const auto g = read_csv((fs::path(rec.dir) / "gammas.csv").string());
  const auto c = read_csv((fs::path(rec.dir) / "comparison.csv").string());
  std::map<long long, std::vector<double>> err, loc;
  for (const auto& r : g.rows) err[(long long)r[std::size_t(g.column("n"))]].push_back(r[std::size_t(g.column("rel_error"))]);
  for (const auto& r : c.rows) loc[(long long)r[std::size_t(c.column("n"))]].push_back(r[std::size_t(c.column("location_diff"))]);
  if (!err.count(10) || !err.count(18)) return {false, "xcheck config must contain N = 10 and N = 18"};
  const double e10 = median(err[10]), e18 = median(err[18]);
  const double l18 = median(loc[18]);
  const double l18_max = *std::max_element(loc[18].begin(), loc[18].end());
  const bool ok = e18 < e10 && l18 <= 0.05 + 1e-12 && loc[18].size() >= 20;
  return {ok, "median relative gap error N=10 " + fmt(e10) + ", N=18 " + fmt(e18) +
                  "; gap-minimum location difference at N=18 median " + fmt(l18) + ", max " + fmt(l18_max) + " over " +
                  std::to_string(loc[18].size()) + " seeds (limit 0.05)"};
}

Outcome c11_scale_invariance() {
  RunRecord rec;
  if (const auto p = stored_run_problem("langevin.yaml", &rec); !p.empty()) return {false, p};
  const auto cfg = load_config((fs::path(g_configs) / "langevin.yaml").string());
  const auto ev = read_universal_events(rec.dir);
  const int dec = int(cfg.langevin.decades);
  std::vector<std::size_t> per(std::size_t(dec), 0);
  for (const auto& e : ev) {
    const int k = int(std::floor(std::log10(e.gamma_n / cfg.langevin.gamma_lo)));
    if (k >= 0 && k < dec) ++per[std::size_t(k)];
  }
  const auto ks = decade_ks(ratios_by_decade(ev, cfg.langevin.gamma_lo, dec));
  if (ks.empty()) return {false, "no two decades with ratio samples"};
  bool ok = true;
  std::string detail = "events per decade";
  for (auto n : per) detail += " " + std::to_string(n);
  for (const auto& d : ks) {
    const bool enough = per[std::size_t(d.a)] >= 1000 && per[std::size_t(d.b)] >= 1000;
    ok = ok && enough && d.ks.p_value > 0.01;
    detail += "; decades " + std::to_string(d.a) + " vs " + std::to_string(d.b) + ": ratio samples " +
              std::to_string(d.n_a) + "/" + std::to_string(d.n_b) + ", KS p " + fmt(d.ks.p_value) +
              (enough ? "" : " (fewer than 1000 events in a decade)");
  }
  return {ok, detail};
}

Outcome c12_reproducibility() {
  // Every kind at reduced size, twice, compared byte for byte.
  const std::vector<std::string> small = {
      "kind: classical-scaling\nn: [16, 32]\nseeds: 5\n",
      "kind: qcp-scaling\nn: [100, 300]\nseeds: 3\n",
      "kind: glass-scaling\nn: [100, 300]\nseeds: 3\n",
      "kind: xcheck\nn: [8]\nseeds: 2\ngammas: [0.4, 0.7]\n",
      "kind: bottleneck-census\nn: [150]\nseeds: 2\ndisorder: [gaussian, bimodal]\n",
      "kind: langevin-universal\nlangevin: {n_paths: 4, paths_per_task: 2, gamma_lo: 1.0e-5, decades: 1, "
      "dln_gamma: 0.02, n_max: 2}\n"};
  std::size_t files = 0;
  for (std::size_t i = 0; i < small.size(); ++i) {
    auto c = parse_config(small[i]);
    c.output = scratch("repro_a" + std::to_string(i)).string();
    const auto a = run_experiment(c);
    c.output = scratch("repro_b" + std::to_string(i)).string();
    const auto b = run_experiment(c);
    if (a.failures || b.failures) return {false, to_string(c.kind) + " run had failed tasks"};
    for (const auto& f : a.outputs) {
      ++files;
      if (slurp(fs::path(a.dir) / f) != slurp(fs::path(b.dir) / f))
        return {false, "rerun of " + to_string(c.kind) + " changed " + f};
    }
  }
  // Stored long runs: the first task of each re-executed from its config.
  std::string stored;
  for (const char* file : {"census.yaml", "langevin.yaml"}) {
    RunRecord rec;
    if (const auto p = stored_run_problem(file, &rec); !p.empty()) {
      stored += std::string("; ") + file + " not checked: " + p;
      continue;
    }
    auto c = load_config((fs::path(g_configs) / file).string());
    const std::string id = task_ids(c).front();
    c.output = scratch(std::string("stored_") + file).string();
    RunOptions only;
    only.only = {id};
    run_experiment(c, only);
    for (const auto& entry : fs::directory_iterator(fs::path(c.output) / "tasks")) {
      const auto name = entry.path().filename().string();
      if (entry.path().extension() != ".csv") continue;
      ++files;
      if (slurp(entry.path()) != slurp(fs::path(rec.dir) / "tasks" / name))
        return {false, "stored task " + name + " of " + file + " does not reproduce"};
    }
    stored += std::string("; ") + file + " task " + id + " reproduces";
  }
  return {stored.find("not checked") == std::string::npos,
          std::to_string(files) + " CSV files identical on rerun" + stored};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::vector<int> which;
  g_configs = QAB_SOURCE_DIR "/configs";
  g_runs = output_root() == "runs" ? std::string(QAB_SOURCE_DIR "/runs") : output_root();
  app.add_option("-c,--criterion", which, "Criteria to run (default all)")->check(CLI::Range(1, 12));
  app.add_option("--configs", g_configs, "Directory of shipped configs");
  app.add_option("--runs", g_runs, "Output root holding the stored long runs");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> all = {
      {"classical oracle equivalence", c1_classical_oracle},
      {"classical gap scaling", c2_classical_gap},
      {"mean-field checks", c3_meanfield},
      {"QCP finite-size scaling", c4_qcp},
      {"glass-phase typical gap", c5_glass},
      {"bottleneck census", c6_census},
      {"stretched-exponential exponent", c7_exponent},
      {"persistence exponent", c8_persistence},
      {"equilibrium fidelity", c9_equilibrium},
      {"ring-vs-exact oracle", c10_xcheck},
      {"scale invariance of event ratios", c11_scale_invariance},
      {"reproducibility", c12_reproducibility}};
  if (which.empty())
    for (int k = 1; k <= 12; ++k) which.push_back(k);
  int failed = 0;
  for (int k : which) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = all[std::size_t(k - 1)].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %2d %s: %s (%.1f s): %s\n", k, o.pass ? "PASS" : "FAIL", all[std::size_t(k - 1)].first.c_str(),
                s, o.detail.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed ? 1 : 0;
}
