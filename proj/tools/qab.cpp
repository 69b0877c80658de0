// qab: command-line front end for the library and the experiment harness.

#include "qab/exactdiag.hpp"
#include "qab/harness.hpp"
#include "qab/instance.hpp"
#include "qab/meanfield.hpp"
#include "qab/ringmodel.hpp"
#include "qab/spectrum.hpp"
#include "qab/sweep.hpp"
#include "qab/textio.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace qab;
using json = nlohmann::json;
namespace fs = std::filesystem;

constexpr int kOk = 0, kFailures = 1, kConfig = 2;

// "lo:hi:step" or a comma-separated list.
std::vector<double> parse_grid(const std::string& s) {
  std::vector<double> out;
  if (s.find(':') != std::string::npos) {
    std::stringstream ss(s);
    std::string a, b, c;
    std::getline(ss, a, ':');
    std::getline(ss, b, ':');
    std::getline(ss, c, ':');
    const double lo = std::stod(a), hi = std::stod(b), step = std::stod(c);
    if (!(step > 0.0) || hi < lo) throw ConfigError("grid '" + s + "': need lo <= hi and step > 0");
    const auto n = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
    for (long i = 0; i <= n; ++i) out.push_back(lo + double(i) * step);
    return out;
  }
  std::stringstream ss(s);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(std::stod(cell));
  if (out.empty()) throw ConfigError("empty grid");
  return out;
}

// Writes to `path`, or stdout when it is empty or "-".
struct Output {
  std::optional<std::ofstream> file;
  std::ostream* os = &std::cout;
  explicit Output(const std::string& path) {
    if (!path.empty() && path != "-") {
      file.emplace(open_output(path));
      os = &*file;
    }
  }
};

int run_config(const std::string& path, std::size_t max_tasks, std::size_t threads, bool quiet) {
  ExperimentConfig c = load_config(path);
  if (threads) c.threads = threads;
  RunOptions opt;
  opt.max_tasks = max_tasks;
  if (!quiet) opt.log = &std::cerr;
  const RunRecord r = run_experiment(c, opt);
  std::cerr << "run " << r.name << " in " << r.dir << ": " << r.tasks.size() << " tasks, " << r.failures
            << " failed" << (r.complete ? "" : ", incomplete") << "\n";
  if (r.complete) std::cout << format_report(report(r));
  return r.failures ? kFailures : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantum annealing bottleneck toolkit"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "Write a random disorder instance");
  long long gen_n = 0;
  std::string gen_dist = "gaussian", gen_out;
  std::uint64_t gen_seed = 1;
  gen->add_option("-n,--n", gen_n, "Number of spins")->required()->check(CLI::PositiveNumber);
  gen->add_option("--dist", gen_dist, "gaussian or bimodal");
  gen->add_option("--seed", gen_seed, "Instance seed");
  gen->add_option("-o,--out", gen_out, "Output file (default stdout)");

  // classical
  auto* cls = app.add_subcommand("classical", "Classical ground state and gap of an instance");
  std::string cls_in;
  bool cls_brute = false;
  cls->add_option("instance", cls_in, "Instance file")->required();
  cls->add_flag("--brute", cls_brute, "Also enumerate all assignments (N <= 24)");

  // meanfield
  auto* mf = app.add_subcommand("meanfield", "Mean-field magnetization, potential and mass");
  std::string mf_grid = "0.05:0.95:0.05", mf_out;
  mf->add_option("--gamma-grid", mf_grid, "lo:hi:step or comma list");
  mf->add_option("-o,--out", mf_out, "CSV output (default stdout)");

  // potential
  auto* pot = app.add_subcommand("potential", "Ring-model potential of an instance");
  std::string pot_in, pot_out;
  double pot_gamma = 0.5;
  long long pot_points = 0;
  pot->add_option("instance", pot_in, "Instance file")->required();
  pot->add_option("--gamma", pot_gamma, "Transverse field")->required();
  pot->add_option("--points", pot_points, "Grid points (default chosen from gamma and N)");
  pot->add_option("-o,--out", pot_out, "CSV output; a .json sidecar is written next to it")->required();

  // spectrum
  auto* spec = app.add_subcommand("spectrum", "Ring-model levels over a gamma grid");
  std::string spec_in, spec_grid = "0.1:0.9:0.1", spec_out;
  int spec_k = kDefaultLevels;
  spec->add_option("instance", spec_in, "Instance file")->required();
  spec->add_option("--gamma-grid", spec_grid, "lo:hi:step or comma list");
  spec->add_option("-k,--levels", spec_k, "Levels per gamma")->check(CLI::Range(2, 64));
  spec->add_option("-o,--out", spec_out, "CSV output (default stdout)");

  // sweep
  auto* sw = app.add_subcommand("sweep", "Gap sweep and bottleneck detection for one instance");
  std::string sw_in, sw_dir = ".";
  double sw_hi = 0.95, sw_lo = 0.0;
  sw->add_option("instance", sw_in, "Instance file")->required();
  sw->add_option("--gamma-hi", sw_hi, "Sweep start");
  sw->add_option("--gamma-lo", sw_lo, "Sweep end (default: classical gap)");
  sw->add_option("--out-dir", sw_dir, "Directory for trace.csv, events.csv, fit.json");

  // exactdiag
  auto* ed = app.add_subcommand("exactdiag", "Even-sector exact levels over a gamma grid");
  std::string ed_in, ed_grid = "0.1:0.9:0.1", ed_out;
  int ed_k = 4;
  ed->add_option("instance", ed_in, "Instance file")->required();
  ed->add_option("--gamma-grid", ed_grid, "lo:hi:step or comma list");
  ed->add_option("-k,--levels", ed_k, "Levels per gamma")->check(CLI::Range(1, 32));
  ed->add_option("-o,--out", ed_out, "CSV output (default stdout)");

  // xcheck
  auto* xc = app.add_subcommand("xcheck", "Ring model against exact diagonalization");
  std::vector<long long> xc_n{10};
  std::size_t xc_seeds = 5;
  std::uint64_t xc_master = 1;
  std::string xc_grid = "0.3:0.9:0.05", xc_out;
  xc->add_option("--n", xc_n, "System sizes")->expected(1, -1);
  xc->add_option("--seeds", xc_seeds, "Instances per size");
  xc->add_option("--master-seed", xc_master, "Master seed");
  xc->add_option("--gamma-grid", xc_grid, "lo:hi:step or comma list, inside (0, 1)");
  xc->add_option("-o,--out", xc_out, "CSV output of the error table (default stdout)");

  // langevin
  auto* lv = app.add_subcommand("langevin", "Universal small-gamma pipeline");
  ExperimentConfig lv_cfg;
  lv_cfg.kind = ExperimentKind::langevin_universal;
  lv_cfg.name = "langevin";
  std::string lv_kernel = "integral", lv_out = "langevin";
  lv->add_option("--n-paths", lv_cfg.langevin.n_paths, "Independent paths");
  lv->add_option("--paths-per-task", lv_cfg.paths_per_task, "Paths per resumable task");
  lv->add_option("--dtau", lv_cfg.langevin.branch.dtau, "Euler-Maruyama step");
  lv->add_option("--tau-max", lv_cfg.langevin.branch.tau_max, "Initial branch length");
  lv->add_option("--gamma-lo", lv_cfg.langevin.gamma_lo, "Lowest gamma");
  lv->add_option("--decades", lv_cfg.langevin.decades, "Decades swept");
  lv->add_option("--dln-gamma", lv_cfg.langevin.dln_gamma, "Step in ln gamma");
  lv->add_option("--window", lv_cfg.langevin.detect.resonance_window, "Resonance window in units of gamma");
  lv->add_option("--kappa", lv_cfg.langevin.detect.kappa, "Action prefactor");
  lv->add_option("--n-max", lv_cfg.langevin.smooth.n_max, "Noise terms (0 disables)");
  lv->add_option("--kernel", lv_kernel, "integral or gaussian");
  lv->add_option("--master-seed", lv_cfg.master_seed, "Master seed");
  lv->add_option("--output", lv_out, "Output directory (relative to the output root)");

  // fit
  auto* fit = app.add_subcommand("fit", "Scaling fits over harness run directories");
  std::string fit_census, fit_qcp, fit_glass, fit_out;
  fit->add_option("--census", fit_census, "bottleneck-census run directory");
  fit->add_option("--qcp", fit_qcp, "qcp-scaling run directory");
  fit->add_option("--glass", fit_glass, "glass-scaling run directory");
  fit->add_option("-o,--out", fit_out, "JSON output (default stdout)");

  // report
  auto* rep = app.add_subcommand("report", "Summary tables of a run directory");
  std::string rep_dir;
  rep->add_option("run_dir", rep_dir, "Run directory holding manifest.json")->required();

  // run
  auto* run = app.add_subcommand("run", "Run or resume an experiment config");
  std::string run_cfg;
  std::size_t run_max = std::numeric_limits<std::size_t>::max(), run_threads = 0;
  bool run_quiet = false;
  run->add_option("config", run_cfg, "YAML config")->required();
  run->add_option("--max-tasks", run_max, "Stop after this many new tasks");
  run->add_option("--threads", run_threads, "Worker threads (overrides the config)");
  run->add_flag("-q,--quiet", run_quiet, "No per-task log");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*gen) {
      const auto inst = generate(Eigen::Index(gen_n), disorder_from_string(gen_dist), gen_seed);
      Output out(gen_out);
      write_instance(*out.os, inst);
    } else if (*cls) {
      const auto inst = load_instance(cls_in);
      const auto sol = solve_classical(inst);
      CsvWriter w(std::cout);
      if (cls_brute) {
        const auto bf = brute_force_classical(inst);
        w.header({"n", "e0", "gap", "e0_brute"});
        w.row({double(inst.n_spins()), sol.e0, classical_gap(sol), bf.e0});
      } else {
        w.header({"n", "e0", "gap"});
        w.row({double(inst.n_spins()), sol.e0, classical_gap(sol)});
      }
    } else if (*mf) {
      Output out(mf_out);
      CsvWriter w(*out.os);
      w.header({"gamma", "m_gamma", "v", "mass_per_spin"});
      for (double g : parse_grid(mf_grid)) {
        const auto s = solve_mean_field(g);
        w.row({g, s.m_gamma, s.v_min, s.mass_per_spin});
      }
    } else if (*pot) {
      const auto inst = load_instance(pot_in);
      const auto pg = random_potential(inst, pot_gamma, Eigen::Index(pot_points));
      {
        CsvWriter w(pot_out);
        w.header({"theta", "v"});
        for (Eigen::Index i = 0; i < pg.theta.size(); ++i) w.row({pg.theta[i], pg.values[i]});
      }
      json side;
      side["gamma"] = pg.gamma;
      side["m_gamma"] = pg.m_gamma;
      side["mass"] = pg.mass;
      side["offset"] = pg.offset;
      side["seed"] = pg.seed;
      side["n_spins"] = pg.n_spins;
      auto f = open_output(fs::path(pot_out).replace_extension(".json").string());
      f << side.dump(2) << "\n";
    } else if (*spec) {
      const auto inst = load_instance(spec_in);
      Output out(spec_out);
      CsvWriter w(*out.os);
      std::vector<std::string> cols{"gamma"};
      for (int j = 0; j < spec_k; ++j) cols.push_back("e" + std::to_string(j));
      cols.insert(cols.end(), {"gap", "theta_peak"});
      w.header(cols);
      for (double g : parse_grid(spec_grid)) {
        const PotentialEvaluator ev(inst, g);
        const auto sr = solve_ring(ev.periodic_grid(default_n_points(g, inst.n_spins())), spec_k);
        std::vector<double> row{g};
        for (int j = 0; j < spec_k; ++j) row.push_back(sr.levels[j]);
        row.insert(row.end(), {sr.gap, sr.theta_peak});
        w.row(row);
      }
    } else if (*sw) {
      const auto inst = load_instance(sw_in);
      const double lo = sw_lo > 0.0 ? sw_lo : gamma_min(inst);
      const auto tr = sweep_gap(inst, sw_hi, lo);
      const auto events = detect_bottlenecks(tr);
      fs::create_directories(sw_dir);
      {
        CsvWriter w((fs::path(sw_dir) / "trace.csv").string());
        w.header({"gamma", "gap", "theta_peak", "spread", "refined", "width", "semiclassical"});
        for (std::size_t i = 0; i < tr.size(); ++i)
          w.row({tr.gamma[i], tr.gap[i], tr.theta_peak[i], tr.spread[i], double(tr.refined[i]), tr.width[i],
                 double(tr.method[i] == GapMethod::semiclassical)});
      }
      {
        CsvWriter w((fs::path(sw_dir) / "events.csv").string());
        w.header({"gamma_n", "delta_e", "delta_gamma", "delta_theta", "c", "delta_e_ref", "action", "ratio_to_next"});
        for (const auto& e : events)
          w.row({e.gamma_n, e.delta_e, e.delta_gamma, e.delta_theta, e.c_exponent, e.delta_e_ref, e.action,
                 e.ratio_to_next});
      }
      json j;
      j["n_spins"] = inst.n_spins();
      j["seed"] = inst.seed;
      j["gamma_hi"] = sw_hi;
      j["gamma_lo"] = lo;
      j["trace_points"] = tr.size();
      j["events"] = events.size();
      auto f = open_output((fs::path(sw_dir) / "fit.json").string());
      f << j.dump(2) << "\n";
      std::cout << events.size() << " bottleneck(s) over " << tr.size() << " points\n";
    } else if (*ed) {
      const auto inst = load_instance(ed_in);
      Output out(ed_out);
      CsvWriter w(*out.os);
      std::vector<std::string> cols{"gamma"};
      for (int j = 0; j < ed_k; ++j) cols.push_back("e" + std::to_string(j));
      w.header(cols);
      for (double g : parse_grid(ed_grid)) {
        const auto lv = lowest_levels(inst, g, ed_k);
        std::vector<double> row{g};
        for (Eigen::Index j = 0; j < lv.size(); ++j) row.push_back(lv[j]);
        w.row(row);
      }
    } else if (*xc) {
      std::vector<DisorderInstance> insts;
      for (long long n : xc_n)
        for (std::size_t s = 0; s < xc_seeds; ++s)
          insts.push_back(generate(Eigen::Index(n), Disorder::gaussian,
                                   derive_seed(xc_master, "xcheck:gaussian", std::uint64_t(n), s)));
      const auto rpt = ring_vs_exact_report(insts, parse_grid(xc_grid));
      Output out(xc_out);
      CsvWriter w(*out.os);
      w.header({"n", "seed", "gamma", "exact_gap", "ring_gap", "rel_error"});
      for (const auto& r : rpt.rows) w.row({double(r.n_spins), double(r.seed), r.gamma, r.exact_gap, r.ring_gap, r.rel_error});
      for (const auto& s : rpt.per_n)
        std::cerr << "N=" << s.n_spins << " median relative error " << format_double(s.median_rel_error)
                  << ", median minimum-location difference " << format_double(s.median_min_location_diff) << "\n";
    } else if (*lv) {
      if (lv_kernel == "gaussian")
        lv_cfg.langevin.smooth.kernel = KernelMode::gaussian;
      else if (lv_kernel != "integral")
        throw ConfigError("--kernel must be 'integral' or 'gaussian'");
      lv_cfg.output = lv_out;
      lv_cfg.langevin.master_seed = lv_cfg.master_seed;
      // Round-trip through the parser so the same validation applies.
      lv_cfg = parse_config(canonical_config(lv_cfg), "langevin options");
      RunOptions opt;
      opt.log = &std::cerr;
      const auto r = run_experiment(lv_cfg, opt);
      std::cout << format_report(report(r));
      return r.failures ? kFailures : kOk;
    } else if (*fit) {
      std::vector<GapSample> qcp, glass;
      std::vector<InstanceEvents> census;
      const auto gaps = [](const std::string& dir) {
        std::vector<GapSample> v;
        const auto t = read_csv((fs::path(dir) / "gaps.csv").string());
        for (const auto& row : t.rows)
          v.push_back({Eigen::Index(row[std::size_t(t.column("n"))]), std::uint64_t(row[std::size_t(t.column("seed_index"))]),
                       row[std::size_t(t.column("gap"))]});
        return v;
      };
      FitOptions fo;
      if (!fit_qcp.empty()) qcp = gaps(fit_qcp);
      if (!fit_glass.empty()) glass = gaps(fit_glass);
      if (!fit_census.empty())
        for (const auto& x : read_census(fit_census))
          if (x.dist == Disorder::gaussian) census.push_back(x);
      const auto sr = fit_scalings(qcp, glass, census, fo);
      const auto slope = [](const SlopeFit& f) {
        return json{{"slope", f.slope}, {"slope_se", f.slope_se}, {"ci_lo", f.ci_lo}, {"ci_hi", f.ci_hi}, {"n_points", f.n_points}};
      };
      json j;
      if (sr.has_qcp) j["qcp"] = slope(sr.qcp);
      if (sr.has_glass) j["glass"] = slope(sr.glass);
      if (sr.has_alpha) j["alpha"] = slope(sr.alpha);
      if (sr.has_exponent) j["exponent_34"] = slope(sr.exponent_34);
      if (sr.c_stats.n) j["c"] = {{"n", sr.c_stats.n}, {"median", sr.c_stats.median}, {"q25", sr.c_stats.q25}, {"q75", sr.c_stats.q75}};
      Output out(fit_out);
      *out.os << j.dump(2) << "\n";
    } else if (*rep) {
      const auto r = report(load_record(rep_dir));
      std::cout << format_report(r);
      auto f = open_output((fs::path(rep_dir) / "report.json").string());
      f << report_json(r);
      return r.has_data ? kOk : kFailures;
    } else if (*run) {
      return run_config(run_cfg, run_max, run_threads, run_quiet);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailures;
  }
  return kOk;
}
