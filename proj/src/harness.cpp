#include "qab/harness.hpp"

#include "qab/exactdiag.hpp"
#include "qab/ringmodel.hpp"
#include "qab/spectrum.hpp"
#include "qab/stats.hpp"
#include "qab/textio.hpp"

#include <json.hpp>
#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace qab {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr const char* kKinds[] = {"classical-scaling", "qcp-scaling",        "glass-scaling",
                                  "bottleneck-census", "langevin-universal", "xcheck"};

}  // namespace

std::string to_string(ExperimentKind k) { return kKinds[int(k)]; }

ExperimentKind experiment_kind_from_string(const std::string& s) {
  for (int i = 0; i < 6; ++i)
    if (s == kKinds[i]) return ExperimentKind(i);
  throw std::invalid_argument("unknown experiment kind: " + s);
}

// ---------------------------------------------------------------- config

namespace {

class Reader {
 public:
  explicit Reader(std::string source) : src_(std::move(source)) {}

  [[noreturn]] void fail(const YAML::Mark& m, const std::string& msg) const {
    std::string pos = src_;
    if (!m.is_null()) pos += ":" + std::to_string(m.line + 1) + ":" + std::to_string(m.column + 1);
    throw ConfigError(pos + ": " + msg);
  }
  [[noreturn]] void fail(const YAML::Node& n, const std::string& msg) const { fail(n.Mark(), msg); }

  void require_map(const YAML::Node& n, const std::string& what) const {
    if (!n.IsMap()) fail(n, what + " must be a mapping");
  }

  void check_keys(const YAML::Node& map, const std::set<std::string>& allowed, const std::string& what) const {
    for (const auto& kv : map) {
      const auto key = kv.first.as<std::string>();
      if (!allowed.count(key)) fail(kv.first, "unknown key '" + key + "' in " + what);
    }
  }

  template <class T>
  T scalar(const YAML::Node& n, const std::string& key) const {
    if (!n.IsScalar()) fail(n, "'" + key + "' must be a scalar");
    try {
      return n.as<T>();
    } catch (const YAML::BadConversion&) {
      fail(n, "'" + key + "' has the wrong type");
    }
  }

  template <class T>
  void opt(const YAML::Node& map, const std::string& key, T& out) const {
    if (const auto n = map[key]) out = scalar<T>(n, key);
  }

  void positive(const YAML::Node& map, const std::string& key, double& out) const {
    opt(map, key, out);
    if (!(out > 0.0)) fail(map[key] ? map[key].Mark() : map.Mark(), "'" + key + "' must be positive");
  }

  void unit_interval(const YAML::Node& map, const std::string& key, double& out) const {
    opt(map, key, out);
    if (!(out > 0.0 && out < 1.0)) fail(map[key] ? map[key].Mark() : map.Mark(), "'" + key + "' must lie in (0, 1)");
  }

  template <class T>
  void at_least(const YAML::Node& map, const std::string& key, T& out, T lo) const {
    opt(map, key, out);
    if (out < lo) fail(map[key] ? map[key].Mark() : map.Mark(), "'" + key + "' must be >= " + std::to_string(lo));
  }

  template <class T>
  std::vector<T> list(const YAML::Node& n, const std::string& key) const {
    if (!n.IsSequence()) fail(n, "'" + key + "' must be a list");
    if (n.size() == 0) fail(n, "'" + key + "' must not be empty");
    std::vector<T> out;
    for (const auto& e : n) out.push_back(scalar<T>(e, key));
    return out;
  }

 private:
  std::string src_;
};

const std::set<std::string> kSweepKeys = {"ratio",          "levels",        "rescan_factor", "scan_margin",
                                          "barrier_action", "periodic_fraction", "refine_passes", "numeric_floor",
                                          "root_steps",     "jump_spread_factor", "jump_gamma_factor"};
const std::set<std::string> kDetectKeys = {"gap_ratio", "spread_factor", "gamma_factor"};
const std::set<std::string> kFitKeys = {"min_n_values", "min_seeds", "n_boot", "seed"};
const std::set<std::string> kLangevinKeys = {
    "n_paths", "paths_per_task", "dtau",       "tau_max",   "mu0",        "mu_overflow",      "gamma_lo",
    "decades", "dln_gamma",      "kappa",      "n_max",     "kernel",     "half_width",       "step",
    "cutoff",  "resonance_window", "track_radius", "n_spins"};

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
  const Reader rd(source);
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    rd.fail(e.mark, e.msg);
  }
  if (!root || root.IsNull()) throw ConfigError(source + ": empty configuration");
  rd.require_map(root, "configuration");
  ExperimentConfig c;
  if (!root["kind"]) rd.fail(root, "missing required key 'kind'");
  const auto kind = rd.scalar<std::string>(root["kind"], "kind");
  try {
    c.kind = experiment_kind_from_string(kind);
  } catch (const std::invalid_argument&) {
    rd.fail(root["kind"], "unknown kind '" + kind + "'");
  }

  std::set<std::string> allowed = {"kind", "name", "master_seed", "output", "threads", "fit"};
  const bool ensemble = c.kind != ExperimentKind::langevin_universal;
  if (ensemble) allowed.insert({"n", "seeds", "disorder"});
  if (c.kind == ExperimentKind::glass_scaling) allowed.insert("gamma");
  if (c.kind == ExperimentKind::bottleneck_census) allowed.insert({"gamma_hi", "sweep", "detect"});
  if (c.kind == ExperimentKind::xcheck) allowed.insert("gammas");
  if (c.kind == ExperimentKind::langevin_universal) allowed.insert("langevin");
  rd.check_keys(root, allowed, "kind " + kind);

  c.name = kind;
  rd.opt(root, "name", c.name);
  if (c.name.empty() || c.name.find_first_of("/\\") != std::string::npos) rd.fail(root["name"], "'name' must be a plain non-empty word");
  rd.opt(root, "master_seed", c.master_seed);
  c.output = c.name;
  rd.opt(root, "output", c.output);
  rd.at_least<std::size_t>(root, "threads", c.threads, 1);

  if (ensemble) {
    if (!root["n"]) rd.fail(root, "missing required key 'n'");
    if (!root["seeds"]) rd.fail(root, "missing required key 'seeds'");
    for (const auto v : rd.list<long long>(root["n"], "n")) {
      if (v < 2) rd.fail(root["n"], "every N must be >= 2");
      c.n_values.push_back(Eigen::Index(v));
    }
    const auto seeds = rd.scalar<long long>(root["seeds"], "seeds");
    if (seeds < 1) rd.fail(root["seeds"], "'seeds' must be >= 1");
    c.seeds = std::size_t(seeds);
    if (const auto d = root["disorder"]) {
      c.disorders.clear();
      const auto names = d.IsSequence() ? rd.list<std::string>(d, "disorder")
                                        : std::vector<std::string>{rd.scalar<std::string>(d, "disorder")};
      for (const auto& s : names) {
        try {
          c.disorders.push_back(disorder_from_string(s));
        } catch (const std::exception&) {
          rd.fail(d, "unknown disorder '" + s + "'");
        }
      }
    }
  }
  if (c.kind == ExperimentKind::glass_scaling) rd.unit_interval(root, "gamma", c.gamma);
  if (c.kind == ExperimentKind::bottleneck_census) {
    rd.unit_interval(root, "gamma_hi", c.gamma_hi);
    if (const auto s = root["sweep"]) {
      rd.require_map(s, "'sweep'");
      rd.check_keys(s, kSweepKeys, "'sweep'");
      auto& o = c.sweep;
      rd.unit_interval(s, "ratio", o.ratio);
      rd.at_least(s, "levels", o.levels, 2);
      rd.positive(s, "rescan_factor", o.rescan_factor);
      rd.positive(s, "scan_margin", o.scan_margin);
      rd.positive(s, "barrier_action", o.barrier_action);
      rd.unit_interval(s, "periodic_fraction", o.periodic_fraction);
      rd.at_least(s, "refine_passes", o.refine_passes, 0);
      rd.positive(s, "numeric_floor", o.numeric_floor);
      rd.at_least(s, "root_steps", o.root_steps, 1);
      rd.positive(s, "jump_spread_factor", o.jump_spread_factor);
      rd.positive(s, "jump_gamma_factor", o.jump_gamma_factor);
    }
    if (const auto d = root["detect"]) {
      rd.require_map(d, "'detect'");
      rd.check_keys(d, kDetectKeys, "'detect'");
      rd.unit_interval(d, "gap_ratio", c.detect.gap_ratio);
      rd.positive(d, "spread_factor", c.detect.spread_factor);
      rd.positive(d, "gamma_factor", c.detect.gamma_factor);
    }
  }
  if (c.kind == ExperimentKind::xcheck) {
    if (const auto g = root["gammas"]) {
      c.xcheck_gammas = rd.list<double>(g, "gammas");
      for (double v : c.xcheck_gammas)
        if (!(v > 0.0 && v < 1.0)) rd.fail(g, "every entry of 'gammas' must lie in (0, 1)");
    }
  }
  if (c.kind == ExperimentKind::langevin_universal) {
    auto& u = c.langevin;
    if (const auto l = root["langevin"]) {
      rd.require_map(l, "'langevin'");
      rd.check_keys(l, kLangevinKeys, "'langevin'");
      rd.at_least<std::size_t>(l, "n_paths", u.n_paths, 1);
      rd.at_least<std::size_t>(l, "paths_per_task", c.paths_per_task, 1);
      rd.positive(l, "dtau", u.branch.dtau);
      rd.positive(l, "tau_max", u.branch.tau_max);
      rd.opt(l, "mu0", u.branch.mu0);
      rd.positive(l, "mu_overflow", u.branch.mu_overflow);
      rd.positive(l, "gamma_lo", u.gamma_lo);
      rd.positive(l, "decades", u.decades);
      rd.positive(l, "dln_gamma", u.dln_gamma);
      rd.positive(l, "kappa", u.detect.kappa);
      rd.at_least(l, "n_max", u.smooth.n_max, 0);
      if (const auto k = l["kernel"]) {
        const auto s = rd.scalar<std::string>(k, "kernel");
        if (s == "integral")
          u.smooth.kernel = KernelMode::integral;
        else if (s == "gaussian")
          u.smooth.kernel = KernelMode::gaussian;
        else
          rd.fail(k, "'kernel' must be 'integral' or 'gaussian'");
      }
      rd.positive(l, "half_width", u.smooth.half_width);
      rd.positive(l, "step", u.smooth.step);
      rd.positive(l, "cutoff", u.smooth.cutoff);
      rd.positive(l, "resonance_window", u.detect.resonance_window);
      rd.positive(l, "track_radius", u.detect.track_radius);
      rd.positive(l, "n_spins", u.n_spins);
      if (u.decades != std::floor(u.decades)) rd.fail(l["decades"], "'decades' must be a whole number");
    }
    u.master_seed = c.master_seed;
  }
  if (const auto f = root["fit"]) {
    rd.require_map(f, "'fit'");
    rd.check_keys(f, kFitKeys, "'fit'");
    rd.at_least<std::size_t>(f, "min_n_values", c.fit.min_n_values, 2);
    rd.at_least<std::size_t>(f, "min_seeds", c.fit.min_seeds, 1);
    rd.at_least(f, "n_boot", c.fit.n_boot, 1);
    rd.opt(f, "seed", c.fit.seed);
  }
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError(path + ": cannot open");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str(), path);
}

namespace {

std::vector<double> xcheck_grid(const ExperimentConfig& c) {
  if (!c.xcheck_gammas.empty()) return c.xcheck_gammas;
  std::vector<double> g;
  for (int i = 0; i <= 12; ++i) g.push_back(0.3 + 0.05 * i);
  return g;
}

}  // namespace

std::string canonical_config(const ExperimentConfig& c) {
  std::ostringstream os;
  const auto d = [](double x) { return format_double(x); };
  os << "kind: " << to_string(c.kind) << "\n";
  os << "name: " << c.name << "\n";
  os << "master_seed: " << c.master_seed << "\n";
  os << "output: " << c.output << "\n";
  const auto& f = c.fit;
  os << "fit: {min_n_values: " << f.min_n_values << ", min_seeds: " << f.min_seeds << ", n_boot: " << f.n_boot
     << ", seed: " << f.seed << "}\n";
  if (c.kind == ExperimentKind::langevin_universal) {
    const auto& u = c.langevin;
    os << "langevin: {n_paths: " << u.n_paths << ", paths_per_task: " << c.paths_per_task
       << ", dtau: " << d(u.branch.dtau) << ", tau_max: " << d(u.branch.tau_max) << ", mu0: " << d(u.branch.mu0)
       << ", mu_overflow: " << d(u.branch.mu_overflow) << ", gamma_lo: " << d(u.gamma_lo)
       << ", decades: " << d(u.decades) << ", dln_gamma: " << d(u.dln_gamma) << ", kappa: " << d(u.detect.kappa)
       << ", n_max: " << u.smooth.n_max
       << ", kernel: " << (u.smooth.kernel == KernelMode::integral ? "integral" : "gaussian")
       << ", half_width: " << d(u.smooth.half_width) << ", step: " << d(u.smooth.step)
       << ", cutoff: " << d(u.smooth.cutoff) << ", resonance_window: " << d(u.detect.resonance_window)
       << ", track_radius: " << d(u.detect.track_radius) << ", n_spins: " << d(u.n_spins) << "}\n";
    return os.str();
  }
  os << "n: [";
  for (std::size_t i = 0; i < c.n_values.size(); ++i) os << (i ? ", " : "") << c.n_values[i];
  os << "]\nseeds: " << c.seeds << "\ndisorder: [";
  for (std::size_t i = 0; i < c.disorders.size(); ++i) os << (i ? ", " : "") << to_string(c.disorders[i]);
  os << "]\n";
  if (c.kind == ExperimentKind::glass_scaling) os << "gamma: " << d(c.gamma) << "\n";
  if (c.kind == ExperimentKind::bottleneck_census) {
    const auto& s = c.sweep;
    os << "gamma_hi: " << d(c.gamma_hi) << "\n";
    os << "sweep: {ratio: " << d(s.ratio) << ", levels: " << s.levels << ", rescan_factor: " << d(s.rescan_factor)
       << ", scan_margin: " << d(s.scan_margin) << ", barrier_action: " << d(s.barrier_action)
       << ", periodic_fraction: " << d(s.periodic_fraction) << ", refine_passes: " << s.refine_passes
       << ", numeric_floor: " << d(s.numeric_floor) << ", root_steps: " << s.root_steps
       << ", jump_spread_factor: " << d(s.jump_spread_factor) << ", jump_gamma_factor: " << d(s.jump_gamma_factor)
       << "}\n";
    os << "detect: {gap_ratio: " << d(c.detect.gap_ratio) << ", spread_factor: " << d(c.detect.spread_factor)
       << ", gamma_factor: " << d(c.detect.gamma_factor) << "}\n";
  }
  if (c.kind == ExperimentKind::xcheck) {
    const auto g = xcheck_grid(c);
    os << "gammas: [";
    for (std::size_t i = 0; i < g.size(); ++i) os << (i ? ", " : "") << d(g[i]);
    os << "]\n";
  }
  return os.str();
}

std::string config_hash(const ExperimentConfig& c) {
  const std::string text = canonical_config(c);
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%016llx%016llx", static_cast<unsigned long long>(hash_label(text)),
                static_cast<unsigned long long>(splitmix64(hash_label(text + "#"))));
  return buf;
}

std::string output_root() {
  const char* env = std::getenv("QAB_OUTPUT_ROOT");
  return env && *env ? std::string(env) : std::string("runs");
}

std::string output_dir(const ExperimentConfig& c) {
  const fs::path p(c.output);
  return p.is_absolute() ? p.string() : (fs::path(output_root()) / p).string();
}

// ----------------------------------------------------------------- tasks

namespace {

// One table of a task: rows already formatted as CSV lines.
using Tables = std::map<std::string, std::vector<std::string>>;

struct Task {
  std::string id;
  std::function<Tables()> run;
};

struct TableSpec {
  std::string name;
  std::string header;
};

std::string cell(double x) { return format_double(x); }
std::string cell(long long x) { return std::to_string(x); }
std::string cell(std::uint64_t x) { return std::to_string(x); }

template <class... T>
std::string line(const T&... cells) {
  std::string out;
  ((out += (out.empty() ? "" : ",") + cells), ...);
  return out;
}

std::vector<TableSpec> table_specs(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::classical_scaling:
      return {{"gaps", "n,seed_index,seed,bimodal,e0,gap"}};
    case ExperimentKind::qcp_scaling:
    case ExperimentKind::glass_scaling:
      return {{"gaps", "n,seed_index,seed,bimodal,gamma,gap,theta_peak"}};
    case ExperimentKind::bottleneck_census:
      return {{"events",
               "n,seed_index,seed,bimodal,gamma_n,delta_e,delta_gamma,delta_theta,delta_e_ref,action,c,ratio_to_next,"
               "semiclassical"},
              {"counts", "n,seed_index,seed,bimodal,swept,events,gamma_lo,trace_points,crossings"}};
    case ExperimentKind::langevin_universal:
      return {{"events", "path,gamma_n,jump,delta_v,action,c,ratio_to_next"},
              {"paths", "path,events,wide_jumps,edge_steps,extended"}};
    case ExperimentKind::xcheck:
      return {{"comparison", "n,seed_index,seed,bimodal,median_rel_error,gamma_min_exact,gamma_min_ring,location_diff"},
              {"gammas", "n,seed_index,seed,bimodal,gamma,exact_gap,ring_gap,rel_error"}};
  }
  return {};
}

std::string dist_label(Disorder d) { return to_string(d); }

const AiryPotentialTable& shared_airy_table() {
  static const AiryPotentialTable t = build_airy_table();
  return t;
}

std::vector<Task> make_tasks(const ExperimentConfig& c) {
  std::vector<Task> tasks;
  const std::string kind = to_string(c.kind);
  if (c.kind == ExperimentKind::langevin_universal) {
    const std::size_t per = c.paths_per_task, n = c.langevin.n_paths;
    for (std::size_t first = 0; first < n; first += per) {
      const std::size_t last = std::min(n, first + per);
      char id[64];
      std::snprintf(id, sizeof(id), "paths-%07zu-%07zu", first, last - 1);
      tasks.push_back({id, [c, first, last] {
                         Tables t;
                         auto& ev = t["events"];
                         auto& pa = t["paths"];
                         for (std::size_t p = first; p < last; ++p) {
                           UniversalResult diag;
                           const auto events = universal_path_events(shared_airy_table(), c.langevin, p, &diag);
                           for (const auto& e : events)
                             ev.push_back(line(cell(std::uint64_t(p)), cell(e.gamma_n), cell(e.jump), cell(e.delta_v),
                                               cell(e.action), cell(e.c_exponent), cell(e.ratio_to_next)));
                           pa.push_back(line(cell(std::uint64_t(p)), cell(std::uint64_t(events.size())),
                                             cell(std::uint64_t(diag.wide_jumps)), cell(std::uint64_t(diag.edge_steps)),
                                             cell(std::uint64_t(diag.extended_paths))));
                         }
                         return t;
                       }});
    }
    return tasks;
  }
  for (const Disorder dist : c.disorders) {
    const std::string label = kind + ":" + dist_label(dist);
    const long long bim = dist == Disorder::bimodal ? 1 : 0;
    for (const Eigen::Index n : c.n_values) {
      const auto seed_of = [&c, label, n](std::size_t s) {
        return derive_seed(c.master_seed, label, std::uint64_t(n), std::uint64_t(s));
      };
      const std::string base = dist_label(dist) + "-n" + std::to_string(n);
      switch (c.kind) {
        case ExperimentKind::classical_scaling:
          tasks.push_back({base, [&c, n, dist, bim, seed_of] {
                             Tables t;
                             for (std::size_t s = 0; s < c.seeds; ++s) {
                               const auto seed = seed_of(s);
                               const auto inst = generate(n, dist, seed);
                               const auto sol = solve_classical(inst);
                               t["gaps"].push_back(line(cell((long long)n), cell((long long)s), cell(seed), cell(bim),
                                                        cell(sol.e0), cell(classical_gap(sol))));
                             }
                             return t;
                           }});
          break;
        case ExperimentKind::qcp_scaling:
        case ExperimentKind::glass_scaling:
          tasks.push_back({base, [&c, n, dist, bim, seed_of] {
                             Tables t;
                             const double g = c.kind == ExperimentKind::qcp_scaling ? qcp_gamma(n) : c.gamma;
                             for (std::size_t s = 0; s < c.seeds; ++s) {
                               const auto seed = seed_of(s);
                               const auto inst = generate(n, dist, seed);
                               const PotentialEvaluator ev(inst, g);
                               const auto sr = solve_ring(ev.periodic_grid(default_n_points(g, n)), 2);
                               t["gaps"].push_back(line(cell((long long)n), cell((long long)s), cell(seed), cell(bim),
                                                        cell(g), cell(sr.gap), cell(sr.theta_peak)));
                             }
                             return t;
                           }});
          break;
        case ExperimentKind::bottleneck_census:
          for (std::size_t s = 0; s < c.seeds; ++s) {
            char id[96];
            std::snprintf(id, sizeof(id), "%s-s%05zu", base.c_str(), s);
            tasks.push_back({id, [&c, n, dist, bim, s, seed_of] {
                               Tables t;
                               const auto seed = seed_of(s);
                               const auto inst = generate(n, dist, seed);
                               const double lo = gamma_min(inst);
                               const auto key = line(cell((long long)n), cell((long long)s), cell(seed), cell(bim));
                               t["events"];
                               // Classical gap above the sweep start: nothing to sweep.
                               if (!(lo < c.gamma_hi)) {
                                 t["counts"].push_back(line(key, cell(0LL), cell(0LL), cell(lo), cell(0LL), cell(0LL)));
                                 return t;
                               }
                               const auto tr = sweep_gap(inst, c.gamma_hi, lo, c.sweep);
                               const auto diag = last_sweep_diagnostics();
                               const auto events = detect_bottlenecks(tr, c.detect);
                               for (const auto& e : events)
                                 t["events"].push_back(line(key, cell(e.gamma_n), cell(e.delta_e), cell(e.delta_gamma),
                                                            cell(e.delta_theta), cell(e.delta_e_ref), cell(e.action),
                                                            cell(e.c_exponent), cell(e.ratio_to_next),
                                                            cell((long long)(e.method == GapMethod::semiclassical))));
                               t["counts"].push_back(line(key, cell(1LL), cell((long long)events.size()), cell(lo),
                                                          cell((long long)tr.size()), cell((long long)diag.crossings)));
                               return t;
                             }});
          }
          break;
        case ExperimentKind::xcheck:
          for (std::size_t s = 0; s < c.seeds; ++s) {
            char id[96];
            std::snprintf(id, sizeof(id), "%s-s%05zu", base.c_str(), s);
            tasks.push_back({id, [&c, n, dist, bim, s, seed_of] {
                               Tables t;
                               const auto seed = seed_of(s);
                               const auto gammas = xcheck_grid(c);
                               const auto rep = ring_vs_exact_report({generate(n, dist, seed)}, gammas);
                               const auto key = line(cell((long long)n), cell((long long)s), cell(seed), cell(bim));
                               std::vector<double> err;
                               std::size_t ie = 0, ir = 0;
                               for (std::size_t j = 0; j < rep.rows.size(); ++j) {
                                 const auto& r = rep.rows[j];
                                 err.push_back(r.rel_error);
                                 if (r.exact_gap < rep.rows[ie].exact_gap) ie = j;
                                 if (r.ring_gap < rep.rows[ir].ring_gap) ir = j;
                                 t["gammas"].push_back(line(key, cell(r.gamma), cell(r.exact_gap), cell(r.ring_gap),
                                                            cell(r.rel_error)));
                               }
                               t["comparison"].push_back(line(key, cell(median(err)), cell(gammas[ie]),
                                                              cell(gammas[ir]), cell(rep.min_location_diff[0])));
                               return t;
                             }});
          }
          break;
        case ExperimentKind::langevin_universal:
          break;
      }
    }
  }
  return tasks;
}

std::string now_utc() {
  const std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

void write_atomic(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    auto f = open_output(tmp.string());
    f << content;
    if (!f) throw std::runtime_error("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

fs::path task_file(const fs::path& dir, const std::string& id, const std::string& table) {
  return dir / "tasks" / (id + "." + table + ".csv");
}

json record_json(const RunRecord& r, const std::string& started) {
  json j;
  j["config_hash"] = r.config_hash;
  j["config"] = r.config;
  j["kind"] = to_string(r.kind);
  j["name"] = r.name;
  j["version"] = r.version;
  j["started"] = started;
  j["updated"] = now_utc();
  j["seconds"] = r.seconds;
  j["complete"] = r.complete;
  j["failures"] = r.failures;
  j["status"] = !r.complete ? "partial" : r.failures ? "failed" : "ok";
  j["outputs"] = r.outputs;
  json tasks = json::array();
  for (const auto& t : r.tasks) {
    json x;
    x["id"] = t.id;
    x["ok"] = t.ok;
    x["resumed"] = t.resumed;
    x["seconds"] = t.seconds;
    if (!t.error.empty()) x["error"] = t.error;
    tasks.push_back(x);
  }
  j["tasks"] = tasks;
  return j;
}

// Histogram rows "bin_lo,bin_hi,count,density" with a final overflow bin.
std::string histogram_csv(const std::vector<double>& v, double lo, double hi, int bins) {
  std::vector<std::size_t> count(std::size_t(bins) + 1, 0);
  const double w = (hi - lo) / bins;
  std::size_t total = 0;
  for (double x : v) {
    if (!std::isfinite(x) || x < lo) continue;
    const auto b = std::min<std::size_t>(std::size_t((x - lo) / w), std::size_t(bins));
    ++count[b];
    ++total;
  }
  std::string out = "bin_lo,bin_hi,count,density\n";
  for (int b = 0; b <= bins; ++b) {
    const double a = lo + b * w, z = b < bins ? a + w : std::numeric_limits<double>::infinity();
    const double dens = total && b < bins ? double(count[std::size_t(b)]) / (double(total) * w) : 0.0;
    out += line(cell(a), cell(z), cell(std::uint64_t(count[std::size_t(b)])), cell(dens)) + "\n";
  }
  return out;
}

void write_histograms(const ExperimentConfig& c, const fs::path& dir, std::vector<std::string>& outputs) {
  const auto t = read_csv((dir / "events.csv").string());
  const auto col = [&t](const char* name) {
    std::vector<double> v;
    const int k = t.column(name);
    for (const auto& r : t.rows) v.push_back(r[std::size_t(k)]);
    return v;
  };
  std::vector<double> lr;
  for (double r : col("ratio_to_next"))
    if (std::isfinite(r) && r > 0.0) lr.push_back(std::log10(r));
  const struct {
    const char* file;
    std::string body;
  } hs[] = {{"hist_jump.csv", histogram_csv(col("jump"), 0.0, c.langevin.detect.resonance_window, 40)},
            {"hist_c.csv", histogram_csv(col("c"), 0.0, 0.5, 50)},
            {"hist_log10_ratio.csv", histogram_csv(lr, 0.0, c.langevin.decades, 30)}};
  for (const auto& h : hs) {
    write_atomic(dir / h.file, h.body);
    outputs.push_back(h.file);
  }
}

}  // namespace

RunRecord run_experiment(const ExperimentConfig& c, const RunOptions& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  RunRecord rec;
  rec.config_hash = config_hash(c);
  rec.config = canonical_config(c);
  rec.kind = c.kind;
  rec.name = c.name;
  rec.dir = output_dir(c);
  rec.version = QAB_VERSION;
  const fs::path dir(rec.dir);
  fs::create_directories(dir / "tasks");
  std::string started = now_utc();
  const fs::path manifest = dir / "manifest.json";
  if (fs::exists(manifest)) {
    const json old = json::parse(read_file(manifest));
    if (old.value("config_hash", "") != rec.config_hash)
      throw ConfigError(rec.dir + ": output directory holds a run of a different configuration");
    started = old.value("started", started);
  }
  write_atomic(dir / "config.yaml", rec.config);

  const auto tasks = make_tasks(c);
  const auto specs = table_specs(c.kind);
  rec.tasks.resize(tasks.size());
  std::atomic<std::size_t> next{0}, executed{0};
  std::mutex log_mu;
  const auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      auto& tr = rec.tasks[i];
      tr.id = tasks[i].id;
      const fs::path done = dir / "tasks" / (tr.id + ".done");
      if (fs::exists(done)) {
        const json d = json::parse(read_file(done));
        if (d.value("config_hash", "") == rec.config_hash) {
          tr.ok = tr.resumed = true;
          tr.seconds = d.value("seconds", 0.0);
          continue;
        }
      }
      const bool selected =
          opt.only.empty() || std::find(opt.only.begin(), opt.only.end(), tr.id) != opt.only.end();
      if (!selected || executed.fetch_add(1) >= opt.max_tasks) {
        tr.error = "not run";
        continue;
      }
      const auto ts = std::chrono::steady_clock::now();
      try {
        const Tables out = tasks[i].run();
        for (const auto& sp : specs) {
          std::string body;
          if (const auto it = out.find(sp.name); it != out.end())
            for (const auto& l : it->second) body += l + "\n";
          write_atomic(task_file(dir, tr.id, sp.name), body);
        }
        tr.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - ts).count();
        json d;
        d["config_hash"] = rec.config_hash;
        d["seconds"] = tr.seconds;
        write_atomic(done, d.dump() + "\n");
        tr.ok = true;
      } catch (const std::exception& e) {
        tr.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - ts).count();
        tr.error = e.what();
      }
      if (opt.log) {
        const std::lock_guard<std::mutex> lock(log_mu);
        *opt.log << "[" << (i + 1) << "/" << tasks.size() << "] " << tr.id << (tr.ok ? " ok " : " FAILED ")
                 << format_double(std::round(tr.seconds * 100.0) / 100.0) << "s"
                 << (tr.error.empty() ? "" : ": " + tr.error) << std::endl;
      }
    }
  };
  const std::size_t nt = std::max<std::size_t>(1, std::min(c.threads, tasks.size()));
  std::vector<std::thread> pool;
  for (std::size_t k = 1; k < nt; ++k) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  rec.complete = true;
  for (const auto& t : rec.tasks) {
    if (t.error == "not run") rec.complete = false;
    else if (!t.ok) ++rec.failures;
  }
  // Aggregates follow task order, never completion order.
  for (const auto& sp : specs) {
    std::string body = sp.header + "\n";
    for (const auto& t : rec.tasks)
      if (t.ok) body += read_file(task_file(dir, t.id, sp.name));
    write_atomic(dir / (sp.name + ".csv"), body);
    rec.outputs.push_back(sp.name + ".csv");
  }
  if (c.kind == ExperimentKind::langevin_universal) write_histograms(c, dir, rec.outputs);
  rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_atomic(manifest, record_json(rec, started).dump(2) + "\n");
  if (rec.complete) {
    const Report r = report(rec);
    write_atomic(dir / "report.json", report_json(r));
    write_atomic(dir / "report.txt", format_report(r));
  }
  return rec;
}

std::vector<std::string> task_ids(const ExperimentConfig& c) {
  std::vector<std::string> ids;
  for (const auto& t : make_tasks(c)) ids.push_back(t.id);
  return ids;
}

RunRecord load_record(const std::string& dir) {
  const fs::path manifest = fs::path(dir) / "manifest.json";
  if (!fs::exists(manifest)) throw std::runtime_error(dir + ": no manifest.json");
  const json j = json::parse(read_file(manifest));
  RunRecord r;
  r.dir = dir;
  r.config_hash = j.at("config_hash").get<std::string>();
  r.config = j.at("config").get<std::string>();
  r.kind = experiment_kind_from_string(j.at("kind").get<std::string>());
  r.name = j.at("name").get<std::string>();
  r.version = j.value("version", "");
  r.seconds = j.value("seconds", 0.0);
  r.complete = j.value("complete", false);
  r.failures = j.value("failures", std::size_t(0));
  r.outputs = j.value("outputs", std::vector<std::string>{});
  for (const auto& t : j.value("tasks", json::array())) {
    TaskRecord tr;
    tr.id = t.value("id", "");
    tr.ok = t.value("ok", false);
    tr.resumed = t.value("resumed", false);
    tr.seconds = t.value("seconds", 0.0);
    tr.error = t.value("error", "");
    r.tasks.push_back(tr);
  }
  return r;
}

// ---------------------------------------------------------------- report

std::vector<std::vector<double>> ratios_by_decade(const std::vector<UniversalEvent>& events, double gamma_lo,
                                                  int decades, double max_ratio) {
  std::vector<std::vector<double>> out(std::size_t(std::max(decades, 0)));
  for (const auto& e : events) {
    if (!std::isfinite(e.ratio_to_next) || e.ratio_to_next > max_ratio) continue;
    const int k = int(std::floor(std::log10(e.gamma_n / gamma_lo)));
    if (k >= 1 && k < decades) out[std::size_t(k)].push_back(e.ratio_to_next);
  }
  return out;
}

std::vector<DecadeKs> decade_ks(const std::vector<std::vector<double>>& by_decade) {
  std::vector<DecadeKs> out;
  for (std::size_t a = 0; a < by_decade.size(); ++a)
    for (std::size_t b = a + 1; b < by_decade.size(); ++b) {
      if (by_decade[a].empty() || by_decade[b].empty()) continue;
      DecadeKs d;
      d.a = int(a);
      d.b = int(b);
      d.n_a = by_decade[a].size();
      d.n_b = by_decade[b].size();
      d.ks = ks_two_sample(by_decade[a], by_decade[b]);
      out.push_back(d);
    }
  return out;
}

namespace {

double col(const CsvTable& t, const std::vector<double>& row, const char* name) {
  const int k = t.column(name);
  if (k < 0) throw std::runtime_error(std::string("missing column ") + name);
  return row[std::size_t(k)];
}

}  // namespace

std::vector<UniversalEvent> read_universal_events(const std::string& dir) {
  const auto t = read_csv((fs::path(dir) / "events.csv").string());
  std::vector<UniversalEvent> out;
  for (const auto& r : t.rows) {
    UniversalEvent e;
    e.path = std::size_t(col(t, r, "path"));
    e.gamma_n = col(t, r, "gamma_n");
    e.jump = col(t, r, "jump");
    e.delta_v = col(t, r, "delta_v");
    e.action = col(t, r, "action");
    e.c_exponent = col(t, r, "c");
    e.ratio_to_next = col(t, r, "ratio_to_next");
    out.push_back(e);
  }
  return out;
}

std::vector<InstanceEvents> read_census(const std::string& dir) {
  const auto counts = read_csv((fs::path(dir) / "counts.csv").string());
  const auto events = read_csv((fs::path(dir) / "events.csv").string());
  std::map<std::tuple<int, long long, long long>, InstanceEvents> byid;
  std::vector<std::tuple<int, long long, long long>> order;
  for (const auto& r : counts.rows) {
    const auto key = std::make_tuple(int(col(counts, r, "bimodal")), (long long)col(counts, r, "n"),
                                     (long long)col(counts, r, "seed_index"));
    InstanceEvents ie;
    ie.n_spins = Eigen::Index(std::get<1>(key));
    ie.seed = std::uint64_t(std::get<2>(key));
    ie.dist = std::get<0>(key) ? Disorder::bimodal : Disorder::gaussian;
    byid.emplace(key, ie);
    order.push_back(key);
  }
  for (const auto& r : events.rows) {
    const auto key = std::make_tuple(int(col(events, r, "bimodal")), (long long)col(events, r, "n"),
                                     (long long)col(events, r, "seed_index"));
    BottleneckEvent e;
    e.gamma_n = col(events, r, "gamma_n");
    e.delta_e = col(events, r, "delta_e");
    e.delta_gamma = col(events, r, "delta_gamma");
    e.delta_theta = col(events, r, "delta_theta");
    e.delta_e_ref = col(events, r, "delta_e_ref");
    e.action = col(events, r, "action");
    e.c_exponent = col(events, r, "c");
    e.ratio_to_next = col(events, r, "ratio_to_next");
    e.method = col(events, r, "semiclassical") != 0.0 ? GapMethod::semiclassical : GapMethod::numeric;
    const auto it = byid.find(key);
    if (it != byid.end()) it->second.events.push_back(e);
  }
  std::vector<InstanceEvents> out;
  for (const auto& k : order) out.push_back(byid[k]);
  return out;
}

namespace {

ReportLine slope_line(const std::string& q, const SlopeFit& f, const std::string& expected) {
  ReportLine l;
  l.quantity = q;
  l.observed = f.slope;
  l.ci_lo = f.ci_lo;
  l.ci_hi = f.ci_hi;
  l.expected = expected;
  l.n = f.n_points;
  return l;
}

ReportLine value_line(const std::string& q, double v, std::size_t n, const std::string& expected = "") {
  ReportLine l;
  l.quantity = q;
  l.observed = v;
  l.n = n;
  l.expected = expected;
  return l;
}

void gap_report(Report& r, const fs::path& dir, const FitOptions& fo, const std::string& what,
                const std::string& expected) {
  const auto t = read_csv((dir / "gaps.csv").string());
  std::map<int, std::vector<GapSample>> by_dist;
  for (const auto& row : t.rows) {
    GapSample s;
    s.n_spins = Eigen::Index(col(t, row, "n"));
    s.seed = std::uint64_t(col(t, row, "seed_index"));
    s.gap = col(t, row, "gap");
    by_dist[int(col(t, row, "bimodal"))].push_back(s);
  }
  r.has_data = !t.rows.empty();
  for (const auto& [bim, samples] : by_dist) {
    const std::string tag = bim ? " (bimodal)" : " (gaussian)";
    std::map<Eigen::Index, std::vector<double>> per_n;
    for (const auto& s : samples) per_n[s.n_spins].push_back(s.gap);
    for (const auto& [n, g] : per_n) r.lines.push_back(value_line("median " + what + " N=" + std::to_string(n) + tag, median(g), g.size()));
    try {
      r.lines.push_back(slope_line("slope ln median " + what + " vs ln N" + tag, fit_gap_scaling(samples, fo),
                                   bim ? "" : expected));
    } catch (const std::exception& e) {
      r.notes.push_back(std::string("fit failed") + tag + ": " + e.what());
    }
  }
}

}  // namespace

Report report(const RunRecord& rec) {
  Report r;
  r.name = rec.name;
  r.kind = to_string(rec.kind);
  const fs::path dir(rec.dir);
  if (rec.tasks.empty() && rec.outputs.empty()) {
    r.notes.push_back("no data");
    return r;
  }
  for (const auto& o : rec.outputs)
    if (!fs::exists(dir / o)) r.notes.push_back("missing output: " + o);
  if (!r.notes.empty()) return r;
  if (!rec.complete) r.notes.push_back("run incomplete; resume it to finish");
  if (rec.failures) r.notes.push_back(std::to_string(rec.failures) + " task(s) failed");
  ExperimentConfig cfg;
  try {
    cfg = parse_config(rec.config, (dir / "manifest.json").string());
  } catch (const ConfigError& e) {
    r.notes.push_back(e.what());
    return r;
  }
  switch (rec.kind) {
    case ExperimentKind::classical_scaling:
      gap_report(r, dir, cfg.fit, "classical gap", "-1.0 +- 0.2");
      break;
    case ExperimentKind::qcp_scaling:
      gap_report(r, dir, cfg.fit, "gap at 1 - N^{-2/3}", "-1/3 +- 0.05");
      break;
    case ExperimentKind::glass_scaling:
      gap_report(r, dir, cfg.fit, "gap at gamma " + format_double(cfg.gamma), "-1/4 +- 0.05");
      break;
    case ExperimentKind::bottleneck_census: {
      const auto runs = read_census(dir.string());
      r.has_data = !runs.empty();
      for (const Disorder d : {Disorder::gaussian, Disorder::bimodal}) {
        std::vector<InstanceEvents> sub;
        std::size_t swept = 0;
        for (const auto& x : runs)
          if (x.dist == d) sub.push_back(x);
        if (sub.empty()) continue;
        const std::string tag = " (" + to_string(d) + ")";
        std::map<Eigen::Index, std::vector<double>> per_n;
        for (const auto& x : sub) per_n[x.n_spins].push_back(double(x.events.size()));
        for (const auto& [n, v] : per_n)
          r.lines.push_back(value_line("mean events N=" + std::to_string(n) + tag, mean(v), v.size()));
        const auto counts = read_csv((dir / "counts.csv").string());
        for (const auto& row : counts.rows)
          if (int(col(counts, row, "bimodal")) == int(d == Disorder::bimodal)) swept += col(counts, row, "swept") != 0.0;
        r.lines.push_back(value_line("instances with a non-empty sweep range" + tag, double(swept), sub.size()));
        try {
          r.lines.push_back(slope_line("alpha: mean events vs ln N" + tag, fit_event_density(sub, cfg.fit),
                                       d == Disorder::gaussian ? "0.15 +- 0.05" : "0"));
        } catch (const std::exception& e) {
          r.notes.push_back("alpha fit failed" + tag + ": " + e.what());
        }
        if (d == Disorder::gaussian) {
          std::vector<double> cs;
          for (const auto& x : sub)
            for (const auto& e : x.events) cs.push_back(e.c_exponent);
          if (!cs.empty()) r.lines.push_back(value_line("median c" + tag, median(cs), cs.size()));
          try {
            r.lines.push_back(slope_line("slope ln action vs ln(gamma_n N)" + tag, fit_action_exponent(sub, cfg.fit),
                                         "0.75 +- 0.1"));
          } catch (const std::exception& e) {
            r.notes.push_back("action exponent fit failed" + tag + ": " + e.what());
          }
        }
      }
      break;
    }
    case ExperimentKind::langevin_universal: {
      const auto paths = read_csv((dir / "paths.csv").string());
      const auto events = read_universal_events(dir.string());
      r.has_data = !paths.rows.empty();
      if (!r.has_data) break;
      std::vector<double> n;
      std::size_t wide = 0, edge = 0;
      for (const auto& row : paths.rows) {
        n.push_back(col(paths, row, "events"));
        wide += std::size_t(col(paths, row, "wide_jumps"));
        edge += std::size_t(col(paths, row, "edge_steps"));
      }
      const double span = cfg.langevin.decades * std::log(10.0);
      const double m = mean(n);
      double var = 0.0;
      for (double x : n) var += (x - m) * (x - m);
      const double se = n.size() > 1 ? std::sqrt(var / double(n.size() - 1) / double(n.size())) / span : 0.0;
      ReportLine a = value_line("alpha: events per unit ln gamma", m / span, n.size(), "0.15 +- 0.05");
      a.ci_lo = a.observed - 1.96 * se;
      a.ci_hi = a.observed + 1.96 * se;
      r.lines.push_back(a);
      r.lines.push_back(value_line("events", double(events.size()), n.size()));
      r.lines.push_back(value_line("identity changes beyond the resonance window", double(wide), n.size()));
      r.lines.push_back(value_line("steps with the minimum at the window edge", double(edge), n.size()));
      const int dec = int(cfg.langevin.decades);
      std::vector<std::size_t> per(std::size_t(dec), 0);
      for (const auto& e : events) {
        const int k = int(std::floor(std::log10(e.gamma_n / cfg.langevin.gamma_lo)));
        if (k >= 0 && k < dec) ++per[std::size_t(k)];
      }
      for (int k = 0; k < dec; ++k)
        r.lines.push_back(value_line("events in decade " + std::to_string(k), double(per[std::size_t(k)]), n.size()));
      const auto by = ratios_by_decade(events, cfg.langevin.gamma_lo, dec);
      for (const auto& d : decade_ks(by)) {
        ReportLine l = value_line("ratio KS p, decades " + std::to_string(d.a) + " vs " + std::to_string(d.b),
                                  d.ks.p_value, d.n_a + d.n_b, "> 0.01");
        l.ci_lo = l.ci_hi = std::numeric_limits<double>::quiet_NaN();
        r.lines.push_back(l);
      }
      std::vector<double> cs;
      for (const auto& e : events) cs.push_back(e.c_exponent);
      if (!cs.empty()) r.lines.push_back(value_line("median c", median(cs), cs.size()));
      break;
    }
    case ExperimentKind::xcheck: {
      const auto t = read_csv((dir / "comparison.csv").string());
      const auto g = read_csv((dir / "gammas.csv").string());
      r.has_data = !t.rows.empty();
      std::map<long long, std::vector<double>> err, loc;
      for (const auto& row : g.rows) err[(long long)col(g, row, "n")].push_back(col(g, row, "rel_error"));
      for (const auto& row : t.rows) loc[(long long)col(t, row, "n")].push_back(col(t, row, "location_diff"));
      for (const auto& [n, e] : err)
        r.lines.push_back(value_line("median relative gap error N=" + std::to_string(n), median(e), loc[n].size(),
                                     "decreasing in N"));
      for (const auto& [n, l] : loc)
        r.lines.push_back(value_line("median gap-minimum location difference N=" + std::to_string(n), median(l),
                                     l.size(), "<= 0.05 at the largest N"));
      break;
    }
  }
  if (!r.has_data) r.notes.push_back("no data");
  return r;
}

std::string format_report(const Report& r) {
  std::ostringstream os;
  os << "report " << r.name << " (" << r.kind << ")\n";
  if (!r.has_data) os << "no data\n";
  for (const auto& l : r.lines) {
    os << "  " << l.quantity << ": " << format_double(l.observed);
    if (std::isfinite(l.ci_lo)) os << " [" << format_double(l.ci_lo) << ", " << format_double(l.ci_hi) << "]";
    if (l.n) os << " (n=" << l.n << ")";
    if (!l.expected.empty()) os << "  expected " << l.expected;
    os << "\n";
  }
  for (const auto& n : r.notes) os << "  note: " << n << "\n";
  return os.str();
}

std::string report_json(const Report& r) {
  json j;
  j["name"] = r.name;
  j["kind"] = r.kind;
  j["has_data"] = r.has_data;
  const auto num = [](double x) { return std::isfinite(x) ? json(x) : json(nullptr); };
  json lines = json::array();
  for (const auto& l : r.lines) {
    json x;
    x["quantity"] = l.quantity;
    x["observed"] = num(l.observed);
    x["ci_lo"] = num(l.ci_lo);
    x["ci_hi"] = num(l.ci_hi);
    x["expected"] = l.expected;
    x["n"] = l.n;
    lines.push_back(x);
  }
  j["lines"] = lines;
  j["notes"] = r.notes;
  return j.dump(2) + "\n";
}

}  // namespace qab
