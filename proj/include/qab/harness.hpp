#pragma once

#include "qab/instance.hpp"
#include "qab/langevin.hpp"
#include "qab/sweep.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace qab {

enum class ExperimentKind {
  classical_scaling,
  qcp_scaling,
  glass_scaling,
  bottleneck_census,
  langevin_universal,
  xcheck
};

std::string to_string(ExperimentKind k);
ExperimentKind experiment_kind_from_string(const std::string& s);

/// Invalid configuration; the message carries "source:line:column".
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::classical_scaling;
  std::string name;
  std::uint64_t master_seed = 1;
  std::string output;       // relative to output_root() unless absolute
  std::size_t threads = 1;  // not part of the hash: outputs do not depend on it
  std::vector<Eigen::Index> n_values;
  std::size_t seeds = 0;
  std::vector<Disorder> disorders{Disorder::gaussian};
  double gamma = 0.5;                   // glass-scaling
  double gamma_hi = 0.95;               // census sweep start; the sweep ends at the classical gap
  SweepOptions sweep;
  DetectOptions detect;
  std::vector<double> xcheck_gammas;    // empty: 0.3, 0.35, ..., 0.9
  UniversalConfig langevin;
  std::size_t paths_per_task = 100;
  FitOptions fit;
};

ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>");
ExperimentConfig load_config(const std::string& path);

/// Every field in a fixed order; the hash is taken over this text.
std::string canonical_config(const ExperimentConfig& c);
std::string config_hash(const ExperimentConfig& c);

/// $QAB_OUTPUT_ROOT if set, else "runs".
std::string output_root();
std::string output_dir(const ExperimentConfig& c);

struct TaskRecord {
  std::string id;
  bool ok = false;
  bool resumed = false;
  double seconds = 0.0;
  std::string error;
};

struct RunRecord {
  std::string config_hash;
  std::string config;  // canonical text
  ExperimentKind kind = ExperimentKind::classical_scaling;
  std::string name;
  std::string dir;
  std::string version;
  std::vector<TaskRecord> tasks;
  std::vector<std::string> outputs;  // aggregated files, relative to dir
  double seconds = 0.0;
  bool complete = false;  // every task ran (successfully or not)
  std::size_t failures = 0;
};

struct RunOptions {
  // Stop after this many newly executed tasks, leaving a resumable run.
  std::size_t max_tasks = std::numeric_limits<std::size_t>::max();
  // When non-empty, only these task ids run; the rest count as not run.
  std::vector<std::string> only;
  std::ostream* log = nullptr;
};

/// Executes or resumes every task, aggregates the per-task tables in task
/// order and writes manifest.json. Task failures are recorded, not thrown.
/// Throws ConfigError if the output directory belongs to a different config.
RunRecord run_experiment(const ExperimentConfig& c, const RunOptions& opt = {});

/// Task ids of a config, in execution and aggregation order.
std::vector<std::string> task_ids(const ExperimentConfig& c);

/// Reads dir/manifest.json.
RunRecord load_record(const std::string& dir);

struct ReportLine {
  std::string quantity;
  double observed = std::numeric_limits<double>::quiet_NaN();
  double ci_lo = std::numeric_limits<double>::quiet_NaN();
  double ci_hi = std::numeric_limits<double>::quiet_NaN();
  std::string expected;
  std::size_t n = 0;
};

struct Report {
  std::string name;
  std::string kind;
  bool has_data = false;
  std::vector<ReportLine> lines;
  std::vector<std::string> notes;  // missing outputs, failed fits
};

Report report(const RunRecord& record);
std::string format_report(const Report& r);
std::string report_json(const Report& r);

/// Ratio samples Gamma_n / Gamma_{n+1} per ln-gamma decade of Gamma_n, kept
/// only when the successor lies within `max_ratio` so that no decade is
/// censored by the lower end of the sweep. Decade k covers
/// [gamma_lo 10^k, gamma_lo 10^{k+1}); decade 0 is excluded.
std::vector<std::vector<double>> ratios_by_decade(const std::vector<UniversalEvent>& events, double gamma_lo,
                                                  int decades, double max_ratio = 10.0);

struct DecadeKs {
  int a = 0, b = 0;
  std::size_t n_a = 0, n_b = 0;
  KsResult ks;
};

/// Two-sample KS between every pair of decades with data.
std::vector<DecadeKs> decade_ks(const std::vector<std::vector<double>>& by_decade);

/// Universal events read back from a langevin-universal run directory.
std::vector<UniversalEvent> read_universal_events(const std::string& dir);
/// Census instances read back from a bottleneck-census run directory.
std::vector<InstanceEvents> read_census(const std::string& dir);

}  // namespace qab
