#pragma once

#include "qab/instance.hpp"
#include "qab/stats.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <limits>
#include <vector>

namespace qab {

/// How a gap value on the trace was obtained.
enum class GapMethod : std::uint8_t {
  numeric = 0,        // lowest two levels of the discretized ring Hamiltonian
  semiclassical = 1,  // resonant wells solved apart; splitting from the barrier action
};

/// Symmetric-sector gap along a descending transverse-field grid.
struct GapTrace {
  Eigen::Index n_spins = 0;
  std::uint64_t seed = 0;
  std::vector<double> gamma;       // strictly descending
  std::vector<double> gap;         // E1 - E0
  std::vector<double> theta_peak;  // ground-state location on the period-pi circle
  std::vector<double> spread;      // circular standard deviation of the ground density
  std::vector<std::uint8_t> refined;  // 1 for points added around minima
  std::vector<double> width;       // resolved crossings: gamma width where gap <= 2 min; NaN otherwise
  std::vector<GapMethod> method;
  double gamma_min_cutoff = 0.0;

  std::size_t size() const { return gamma.size(); }
  void push_back(double g, double e, double loc, double sp, bool ref = false,
                 double w = std::numeric_limits<double>::quiet_NaN(), GapMethod m = GapMethod::numeric);
  /// Inserts keeping the grid descending; an existing equal gamma is replaced.
  void insert(double g, double e, double loc, double sp, bool ref,
              double w = std::numeric_limits<double>::quiet_NaN(), GapMethod m = GapMethod::numeric);
};

struct SweepOptions {
  double ratio = 0.99;           // geometric grid step
  int levels = 3;                // levels kept per window solve
  double rescan_factor = 2.0;    // full-circle scan whenever gamma fell by this factor
  double scan_margin = 6.0;      // candidate regions: V <= V_min + scan_margin sqrt(N) gamma^{3/2}
  double barrier_action = 40.0;  // Dirichlet windows extend until this tunneling action
  double periodic_fraction = 0.5;  // windows covering more of the circle trigger a periodic solve
  int refine_passes = 2;         // trisection passes around minima without a location jump
  double numeric_floor = 1e-9;   // numeric splittings below this fraction of the well frequency are not trusted
  int root_steps = 60;           // iteration cap when locating a resonance
  double jump_spread_factor = 1.5;  // refinement flags a crossing at half the detection thresholds
  double jump_gamma_factor = 0.25;
};

/// Sweeps gamma from gamma_hi down to gamma_lo (geometric grid), solving the
/// ring model at each point on windows around the low valleys, and refines
/// every local gap minimum. Minima with a ground-location jump are resolved
/// as crossings of two wells.
GapTrace sweep_gap(const DisorderInstance& inst, double gamma_hi, double gamma_lo, const SweepOptions& opt = {});

/// Diagnostic counters of the last sweep in this thread.
struct SweepDiagnostics {
  std::size_t solves = 0;
  std::size_t window_solves = 0;
  std::size_t periodic_solves = 0;
  std::size_t rescans = 0;
  std::size_t margin_retries = 0;
  std::size_t candidate_misses = 0;  // rescans finding the minimum outside the tracked regions
  std::size_t crossings = 0;
  std::size_t semiclassical = 0;
};
const SweepDiagnostics& last_sweep_diagnostics();

struct BottleneckEvent {
  double gamma_n = 0.0;
  double delta_e = 0.0;
  double delta_gamma = 0.0;
  double delta_theta = 0.0;  // in [0, pi/2]
  double delta_e_ref = 0.0;  // median grid gap over the surrounding log-decade
  double action = 0.0;       // |ln(delta_e / delta_e_ref)|
  double c_exponent = 0.0;   // action / (gamma_n N)^{3/4}
  double ratio_to_next = std::numeric_limits<double>::quiet_NaN();  // gamma_n / gamma_{n+1}
  GapMethod method = GapMethod::numeric;
};

struct DetectOptions {
  double gap_ratio = 0.2;      // minimum over the log-decade median must fall below this
  double spread_factor = 3.0;  // |dtheta| > spread_factor * spread
  double gamma_factor = 0.5;   // |dtheta| > gamma_factor * gamma_n
};

/// Bottlenecks of a trace, by descending gamma. Only ratios of gaps enter the
/// thresholds, so rescaling every gap leaves the result unchanged.
std::vector<BottleneckEvent> detect_bottlenecks(const GapTrace& trace, const DetectOptions& opt = {});

/// Lowest sweep bound: the classical gap.
double gamma_min(const DisorderInstance& inst);

/// Landau-Zener failure probability exp(-pi dE dG / (4 rate))^n_runs.
double lz_failure(double delta_e, double delta_gamma, double rate, int n_runs = 1);

/// "Gamma = 1-" for an N-spin system: the edge of the critical window 1 - N^{-2/3}.
double qcp_gamma(Eigen::Index n_spins);

struct GapSample {
  Eigen::Index n_spins = 0;
  std::uint64_t seed = 0;
  double gap = 0.0;
};

struct InstanceEvents {
  Eigen::Index n_spins = 0;
  std::uint64_t seed = 0;
  Disorder dist = Disorder::gaussian;
  std::vector<BottleneckEvent> events;
};

struct SlopeFit {
  double slope = 0.0;
  double slope_se = 0.0;
  double intercept = 0.0;
  double ci_lo = 0.0, ci_hi = 0.0;  // 95% bootstrap interval
  std::size_t n_points = 0;
};

struct ActionStats {
  std::size_t n = 0;
  double mean = 0.0, median = 0.0, q25 = 0.0, q75 = 0.0;
};

struct ScalingReport {
  bool has_qcp = false, has_glass = false, has_alpha = false, has_exponent = false;
  SlopeFit qcp;          // ln median gap vs ln N at gamma = 1-
  SlopeFit glass;        // same at gamma = 0.5
  SlopeFit alpha;        // mean event count vs ln N
  SlopeFit exponent_34;  // ln action vs ln(gamma_n N) over events
  ActionStats c_stats;
  std::vector<std::pair<Eigen::Index, double>> mean_events;  // per N
};

struct FitOptions {
  std::size_t min_n_values = 4;
  std::size_t min_seeds = 50;
  int n_boot = 2000;
  std::uint64_t seed = 1;
};

/// ln(median gap) against ln N with a bootstrap over instances.
SlopeFit fit_gap_scaling(const std::vector<GapSample>& samples, const FitOptions& opt = {});
/// Mean event count per instance against ln N.
SlopeFit fit_event_density(const std::vector<InstanceEvents>& runs, const FitOptions& opt = {});
/// ln(action) against ln(gamma_n N) over all events.
SlopeFit fit_action_exponent(const std::vector<InstanceEvents>& runs, const FitOptions& opt = {});

/// Runs the fits for every non-empty input; non-empty inputs must satisfy the
/// minimum N-value and seed counts.
ScalingReport fit_scalings(const std::vector<GapSample>& qcp, const std::vector<GapSample>& glass,
                           const std::vector<InstanceEvents>& census, const FitOptions& opt = {});

}  // namespace qab
