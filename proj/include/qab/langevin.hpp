#pragma once

#include "qab/rng.hpp"
#include "qab/stats.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <limits>
#include <vector>

namespace qab {

/// psi(nu) = x Ai(x^2) - Ai'(x^2) with x = nu / 6^{1/3}, and its derivative.
double airy_psi(double nu);
double airy_psi_prime(double nu);

/// Langevin potential U = -ln psi on a uniform nu grid, with the equilibrium
/// density rho = psi^2 / Z.
struct AiryPotentialTable {
  Eigen::ArrayXd nu;
  Eigen::ArrayXd u;
  Eigen::ArrayXd u_prime;
  Eigen::ArrayXd rho;
  Eigen::ArrayXd cdf;  // trapezoidal cumulative of rho, cdf[0] = 0, cdf[n-1] = 1
  double mean_nu = 0.0;

  double step() const { return nu.size() > 1 ? nu[1] - nu[0] : 0.0; }
  /// U'(nu): linear interpolation inside the table, the asymptotic
  /// U ~ |nu|^3 / 9 continued from the edges outside.
  double drift(double v) const;
  double rho_cdf(double v) const;
};

/// Throws std::runtime_error if psi <= 0 anywhere on the grid.
AiryPotentialTable build_airy_table(double nu_min = -6.0, double nu_max = 8.0, int n = 14001);

/// Point mass at nu0, for degenerate runs.
AiryPotentialTable point_mass_table(double nu0);

/// Inverse-CDF draw from rho.
double sample_equilibrium(const AiryPotentialTable& table, Rng& rng);
double sample_equilibrium(const AiryPotentialTable& table, std::uint64_t seed);

enum class Branch : int { plus = 1, minus = -1 };

/// One branch of the conditioned extremal process: nu by Euler-Maruyama,
/// mu = ln chi and theta by trapezoidal integration of the stored nu.
struct LangevinPath {
  Branch branch = Branch::plus;
  std::uint64_t seed = 0;
  double dtau = 0.0;
  Eigen::ArrayXd tau, nu, mu, theta;
  bool truncated = false;  // stopped because exp(2 mu / 3) would overflow
};

struct BranchOptions {
  double tau_max = 40.0;
  double dtau = 1e-3;
  double mu0 = -30.0;         // chi(0) = e^{mu0} stands in for chi(-inf) = 0
  double mu_overflow = 600.0;
  bool noise = true;
};

/// Integrates d nu = -U'(nu) dtau + dW from nu0 with its own noise stream.
/// Paths with the same seed and a longer tau_max extend shorter ones exactly.
LangevinPath integrate_branch(const AiryPotentialTable& table, double nu0, Branch branch,
                              const BranchOptions& opt, std::uint64_t seed);

/// chi(theta) around the global minimum at the origin, plus optional
/// independent two-sided Brownian motions eta_n on the same nodes.
struct Landscape {
  Eigen::ArrayXd theta;  // strictly ascending, contains 0 with chi = 0
  Eigen::ArrayXd chi;
  std::vector<Eigen::ArrayXd> eta;
  // Filled by index_landscape: running integrals of chi then each eta from
  // the origin, and the widest node gap between the origin and each node.
  std::vector<Eigen::ArrayXd> integral;
  Eigen::ArrayXd gap_out;

  double theta_min() const { return theta[0]; }
  double theta_max() const { return theta[theta.size() - 1]; }
};

/// Precomputes the lookup tables used by smooth_landscape. Landscapes
/// without them are smoothed by a slower direct walk.
void index_landscape(Landscape& l);

/// Joins the branches (minus mirrored to theta < 0). Throws if a branch is
/// not monotone in theta.
Landscape landscape_from_branches(const LangevinPath& plus, const LangevinPath& minus, int n_noise = 0,
                                  std::uint64_t noise_seed = 0);

/// (theta, chi, eta) -> (l theta, l^{3/2} chi, l^{1/2} eta).
Landscape scale_landscape(const Landscape& l, double ell);
/// One rescaling step for a gamma increase by e^{dln_gamma}: the landscape
/// in units of the new gamma. Requires dln_gamma > 0.
Landscape rescale_step(const Landscape& l, double dln_gamma);

/// Log-log slope of chi against |theta| over a theta range of the plus side.
double landscape_exponent(const Landscape& l, double theta_lo, double theta_hi);

enum class KernelMode { integral, gaussian };

struct SmoothOptions {
  double half_width = 12.0;  // output window |theta| <= half_width * gamma
  double step = 0.1;         // grid step in units of gamma
  double cutoff = 8.0;       // kernel support |s| <= cutoff
  KernelMode kernel = KernelMode::integral;
  int n_max = 8;             // noise terms used, capped by the landscape
};

struct SmoothedPotential {
  double gamma = 0.0;
  Eigen::ArrayXd theta;
  Eigen::ArrayXd v;
};

/// Smoothing kernel f (unit mass) and noise kernels g_n in units of gamma,
/// evaluated from their integral representations in the small-gamma limit.
double smoothing_kernel(double s);
double noise_kernel(int n, double s);

/// Effective potential at scale gamma: f_gamma * chi + sum_n g_n * eta_n on
/// a uniform grid. Throws if the landscape does not cover or resolve the window.
SmoothedPotential smooth_landscape(const Landscape& l, double gamma, const SmoothOptions& opt = {});

struct UniversalEvent {
  double gamma_n = 0.0;       // rescaled units
  double jump = 0.0;          // |dtheta| / gamma_n
  double delta_v = 0.0;       // barrier in units of gamma_n^{3/2}
  double action = 0.0;        // kappa sqrt(M dV) dtheta
  double c_exponent = 0.0;    // action / (gamma_n N)^{3/4}
  double ratio_to_next = std::numeric_limits<double>::quiet_NaN();
  std::size_t path = 0;
};

struct DetectUniversalOptions {
  double resonance_window = 2.0;  // competitors at most this many gamma apart
  double kappa = 1.0;
  double track_radius = 0.5;      // continuation of a minimum between steps, in gamma
};

struct UniversalSweep {
  std::vector<SmoothedPotential> steps;  // ascending gamma
  std::size_t wide_jumps = 0;            // identity changes beyond the resonance window
  std::size_t edge_steps = 0;            // global minimum at the window edge
};

/// Smoothed landscapes along gamma_lo * e^{k dln_gamma}, built by repeated
/// rescale_step and unit-scale smoothing.
UniversalSweep rescaling_sweep(const Landscape& l, double gamma_lo, double decades, double dln_gamma,
                               const SmoothOptions& opt = {});

/// Changes of the deepest smoothed minimum between resonant competitors.
std::vector<UniversalEvent> detect_universal_events(UniversalSweep& sweep, double n_spins,
                                                    const DetectUniversalOptions& opt = {});

struct UniversalConfig {
  std::size_t n_paths = 1000;
  BranchOptions branch;
  SmoothOptions smooth;
  DetectUniversalOptions detect;
  double gamma_lo = 1e-6;
  double decades = 3.0;
  double dln_gamma = 0.01;
  double n_spins = 1e6;  // enters the action only through M
  std::uint64_t master_seed = 1;
};

struct UniversalResult {
  std::vector<UniversalEvent> events;
  std::vector<std::size_t> counts;  // per path
  double alpha = 0.0;               // mean events per unit ln gamma
  double alpha_se = 0.0;
  std::size_t wide_jumps = 0;
  std::size_t edge_steps = 0;
  std::size_t extended_paths = 0;   // branches re-integrated to cover the window
};

/// Runs the pipeline over independent paths. Path i draws from streams
/// derived from (master_seed, i) only.
UniversalResult run_universal(const AiryPotentialTable& table, const UniversalConfig& cfg);

/// Events of one path.
std::vector<UniversalEvent> universal_path_events(const AiryPotentialTable& table, const UniversalConfig& cfg,
                                                  std::size_t path, UniversalResult* diag = nullptr);

/// KS distance of an ensemble started from rho after evolving for tau.
KsResult fokker_planck_check(const AiryPotentialTable& table, std::size_t n_paths, double tau, double dtau,
                             std::uint64_t seed);

struct PersistenceOptions {
  double v0 = 1.0;        // initial velocity at x = 0
  double rel_step = 1e-3; // time step as a fraction of elapsed time
  double min_step = 1e-3;
  bool noise = true;
  double fit_from = 100.0;  // horizons used in the power-law fit
};

struct PersistenceResult {
  std::vector<double> horizons;
  std::vector<double> survival;
  double exponent = 0.0;
  double exponent_se = 0.0;
  double doubling_ratio = 0.0;  // S(2 T) / S(T) at the largest doubled pair
  std::size_t n_paths = 0;
};

/// Survival of x'' = white noise started at the absorbing boundary x = 0.
/// Crossings between steps are caught by cubic Hermite interpolation.
/// Throws if n_paths < min_paths.
PersistenceResult persistence_check(std::size_t n_paths, const std::vector<double>& horizons, std::uint64_t seed,
                                    const PersistenceOptions& opt = {}, std::size_t min_paths = 100000);

}  // namespace qab
