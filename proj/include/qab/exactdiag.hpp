#pragma once

#include "qab/instance.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace qab {

inline constexpr Eigen::Index kMaxExactSpins = 20;
inline constexpr int kMaxExactLevels = 8;

/// even: the +1 eigenspace of the global spin flip (dimension 2^(N-1));
/// full: the whole 2^N space.
enum class Sector { even, full };

/// Diagonal of H in the z basis restricted to the sector: the classical
/// energies -|sum_i xi_i s_i|^2 / (2N), self-coupling included.
Eigen::VectorXd sector_diagonal(const DisorderInstance& inst, Sector sector);

/// Applies H = H_zz - gamma sum_i sigma^x_i within the sector.
void apply_hamiltonian(const Eigen::VectorXd& diag, Eigen::Index n_spins, double gamma, Sector sector,
                       const Eigen::Ref<const Eigen::VectorXd>& x, Eigen::VectorXd& y);

/// k lowest eigenvalues, ascending.
Eigen::VectorXd lowest_levels(const DisorderInstance& inst, double gamma, int k,
                              Sector sector = Sector::even);

struct QuantumGapCurve {
  std::vector<double> gammas;  // in the order given
  std::vector<double> gaps;    // E1 - E0 within the even sector
  std::vector<double> e0;
};

QuantumGapCurve gap_curve(const DisorderInstance& inst, const std::vector<double>& gammas);

struct XcheckRow {
  Eigen::Index n_spins = 0;
  std::uint64_t seed = 0;
  double gamma = 0.0;
  double exact_gap = 0.0;
  double ring_gap = 0.0;
  double rel_error = 0.0;  // |ring - exact| / exact
};

struct XcheckSummary {
  Eigen::Index n_spins = 0;
  std::size_t n_instances = 0;
  double median_rel_error = 0.0;        // over all (instance, gamma) rows of this N
  double median_min_location_diff = 0.0;  // |argmin_exact - argmin_ring| over gammas
  double max_min_location_diff = 0.0;
};

struct XcheckReport {
  std::vector<XcheckRow> rows;
  std::vector<XcheckSummary> per_n;  // ascending N
  std::vector<double> min_location_diff;  // one per instance, in input order
};

/// Compares even-sector exact gaps with ring-model gaps over the gamma grid
/// (entries must lie in (0, 1)).
XcheckReport ring_vs_exact_report(const std::vector<DisorderInstance>& instances,
                                  const std::vector<double>& gammas);

}  // namespace qab
