#pragma once

#include "qab/ringmodel.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace qab {

struct SpectrumResult {
  double gamma = 0.0;
  Eigen::VectorXd levels;          // ascending
  double gap = 0.0;                // levels[1] - levels[0]
  Eigen::VectorXd theta;           // grid copied from the potential
  double spacing = 0.0;
  bool periodic = true;
  Eigen::VectorXd ground_density;  // |psi_0|^2, sums to 1 with weight `spacing`
  Eigen::MatrixXd states;          // columns psi_j normalized the same way
  double theta_peak = 0.0;
  double max_residual = 0.0;       // max_j ||H psi_j - E_j psi_j|| / ||psi_j||
};

inline constexpr int kDefaultLevels = 6;

/// Lowest k eigenpairs of -(1/2M) psi'' + V psi on the grid: period pi for a
/// periodic grid (the symmetric sector), Dirichlet outside a window grid.
SpectrumResult solve_ring(const PotentialGrid& pg, int k = kDefaultLevels);

struct GapStatistics {
  std::size_t n = 0;
  double median = 0.0;
  double q10 = 0.0, q25 = 0.0, q75 = 0.0, q90 = 0.0;
  double ci_lo = 0.0, ci_hi = 0.0;  // 95% bootstrap interval of the median
};

GapStatistics gap_statistics(const std::vector<double>& gaps, std::uint64_t seed = 1);
GapStatistics gap_statistics(const std::vector<SpectrumResult>& ensemble, std::uint64_t seed = 1);

struct GroundPosition {
  double location = 0.0;   // circular mean on the period-pi circle, in [0, pi)
  double spread = 0.0;     // circular standard deviation, radians
  double resultant = 0.0;  // mean resultant length of the doubled angle
  bool defined = false;    // false when resultant < 0.05
};

GroundPosition ground_position(const SpectrumResult& sr);
GroundPosition circular_position(const Eigen::VectorXd& theta, const Eigen::VectorXd& weight);

}  // namespace qab
