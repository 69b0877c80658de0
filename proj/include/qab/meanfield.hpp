#pragma once

#include <Eigen/Core>

#include <functional>
#include <utility>

namespace qab {

struct MeanFieldSolution {
  double gamma = 0.0;
  double m_gamma = 0.0;
  double v_min = 0.0;          // effective potential at m_gamma
  double mass_per_spin = 0.0;  // M / N, zero outside the ordered phase
  double offset_per_spin = 0.0;  // <sqrt(gamma^2 + xi^2 m^2)> over a standard normal xi
};

struct ScalingExponents {
  double a = 2.0;
  double b = 0.5;
};

/// <f(xi)> for xi standard normal; f must be even. Integrated on [0, 12]
/// with extra breakpoints at multiples of `scale`.
double normal_average(const std::function<double(double)>& f, double scale = 1.0);

/// Residual of the self-consistency condition, <xi^2 / sqrt(gamma^2 + xi^2 m^2)> - 1.
double self_consistency_residual(double m, double gamma);

/// Order-parameter magnitude; zero for gamma >= 1.
double magnetization(double gamma);

/// V(m) = m^2 / 2 - <sqrt(gamma^2 + (xi m)^2)>.
double effective_potential(double m, double gamma);

/// <sqrt(gamma^2 + xi^2 m^2)>, the per-spin constant removed from the ring potential.
double potential_offset_per_spin(double m, double gamma);

/// Effective ring mass for N spins from the defining Rayleigh/angle average.
/// Requires 0 < gamma < 1.
double effective_mass(double gamma, double n_spins);

/// Full solution at gamma (mass_per_spin is 0 when gamma is 0 or >= 1).
MeanFieldSolution solve_mean_field(double gamma);

/// Memoized solve_mean_field; thread safe, entries immutable once inserted.
const MeanFieldSolution& cached_mean_field(double gamma);

/// (N^{-b/(a-b)}, N^{-1/(a-b)}).
std::pair<double, double> qcp_scaling(const ScalingExponents& exp, double n_spins);

}  // namespace qab
