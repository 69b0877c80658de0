#pragma once

#include "qab/instance.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace qab {

/// Effective potential sampled on a uniform grid. A periodic grid covers
/// [0, pi) with period pi; a window grid covers [theta.front(), theta.back()]
/// and is meant for Dirichlet solves of localized states.
struct PotentialGrid {
  double gamma = 0.0;
  double m_gamma = 0.0;
  double mass = 0.0;    // effective mass M (0 when gamma == 0)
  double offset = 0.0;  // N <sqrt(gamma^2 + xi^2 m^2)>, added to every value
  std::uint64_t seed = 0;
  Eigen::Index n_spins = 0;
  bool periodic = true;
  double spacing = 0.0;
  Eigen::VectorXd theta;
  Eigen::VectorXd values;

  Eigen::Index n_points() const { return theta.size(); }
};

/// Grid size resolving both the gamma-scale structure (>= 32 points per
/// gamma) and a localized ground state of width ~ gamma^{5/8} N^{-3/8}
/// (>= 40 points per width).
Eigen::Index default_n_points(double gamma, Eigen::Index n_spins);

/// Direct O(N n_points) site sum over the uniform grid on [0, pi).
/// n_points = 0 selects default_n_points.
PotentialGrid random_potential(const DisorderInstance& inst, double gamma, Eigen::Index n_points = 0);

/// Same values at arbitrary angles by the direct site sum.
Eigen::VectorXd potential_direct(const DisorderInstance& inst, double gamma,
                                 const Eigen::VectorXd& theta);

/// Fast evaluation of V_gamma for a fixed instance and gamma.
///
/// The sum of m xi_i |sin(theta - theta_i)| is piecewise sinusoidal between
/// consecutive site angles and is evaluated exactly from prefix sums. The
/// remainder sum_i [sqrt(gamma^2 + a_i^2 s_i^2) - a_i |s_i|] is split by a
/// smooth partition of unity: sites within `radius` are summed exactly, the
/// far part is smooth on the scale of the radius and is interpolated from a
/// periodic grid with spacing radius / 32. The radius only trades near-site
/// work against far-grid work; radius = 0 picks a default.
class PotentialEvaluator {
 public:
  PotentialEvaluator(const DisorderInstance& inst, double gamma, double radius = 0.0);

  double operator()(double theta) const;
  Eigen::VectorXd operator()(const Eigen::VectorXd& theta) const;

  /// Periodic grid on [0, pi).
  PotentialGrid periodic_grid(Eigen::Index n_points) const;
  /// Window grid with n_points samples on [lo, hi] (angles may leave [0, pi)).
  PotentialGrid window_grid(double lo, double hi, Eigen::Index n_points) const;

  double gamma() const { return gamma_; }
  double m_gamma() const { return m_; }
  double mass() const { return mass_; }
  double offset() const { return offset_; }
  double radius() const { return radius_; }
  bool direct() const { return direct_; }

 private:
  double near_sum(double t) const;
  double far_sum_exact(double t) const;
  double far_interp(double t) const;
  PotentialGrid blank_grid() const;

  const DisorderInstance* inst_;
  double gamma_, m_, mass_, offset_;
  double radius_ = 0.0;
  bool direct_ = false;
  std::vector<double> phi_;  // site angles mod pi, sorted
  Eigen::ArrayXd a_;         // m xi, same order
  Eigen::ArrayXd mult_;      // multiplicity of merged identical sites
  Eigen::ArrayXd cphi_, sphi_;
  mutable Eigen::ArrayXd scratch_;
  std::vector<double> pc_, ps_;  // prefix sums of a cos(phi), a sin(phi)
  double far_h_ = 0.0;
  mutable std::vector<double> far_;  // far part (or the whole sum in direct mode), filled lazily
};

struct FourierCoefficient {
  double a = 0.0;  // cos(2k theta)
  double b = 0.0;  // sin(2k theta)
};

/// Coefficients k = 0..k_max of the period-pi series of a periodic grid
/// (entry 0 holds the mean in a).
std::vector<FourierCoefficient> fourier_coefficients(const PotentialGrid& pg, int k_max);

struct WhitenessResult {
  double lag1_autocorr = 0.0;   // 1/4 for white noise seen through the 3-point stencil
  double lag2_autocorr = 0.0;   // 0 for white noise
  double variance_ratio = 0.0;  // 1 for white noise of the site-sum strength
};

/// w_j = V''(theta_j) + V(theta_j) by centered second differences, compared
/// with white noise of strength 4 sqrt(N) / pi (the site-sum value) as seen
/// through the stencil. Requires a gamma = 0 periodic grid.
WhitenessResult whiteness_test(const PotentialGrid& pg);

}  // namespace qab
