#include "qab/meanfield.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace qab {

namespace {

using GK = boost::math::quadrature::gauss_kronrod<double, 61>;

constexpr double kXiMax = 12.0;
constexpr double kTol = 1e-11;

// Adaptive integral of f over [a, b] split at the given interior points.
double integrate_split(const std::function<double(double)>& f, std::vector<double> cuts, double a,
                       double b) {
  double total = 0.0;
  double lo = a;
  cuts.push_back(b);
  for (double c : cuts) {
    if (c <= lo) continue;
    c = std::min(c, b);
    total += GK::integrate(f, lo, c, 8, kTol);
    lo = c;
    if (lo >= b) break;
  }
  return total;
}

std::vector<double> scale_cuts(double scale) {
  std::vector<double> cuts;
  if (scale > 0.0 && scale < kXiMax)
    for (double k : {0.25, 1.0, 4.0, 16.0, 64.0}) cuts.push_back(k * scale);
  cuts.push_back(2.0);
  cuts.push_back(5.0);
  std::sort(cuts.begin(), cuts.end());
  return cuts;
}

}  // namespace

double normal_average(const std::function<double(double)>& f, double scale) {
  const double w = std::sqrt(2.0 / std::numbers::pi);
  auto g = [&](double x) { return w * std::exp(-0.5 * x * x) * f(x); };
  return integrate_split(g, scale_cuts(scale), 0.0, kXiMax);
}

double self_consistency_residual(double m, double gamma) {
  const double g2 = gamma * gamma;
  const double scale = m > 0.0 ? gamma / m : 0.0;
  return normal_average(
             [&](double x) {
               const double d = std::sqrt(g2 + x * x * m * m);
               return d > 0.0 ? x * x / d : 0.0;
             },
             scale) -
         1.0;
}

double magnetization(double gamma) {
  if (gamma < 0.0) throw std::invalid_argument("magnetization: gamma must be >= 0");
  if (gamma >= 1.0) return 0.0;
  const double m_max = std::sqrt(2.0 / std::numbers::pi);
  if (gamma == 0.0) return m_max;
  // The residual decreases monotonically in m: positive at the lower end
  // of the bracket, negative at the Γ = 0 value.
  auto f = [gamma](double m) { return self_consistency_residual(m, gamma); };
  std::uintmax_t iters = 200;
  auto tol = [](double a, double b) { return std::abs(b - a) <= 4e-16 * std::max(1.0, std::abs(a)); };
  const auto [lo, hi] = boost::math::tools::toms748_solve(f, 1e-12, m_max, tol, iters);
  return 0.5 * (lo + hi);
}

double potential_offset_per_spin(double m, double gamma) {
  const double g2 = gamma * gamma;
  const double scale = m > 0.0 ? gamma / m : 0.0;
  return normal_average([&](double x) { return std::sqrt(g2 + x * x * m * m); }, scale);
}

double effective_potential(double m, double gamma) {
  if (m < 0.0 || gamma < 0.0) throw std::invalid_argument("effective_potential: m, gamma must be >= 0");
  return 0.5 * m * m - potential_offset_per_spin(m, gamma);
}

double effective_mass(double gamma, double n_spins) {
  if (!(gamma > 0.0) || gamma >= 1.0)
    throw std::invalid_argument("effective_mass: requires 0 < gamma < 1 (ordered phase)");
  const double m = magnetization(gamma);
  const double g2 = gamma * gamma;
  // A Rayleigh magnitude with a uniform angle is an isotropic pair of
  // standard normals (X, Y) = xi (cos, sin); the X^2 factor averages to 1.
  const double avg = normal_average(
      [&](double y) {
        const double d = g2 + m * m * y * y;
        return 1.0 / (d * d * std::sqrt(d));
      },
      gamma / m);
  return n_spins * 0.25 * g2 * m * m * avg;
}

MeanFieldSolution solve_mean_field(double gamma) {
  MeanFieldSolution s;
  s.gamma = gamma;
  s.m_gamma = magnetization(gamma);
  s.v_min = effective_potential(s.m_gamma, gamma);
  s.offset_per_spin = potential_offset_per_spin(s.m_gamma, gamma);
  s.mass_per_spin = (gamma > 0.0 && gamma < 1.0) ? effective_mass(gamma, 1.0) : 0.0;
  return s;
}

const MeanFieldSolution& cached_mean_field(double gamma) {
  static std::mutex mu;
  static std::map<double, std::unique_ptr<MeanFieldSolution>> cache;
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(gamma);
    if (it != cache.end()) return *it->second;
  }
  auto sol = std::make_unique<MeanFieldSolution>(solve_mean_field(gamma));
  std::lock_guard<std::mutex> lock(mu);
  auto [it, inserted] = cache.emplace(gamma, std::move(sol));
  return *it->second;
}

std::pair<double, double> qcp_scaling(const ScalingExponents& exp, double n_spins) {
  if (!(exp.a > exp.b)) throw std::invalid_argument("qcp_scaling: requires a > b");
  const double d = exp.a - exp.b;
  return {std::pow(n_spins, -exp.b / d), std::pow(n_spins, -1.0 / d)};
}

}  // namespace qab
