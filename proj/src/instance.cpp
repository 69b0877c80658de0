#include "qab/instance.hpp"

#include "qab/rng.hpp"
#include "qab/textio.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace qab {

namespace {

constexpr double kPi = std::numbers::pi;

double wrap_two_pi(double a) {
  double w = std::fmod(a, 2.0 * kPi);
  if (w < 0.0) w += 2.0 * kPi;
  if (w >= 2.0 * kPi) w = 0.0;
  return w;
}

double energy_of_sum(const Eigen::Vector2d& sum, Eigen::Index n) {
  return -sum.squaredNorm() / (2.0 * static_cast<double>(n));
}

}  // namespace

std::string to_string(Disorder d) { return d == Disorder::gaussian ? "gaussian" : "bimodal"; }

Disorder disorder_from_string(const std::string& s) {
  if (s == "gaussian") return Disorder::gaussian;
  if (s == "bimodal") return Disorder::bimodal;
  throw std::invalid_argument("unknown disorder distribution: " + s);
}

Eigen::Matrix2Xd DisorderInstance::vectors() const {
  Eigen::Matrix2Xd v(2, n_spins());
  v.row(0) = (xi * theta.cos()).matrix().transpose();
  v.row(1) = (xi * theta.sin()).matrix().transpose();
  return v;
}

DisorderInstance generate(Eigen::Index n_spins, Disorder dist, std::uint64_t seed) {
  if (n_spins < 1) throw std::invalid_argument("generate: n_spins must be >= 1");
  DisorderInstance inst;
  inst.dist = dist;
  inst.seed = seed;
  inst.xi.resize(n_spins);
  inst.theta.resize(n_spins);
  Rng rng(seed);
  if (dist == Disorder::gaussian) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index i = 0; i < n_spins; ++i) {
      const double x = normal(rng);
      const double y = normal(rng);
      inst.xi[i] = std::hypot(x, y);
      inst.theta[i] = wrap_two_pi(std::atan2(y, x));
    }
  } else {
    // Components are independent +-1, so xi = sqrt(2) and theta is a diagonal.
    for (Eigen::Index i = 0; i < n_spins; ++i) {
      const std::uint64_t bits = rng();
      inst.xi[i] = std::numbers::sqrt2;
      inst.theta[i] = kPi / 4.0 + (kPi / 2.0) * static_cast<double>(bits >> 62);
    }
  }
  return inst;
}

DisorderInstance make_instance(const Eigen::ArrayXd& xi, const Eigen::ArrayXd& theta,
                               Disorder dist, std::uint64_t seed) {
  if (xi.size() != theta.size() || xi.size() == 0)
    throw std::invalid_argument("make_instance: xi and theta must be non-empty and equal length");
  if ((xi < 0.0).any()) throw std::invalid_argument("make_instance: xi must be non-negative");
  DisorderInstance inst;
  inst.dist = dist;
  inst.seed = seed;
  inst.xi = xi;
  inst.theta = theta.unaryExpr([](double a) { return wrap_two_pi(a); });
  return inst;
}

double classical_energy(const DisorderInstance& inst, const SpinAssignment& s) {
  if (s.size() != inst.n_spins())
    throw std::invalid_argument("classical_energy: spin assignment size does not match instance");
  const Eigen::Vector2d sum = inst.vectors() * s.cast<double>();
  return energy_of_sum(sum, inst.n_spins());
}

ClassicalSolution solve_classical(const DisorderInstance& inst) {
  const Eigen::Index n = inst.n_spins();
  if (n < 1) throw std::invalid_argument("solve_classical: empty instance");
  const Eigen::Matrix2Xd v = inst.vectors();

  // Line angles live on [0, pi); ties are broken by site index.
  Eigen::ArrayXd folded = inst.theta.unaryExpr([](double a) { return std::fmod(a, kPi); });
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return folded[a] < folded[b]; });

  // Line just below the smallest folded angle: s_i = +1 iff theta_i < pi.
  SpinAssignment s(n);
  for (Eigen::Index i = 0; i < n; ++i) s[i] = inst.theta[i] < kPi ? 1 : -1;
  Eigen::Vector2d sum = v * s.cast<double>();

  ClassicalSolution sol;
  sol.candidates.reserve(static_cast<std::size_t>(n));
  std::size_t best_rank = 0;
  double best_energy = 0.0;
  for (std::size_t j = 0; j < order.size(); ++j) {
    const Eigen::Index i = order[j];
    sum -= 2.0 * s[i] * v.col(i);
    s[i] = -s[i];
    const double e = energy_of_sum(sum, n);
    sol.candidates.push_back({folded[i], e});
    if (j == 0 || e < best_energy) {
      best_energy = e;
      best_rank = j;
    }
  }

  // Rebuild the winning assignment and re-evaluate it exactly.
  SpinAssignment best(n);
  for (Eigen::Index i = 0; i < n; ++i) best[i] = inst.theta[i] < kPi ? 1 : -1;
  for (std::size_t j = 0; j <= best_rank; ++j) best[order[j]] = -best[order[j]];
  sol.e0 = classical_energy(inst, best);
  sol.best = std::move(best);
  return sol;
}

BruteForceSolution brute_force_classical(const DisorderInstance& inst) {
  const Eigen::Index n = inst.n_spins();
  if (n < 1) throw std::invalid_argument("brute_force_classical: empty instance");
  if (n > kBruteForceMaxSpins)
    throw std::invalid_argument("brute_force_classical: N = " + std::to_string(n) +
                                " exceeds the enumeration limit of " +
                                std::to_string(kBruteForceMaxSpins) + " spins");
  const Eigen::Matrix2Xd v = inst.vectors();
  const std::uint64_t count = std::uint64_t{1} << (n - 1);

  // Gray-code walk over spins 2..N with s_1 = +1; the running sum is
  // refreshed periodically so rounding cannot accumulate.
  SpinAssignment s = SpinAssignment::Ones(n);
  Eigen::Vector2d sum = v.rowwise().sum();
  double best_energy = energy_of_sum(sum, n);
  std::uint64_t best_code = 0;
  for (std::uint64_t k = 1; k < count; ++k) {
    const int bit = std::countr_zero(k);
    const Eigen::Index i = bit + 1;
    s[i] = -s[i];
    if ((k & 0x3ff) == 0) {
      sum = v * s.cast<double>();
    } else {
      sum += 2.0 * s[i] * v.col(i);
    }
    const double e = energy_of_sum(sum, n);
    if (e < best_energy) {
      best_energy = e;
      best_code = k ^ (k >> 1);
    }
  }

  BruteForceSolution out;
  out.best = SpinAssignment::Ones(n);
  for (Eigen::Index b = 0; b + 1 < n; ++b)
    if ((best_code >> b) & 1U) out.best[b + 1] = -1;
  out.e0 = classical_energy(inst, out.best);
  return out;
}

double classical_gap(const ClassicalSolution& sol) {
  std::vector<double> e;
  e.reserve(sol.candidates.size());
  for (const auto& c : sol.candidates) e.push_back(c.energy);
  std::sort(e.begin(), e.end());
  const double lowest = e.front();
  const double tol = 1e-12 * std::max(std::abs(lowest), 1e-300);
  for (double x : e)
    if (x - lowest > tol) return x - lowest;
  return 0.0;
}

double classical_gap(const DisorderInstance& inst) {
  if (inst.n_spins() < 2) throw std::invalid_argument("classical_gap: need N >= 2");
  return classical_gap(solve_classical(inst));
}

void write_instance(std::ostream& os, const DisorderInstance& inst) {
  os << inst.n_spins() << ' ' << to_string(inst.dist) << ' ' << inst.seed << '\n';
  for (Eigen::Index i = 0; i < inst.n_spins(); ++i)
    os << format_double(inst.xi[i]) << ' ' << format_double(inst.theta[i]) << '\n';
}

DisorderInstance read_instance(std::istream& is) {
  long long n = 0;
  std::string dist;
  std::uint64_t seed = 0;
  if (!(is >> n >> dist >> seed)) throw std::runtime_error("instance: malformed header");
  if (n < 1) throw std::runtime_error("instance: N must be >= 1");
  Eigen::ArrayXd xi(n), theta(n);
  for (long long i = 0; i < n; ++i) {
    std::string a, b;
    if (!(is >> a >> b))
      throw std::runtime_error("instance: expected " + std::to_string(n) + " site lines, got " +
                               std::to_string(i));
    xi[i] = std::stod(a);
    theta[i] = std::stod(b);
  }
  DisorderInstance inst;
  inst.dist = disorder_from_string(dist);
  inst.seed = seed;
  inst.xi = std::move(xi);
  inst.theta = std::move(theta);
  return inst;
}

void save_instance(const std::string& path, const DisorderInstance& inst) {
  auto f = open_output(path);
  write_instance(f, inst);
}

DisorderInstance load_instance(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open instance file: " + path);
  return read_instance(f);
}

}  // namespace qab
