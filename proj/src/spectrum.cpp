#include "qab/spectrum.hpp"

#include "qab/lanczos.hpp"
#include "qab/stats.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace qab {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr Eigen::Index kDenseLimit = 400;

Eigen::SparseMatrix<double> ring_hamiltonian(const Eigen::VectorXd& v, double hop, bool periodic) {
  const Eigen::Index n = v.size();
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(std::size_t(3 * n));
  for (Eigen::Index j = 0; j < n; ++j) {
    t.emplace_back(j, j, v[j] + 2.0 * hop);
    if (j + 1 < n) {
      t.emplace_back(j, j + 1, -hop);
      t.emplace_back(j + 1, j, -hop);
    }
  }
  if (periodic && n > 2) {
    t.emplace_back(0, n - 1, -hop);
    t.emplace_back(n - 1, 0, -hop);
  }
  Eigen::SparseMatrix<double> h(n, n);
  h.setFromTriplets(t.begin(), t.end());
  return h;
}

}  // namespace

SpectrumResult solve_ring(const PotentialGrid& pg, int k) {
  const Eigen::Index n = pg.n_points();
  if (k < 2) throw std::invalid_argument("solve_ring: k must be >= 2");
  if (k > n) throw std::invalid_argument("solve_ring: k exceeds grid size");
  if (!(pg.mass > 0.0)) throw std::invalid_argument("solve_ring: effective mass must be positive");
  if (!pg.values.allFinite()) throw std::invalid_argument("solve_ring: non-finite potential values");
  if (!(pg.spacing > 0.0)) throw std::invalid_argument("solve_ring: grid spacing must be positive");

  // Solve relative to the potential minimum; the shift is added back at the end.
  const double vmin = pg.values.minCoeff();
  const Eigen::VectorXd v = pg.values.array() - vmin;
  const double hop = 1.0 / (2.0 * pg.mass * pg.spacing * pg.spacing);
  const Eigen::SparseMatrix<double> h = ring_hamiltonian(v, hop, pg.periodic);

  Eigen::VectorXd vals;
  Eigen::MatrixXd vecs;
  if (n <= kDenseLimit) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(h), Eigen::ComputeEigenvectors);
    vals = es.eigenvalues().head(k);
    vecs = es.eigenvectors().leftCols(k);
  } else {
    // Shift-invert below the spectrum: the lowest levels of H become the
    // largest of (H - sigma)^{-1}.
    const double range = v.maxCoeff();
    const double delta = std::max({0.25 * std::sqrt(std::max(range, 0.0) / pg.mass), 0.5 / pg.mass,
                                   1e-12 * (range + 4.0 * hop)});
    Eigen::SparseMatrix<double> shifted = h;
    for (Eigen::Index j = 0; j < n; ++j) shifted.coeffRef(j, j) += delta;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(shifted);
    if (ldlt.info() != Eigen::Success) throw std::runtime_error("solve_ring: factorization failed");
    auto op = [&](const auto& x, Eigen::VectorXd& y) { y = ldlt.solve(Eigen::VectorXd(x)); };
    LanczosOptions opt;
    opt.tol = 1e-13;
    const auto r = lanczos_largest(op, n, k, opt);
    if (!r.converged) throw std::runtime_error("solve_ring: eigensolver did not converge");
    vals.resize(k);
    for (int i = 0; i < k; ++i) vals[i] = 1.0 / r.values[i] - delta;
    vecs = r.vectors;
  }

  SpectrumResult sr;
  sr.gamma = pg.gamma;
  sr.theta = pg.theta;
  sr.spacing = pg.spacing;
  sr.periodic = pg.periodic;
  sr.levels = vals.array() + vmin;
  sr.gap = std::max(0.0, vals[1] - vals[0]);
  sr.states = vecs / std::sqrt(pg.spacing);
  for (int i = 0; i < k; ++i) {
    const Eigen::VectorXd res = h * vecs.col(i) - vals[i] * vecs.col(i);
    sr.max_residual = std::max(sr.max_residual, res.norm() / vecs.col(i).norm());
  }
  // The ground state is nodeless; fix its sign.
  if (sr.states.col(0).sum() < 0.0) sr.states.col(0) *= -1.0;
  sr.ground_density = sr.states.col(0).array().square();
  Eigen::Index peak = 0;
  sr.ground_density.maxCoeff(&peak);
  sr.theta_peak = sr.theta[peak];
  return sr;
}

GapStatistics gap_statistics(const std::vector<double>& gaps, std::uint64_t seed) {
  if (gaps.empty()) throw std::invalid_argument("gap_statistics: empty ensemble");
  GapStatistics s;
  s.n = gaps.size();
  s.median = median(gaps);
  s.q10 = quantile(gaps, 0.10);
  s.q25 = quantile(gaps, 0.25);
  s.q75 = quantile(gaps, 0.75);
  s.q90 = quantile(gaps, 0.90);
  const auto ci = bootstrap_median_ci(gaps, 0.95, 2000, seed);
  s.ci_lo = ci.lo;
  s.ci_hi = ci.hi;
  return s;
}

GapStatistics gap_statistics(const std::vector<SpectrumResult>& ensemble, std::uint64_t seed) {
  std::vector<double> gaps;
  gaps.reserve(ensemble.size());
  for (const auto& sr : ensemble) gaps.push_back(sr.gap);
  return gap_statistics(gaps, seed);
}

GroundPosition circular_position(const Eigen::VectorXd& theta, const Eigen::VectorXd& weight) {
  // Period pi: work with the doubled angle.
  const double total = weight.sum();
  GroundPosition p;
  if (!(total > 0.0)) return p;
  const double c = (weight.array() * (2.0 * theta.array()).cos()).sum() / total;
  const double s = (weight.array() * (2.0 * theta.array()).sin()).sum() / total;
  p.resultant = std::hypot(c, s);
  p.defined = p.resultant >= 0.05;
  double loc = 0.5 * std::atan2(s, c);
  if (loc < 0.0) loc += kPi;
  p.location = loc;
  p.spread = p.resultant > 0.0 ? std::min(kPi / 2.0, 0.5 * std::sqrt(-2.0 * std::log(p.resultant))) : kPi / 2.0;
  return p;
}

GroundPosition ground_position(const SpectrumResult& sr) {
  return circular_position(sr.theta, sr.ground_density);
}

}  // namespace qab
