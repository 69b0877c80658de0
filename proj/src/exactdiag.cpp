#include "qab/exactdiag.hpp"

#include "qab/lanczos.hpp"
#include "qab/ringmodel.hpp"
#include "qab/spectrum.hpp"
#include "qab/stats.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

namespace qab {

namespace {

constexpr Eigen::Index kDenseDim = 1024;

void check_size(Eigen::Index n) {
  if (n < 1) throw std::invalid_argument("exactdiag: empty instance");
  if (n > kMaxExactSpins)
    throw std::invalid_argument("exactdiag: N = " + std::to_string(n) + " exceeds " +
                                std::to_string(kMaxExactSpins) +
                                " (basis vectors of 2^(N-1) doubles times the Krylov dimension would "
                                "exceed the memory budget)");
}

Eigen::Index sector_dim(Eigen::Index n, Sector sector) {
  return Eigen::Index{1} << (sector == Sector::even ? n - 1 : n);
}

}  // namespace

Eigen::VectorXd sector_diagonal(const DisorderInstance& inst, Sector sector) {
  const Eigen::Index n = inst.n_spins();
  check_size(n);
  const Eigen::Index dim = sector_dim(n, sector);
  const Eigen::Matrix2Xd v = inst.vectors();
  // Even sector: bit b of the index is spin b + 1 (spin 0 is up). Full
  // sector: bit b is spin b. A set bit means s = -1.
  const Eigen::Index first = sector == Sector::even ? 1 : 0;
  Eigen::VectorXd diag(dim);
  for (Eigen::Index r = 0; r < dim; ++r) {
    Eigen::Vector2d sum = Eigen::Vector2d::Zero();
    if (first) sum = v.col(0);
    for (Eigen::Index i = first; i < n; ++i) {
      const bool down = (r >> (i - first)) & 1;
      if (down)
        sum -= v.col(i);
      else
        sum += v.col(i);
    }
    diag[r] = -sum.squaredNorm() / (2.0 * double(n));
  }
  return diag;
}

void apply_hamiltonian(const Eigen::VectorXd& diag, Eigen::Index n_spins, double gamma, Sector sector,
                       const Eigen::Ref<const Eigen::VectorXd>& x, Eigen::VectorXd& y) {
  const Eigen::Index dim = diag.size();
  y.resize(dim);
  const int bits = int(sector == Sector::even ? n_spins - 1 : n_spins);
  // Flipping spin 0 in the even sector maps the representative to its complement.
  const Eigen::Index mask = (Eigen::Index{1} << bits) - 1;
  for (Eigen::Index r = 0; r < dim; ++r) {
    double off = 0.0;
    for (int b = 0; b < bits; ++b) off += x[r ^ (Eigen::Index{1} << b)];
    if (sector == Sector::even) off += x[r ^ mask];
    y[r] = diag[r] * x[r] - gamma * off;
  }
}

Eigen::VectorXd lowest_levels(const DisorderInstance& inst, double gamma, int k, Sector sector) {
  const Eigen::Index n = inst.n_spins();
  check_size(n);
  if (k < 1 || k > kMaxExactLevels) throw std::invalid_argument("lowest_levels: need 1 <= k <= 8");
  const Eigen::VectorXd diag = sector_diagonal(inst, sector);
  const Eigen::Index dim = diag.size();
  if (k > dim) throw std::invalid_argument("lowest_levels: k exceeds the sector dimension");
  if (gamma == 0.0) {
    Eigen::VectorXd d = diag;
    std::sort(d.data(), d.data() + dim);
    return d.head(k);
  }
  if (dim <= kDenseDim) {
    Eigen::MatrixXd h(dim, dim);
    Eigen::VectorXd e(dim), col(dim);
    for (Eigen::Index j = 0; j < dim; ++j) {
      e.setZero();
      e[j] = 1.0;
      apply_hamiltonian(diag, n, gamma, sector, e, col);
      h.col(j) = col;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h, Eigen::EigenvaluesOnly);
    return es.eigenvalues().head(k);
  }
  auto op = [&](const auto& x, Eigen::VectorXd& y) { apply_hamiltonian(diag, n, gamma, sector, x, y); };
  LanczosOptions opt;
  opt.basis_size = 48;
  opt.tol = 1e-13;
  const auto r = lanczos_smallest(op, dim, k, opt);
  if (!r.converged) throw std::runtime_error("lowest_levels: Lanczos did not converge");
  return r.values;
}

QuantumGapCurve gap_curve(const DisorderInstance& inst, const std::vector<double>& gammas) {
  QuantumGapCurve c;
  for (double g : gammas) {
    const Eigen::VectorXd lv = lowest_levels(inst, g, 2, Sector::even);
    c.gammas.push_back(g);
    c.e0.push_back(lv[0]);
    c.gaps.push_back(std::max(0.0, lv[1] - lv[0]));
  }
  return c;
}

XcheckReport ring_vs_exact_report(const std::vector<DisorderInstance>& instances,
                                  const std::vector<double>& gammas) {
  for (double g : gammas)
    if (!(g > 0.0 && g < 1.0)) throw std::invalid_argument("ring_vs_exact_report: gammas must lie in (0, 1)");
  XcheckReport rep;
  std::map<Eigen::Index, std::vector<double>> errors, locs;
  for (const auto& inst : instances) {
    const QuantumGapCurve exact = gap_curve(inst, gammas);
    std::vector<double> ring(gammas.size());
    for (std::size_t j = 0; j < gammas.size(); ++j) {
      ring[j] = solve_ring(random_potential(inst, gammas[j]), 2).gap;
      XcheckRow row;
      row.n_spins = inst.n_spins();
      row.seed = inst.seed;
      row.gamma = gammas[j];
      row.exact_gap = exact.gaps[j];
      row.ring_gap = ring[j];
      row.rel_error = std::abs(ring[j] - exact.gaps[j]) / exact.gaps[j];
      rep.rows.push_back(row);
      errors[inst.n_spins()].push_back(row.rel_error);
    }
    const auto ie = std::min_element(exact.gaps.begin(), exact.gaps.end()) - exact.gaps.begin();
    const auto ir = std::min_element(ring.begin(), ring.end()) - ring.begin();
    const double d = std::abs(gammas[std::size_t(ie)] - gammas[std::size_t(ir)]);
    rep.min_location_diff.push_back(d);
    locs[inst.n_spins()].push_back(d);
  }
  for (const auto& [n, e] : errors) {
    XcheckSummary s;
    s.n_spins = n;
    s.n_instances = locs[n].size();
    s.median_rel_error = median(e);
    s.median_min_location_diff = median(locs[n]);
    s.max_min_location_diff = *std::max_element(locs[n].begin(), locs[n].end());
    rep.per_n.push_back(s);
  }
  return rep;
}

}  // namespace qab
