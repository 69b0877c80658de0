#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

namespace qab {

struct LanczosOptions {
  int basis_size = 40;        // m, Krylov dimension before a restart
  int max_restarts = 500;
  double tol = 1e-12;         // residual relative to the largest Ritz magnitude
  std::uint64_t seed = 12345; // start vector stream
};

struct LanczosResult {
  Eigen::VectorXd values;   // descending
  Eigen::MatrixXd vectors;  // columns, unit norm
  int restarts = 0;
  bool converged = false;
};

/// Thick-restart Lanczos for the k algebraically largest eigenpairs of a
/// symmetric operator. `apply(x, y)` must write y = A x. Full
/// reorthogonalization (two passes) keeps the basis orthonormal, so the
/// projected matrix is formed from explicit inner products.
template <typename Apply>
LanczosResult lanczos_largest(Apply&& apply, Eigen::Index n, int k, const LanczosOptions& opt = {}) {
  using Eigen::Index;
  using Eigen::MatrixXd;
  using Eigen::VectorXd;
  if (k < 1 || k > n) throw std::invalid_argument("lanczos: need 1 <= k <= n");
  const int m = static_cast<int>(std::min<Index>(std::max(opt.basis_size, 2 * k + 8), n));

  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> normal;
  auto random_vector = [&]() {
    VectorXd v(n);
    for (Index i = 0; i < n; ++i) v[i] = normal(rng);
    return v;
  };

  MatrixXd V(n, m + 1);
  MatrixXd T = MatrixXd::Zero(m, m);
  VectorXd w(n);
  V.col(0) = random_vector().normalized();
  int kept = 0;
  double beta = 0.0;

  LanczosResult res;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es;
  for (int restart = 0; restart <= opt.max_restarts; ++restart) {
    for (int j = kept; j < m; ++j) {
      apply(V.col(j), w);
      VectorXd h = V.leftCols(j + 1).transpose() * w;
      w.noalias() -= V.leftCols(j + 1) * h;
      const VectorXd h2 = V.leftCols(j + 1).transpose() * w;
      w.noalias() -= V.leftCols(j + 1) * h2;
      h += h2;
      for (int i = 0; i <= j; ++i) {
        // Rows below the kept block come from the three-term structure;
        // keep the computed values for the new column, symmetrize later.
        T(i, j) = h[i];
        T(j, i) = h[i];
      }
      beta = w.norm();
      const double scale = std::max(1.0, std::abs(h[j]));
      if (beta <= 1e-13 * scale) {
        // Invariant subspace: continue with a fresh orthogonal direction.
        VectorXd r = random_vector();
        for (int pass = 0; pass < 2; ++pass) r -= V.leftCols(j + 1) * (V.leftCols(j + 1).transpose() * r);
        V.col(j + 1) = r.normalized();
        beta = 0.0;
      } else {
        V.col(j + 1) = w / beta;
      }
      if (j + 1 < m) {
        T(j + 1, j) = beta;
        T(j, j + 1) = beta;
      }
    }

    es.compute(T);
    // Ascending from Eigen; reorder to descending.
    const VectorXd theta = es.eigenvalues().reverse();
    const MatrixXd Y = es.eigenvectors().rowwise().reverse();
    const double anorm = std::max(theta.cwiseAbs().maxCoeff(), 1e-300);
    bool ok = true;
    for (int i = 0; i < k; ++i)
      if (std::abs(beta * Y(m - 1, i)) > opt.tol * anorm) ok = false;

    if (ok || restart == opt.max_restarts || m == n) {
      res.values = theta.head(k);
      res.vectors = V.leftCols(m) * Y.leftCols(k);
      for (int i = 0; i < k; ++i) res.vectors.col(i).normalize();
      res.restarts = restart;
      res.converged = ok || m == n;
      return res;
    }

    // Thick restart: keep the leading Ritz vectors plus the residual direction.
    const int p = std::min(m - 1, k + (m - k) / 2);
    const MatrixXd kept_vecs = V.leftCols(m) * Y.leftCols(p);
    const VectorXd resid = V.col(m);
    V.leftCols(p) = kept_vecs;
    V.col(p) = resid;
    T.setZero();
    for (int i = 0; i < p; ++i) {
      T(i, i) = theta[i];
      T(i, p) = T(p, i) = beta * Y(m - 1, i);
    }
    kept = p;
    // The column p of T (beyond the arrow) is filled when it is expanded.
  }
  return res;
}

/// k smallest eigenpairs (ascending) of a symmetric operator.
template <typename Apply>
LanczosResult lanczos_smallest(Apply&& apply, Eigen::Index n, int k, const LanczosOptions& opt = {}) {
  auto neg = [&](const auto& x, Eigen::VectorXd& y) {
    apply(x, y);
    y = -y;
  };
  LanczosResult r = lanczos_largest(neg, n, k, opt);
  r.values = -r.values;
  return r;
}

}  // namespace qab
