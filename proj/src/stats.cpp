#include "qab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace qab {

double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw std::invalid_argument("quantile of empty sample");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double f = pos - static_cast<double>(lo);
  return v[lo] + f * (v[hi] - v[lo]);
}

double mean(const std::vector<double>& v) {
  if (v.empty()) throw std::invalid_argument("mean of empty sample");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

LineFit fit_line(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("fit_line: need at least two paired points");
  const double n = static_cast<double>(x.size());
  const double mx = x.mean();
  const double my = y.mean();
  const Eigen::ArrayXd dx = x.array() - mx;
  const Eigen::ArrayXd dy = y.array() - my;
  const double sxx = dx.square().sum();
  if (sxx == 0.0) throw std::invalid_argument("fit_line: x values are all equal");
  LineFit f;
  f.slope = (dx * dy).sum() / sxx;
  f.intercept = my - f.slope * mx;
  if (x.size() > 2) {
    const double rss = (dy - f.slope * dx).square().sum();
    f.slope_se = std::sqrt(rss / (n - 2.0) / sxx);
  }
  return f;
}

Interval bootstrap_median_ci(const std::vector<double>& v, double level, int n_boot,
                             std::uint64_t seed) {
  if (v.empty()) throw std::invalid_argument("bootstrap of empty sample");
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, v.size() - 1);
  std::vector<double> meds(static_cast<std::size_t>(n_boot));
  std::vector<double> s(v.size());
  for (auto& m : meds) {
    for (auto& x : s) x = v[pick(rng)];
    m = median(s);
  }
  const double a = 0.5 * (1.0 - level);
  return {quantile(meds, a), quantile(meds, 1.0 - a)};
}

Interval bootstrap_slope_of_medians(const std::vector<double>& x,
                                    const std::vector<std::vector<double>>& groups,
                                    bool log_y, double level, int n_boot,
                                    std::uint64_t seed) {
  if (x.size() != groups.size() || x.size() < 2)
    throw std::invalid_argument("bootstrap_slope_of_medians: need >= 2 groups");
  Rng rng(seed);
  Eigen::VectorXd xv = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
  Eigen::VectorXd yv(xv.size());
  std::vector<double> slopes(static_cast<std::size_t>(n_boot));
  for (auto& sl : slopes) {
    for (std::size_t g = 0; g < groups.size(); ++g) {
      const auto& grp = groups[g];
      if (grp.empty()) throw std::invalid_argument("bootstrap_slope_of_medians: empty group");
      std::uniform_int_distribution<std::size_t> pick(0, grp.size() - 1);
      std::vector<double> s(grp.size());
      for (auto& v : s) v = grp[pick(rng)];
      const double m = median(std::move(s));
      yv[static_cast<Eigen::Index>(g)] = log_y ? std::log(m) : m;
    }
    sl = fit_line(xv, yv).slope;
  }
  const double a = 0.5 * (1.0 - level);
  return {quantile(slopes, a), quantile(slopes, 1.0 - a)};
}

double kolmogorov_tail(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 ? 1.0 : -1.0) * term;
    if (term < 1e-17) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_one_sample(std::vector<double> samples, const std::function<double(double)>& cdf) {
  if (samples.empty()) throw std::invalid_argument("ks_one_sample: empty sample");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
  }
  const double sn = std::sqrt(n);
  return {d, kolmogorov_tail((sn + 0.12 + 0.11 / sn) * d)};
}

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_two_sample: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  const double ne = std::sqrt(na * nb / (na + nb));
  return {d, kolmogorov_tail((ne + 0.12 + 0.11 / ne) * d)};
}

}  // namespace qab
