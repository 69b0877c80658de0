#pragma once

#include "qab/rng.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <vector>

namespace qab {

double median(std::vector<double> v);
/// Linear-interpolated quantile, q in [0, 1].
double quantile(std::vector<double> v, double q);
double mean(const std::vector<double>& v);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;  // ordinary least-squares standard error
};

/// Least-squares y = intercept + slope * x.
LineFit fit_line(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Percentile bootstrap of the median.
Interval bootstrap_median_ci(const std::vector<double>& v, double level, int n_boot,
                             std::uint64_t seed);

/// Percentile bootstrap of a log-log slope of per-group medians: each group
/// is resampled with replacement and the fit repeated.
Interval bootstrap_slope_of_medians(const std::vector<double>& x,
                                    const std::vector<std::vector<double>>& groups,
                                    bool log_y, double level, int n_boot,
                                    std::uint64_t seed);

/// Asymptotic Kolmogorov distribution tail, P(K > lambda).
double kolmogorov_tail(double lambda);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

KsResult ks_one_sample(std::vector<double> samples, const std::function<double(double)>& cdf);
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);

}  // namespace qab
