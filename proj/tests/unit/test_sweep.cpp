#include "qab/spectrum.hpp"
#include "qab/sweep.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace qab;

namespace {

constexpr double kPi = std::numbers::pi;

// Geometric grid 0.95 -> 1e-3 with the dip centres inserted exactly.
GapTrace synthetic_trace(const std::vector<double>& dips, const std::vector<double>& locations,
                         double depth = 0.99, double scale = 1.0) {
  GapTrace tr;
  tr.n_spins = 1000;
  tr.gamma_min_cutoff = 1e-3;
  for (double g = 0.95; g >= 1e-3; g *= 0.99) tr.push_back(g, 0.0, 0.0, 0.01);
  for (double d : dips) tr.insert(d, 0.0, 0.0, 0.01, false);
  for (std::size_t i = 0; i < tr.size(); ++i) {
    const double g = tr.gamma[i];
    double f = 1.0;
    std::size_t seg = 0;
    for (std::size_t k = 0; k < dips.size(); ++k) {
      const double u = std::log(g / dips[k]) / 0.004;
      f *= 1.0 - depth / (1.0 + u * u);
      if (g < dips[k]) seg = k + 1;
    }
    tr.gap[i] = scale * 0.5 * g * f;
    tr.theta_peak[i] = locations[seg];
  }
  return tr;
}

}  // namespace

TEST(DetectBottlenecks, TwoLorentzianDipsWithJumps) {
  const auto tr = synthetic_trace({0.3, 0.1}, {1.0, 1.3, 0.9});
  const auto ev = detect_bottlenecks(tr);
  ASSERT_EQ(ev.size(), 2u);
  EXPECT_DOUBLE_EQ(ev[0].gamma_n, 0.3);
  EXPECT_DOUBLE_EQ(ev[1].gamma_n, 0.1);
  EXPECT_NEAR(ev[0].ratio_to_next, 3.0, 1e-12);
  EXPECT_TRUE(std::isnan(ev[1].ratio_to_next));
  EXPECT_NEAR(ev[0].delta_theta, 0.3, 1e-12);
  EXPECT_NEAR(ev[1].delta_theta, 0.4, 1e-12);
  for (const auto& e : ev) {
    EXPECT_GT(e.delta_e, 0.0);
    EXPECT_GT(e.delta_gamma, 0.0);
    EXPECT_LE(e.delta_theta, kPi / 2);
    EXPECT_NEAR(e.action, std::abs(std::log(e.delta_e / e.delta_e_ref)), 1e-12);
    EXPECT_NEAR(e.c_exponent, e.action / std::pow(e.gamma_n * 1000.0, 0.75), 1e-12);
  }
}

TEST(DetectBottlenecks, DipWithoutJumpIsNotAnEvent) {
  const auto tr = synthetic_trace({0.3}, {1.0, 1.0});
  EXPECT_TRUE(detect_bottlenecks(tr).empty());
}

TEST(DetectBottlenecks, JumpWithoutDeepDipIsNotAnEvent) {
  const auto tr = synthetic_trace({0.3}, {1.0, 1.5}, 0.5);
  EXPECT_TRUE(detect_bottlenecks(tr).empty());
}

TEST(DetectBottlenecks, SmallJumpBelowGammaThresholdIsRejected) {
  // 0.1 rad at gamma = 0.3 is below 0.5 gamma.
  const auto tr = synthetic_trace({0.3}, {1.0, 1.1});
  EXPECT_TRUE(detect_bottlenecks(tr).empty());
}

TEST(DetectBottlenecks, NoiseOnlyTraceHasNoEvents) {
  GapTrace tr;
  tr.n_spins = 1000;
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n01;
  for (double g = 0.95; g >= 1e-3; g *= 0.99)
    tr.push_back(g, 0.5 * g * (1.0 + 0.05 * n01(rng)), 1.0 + 1e-3 * n01(rng), 0.01);
  EXPECT_TRUE(detect_bottlenecks(tr).empty());
}

TEST(DetectBottlenecks, MonotoneTraceHasNoEvents) {
  GapTrace tr;
  tr.n_spins = 100;
  for (double g = 0.9; g >= 0.01; g *= 0.99) tr.push_back(g, g * g, 0.1 + g, 0.001);
  EXPECT_TRUE(detect_bottlenecks(tr).empty());
}

TEST(DetectBottlenecks, InvariantUnderGapRescaling) {
  const auto a = detect_bottlenecks(synthetic_trace({0.3, 0.1}, {1.0, 1.3, 0.9}));
  const auto b = detect_bottlenecks(synthetic_trace({0.3, 0.1}, {1.0, 1.3, 0.9}, 0.99, 10.0));
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_DOUBLE_EQ(a[i].gamma_n, b[i].gamma_n);
    EXPECT_NEAR(b[i].delta_e, 10.0 * a[i].delta_e, 1e-12 * b[i].delta_e);
    EXPECT_NEAR(a[i].action, b[i].action, 1e-12);
    EXPECT_NEAR(a[i].delta_gamma, b[i].delta_gamma, 1e-12);
  }
}

TEST(DetectBottlenecks, GapOutsideTheWidthIsAtLeastTwiceTheMinimum) {
  const auto tr = synthetic_trace({0.3, 0.1}, {1.0, 1.3, 0.9});
  for (const auto& e : detect_bottlenecks(tr)) {
    for (double g : {e.gamma_n + e.delta_gamma, e.gamma_n - e.delta_gamma}) {
      // Linear interpolation of the trace at g.
      std::size_t j = 0;
      while (j + 1 < tr.size() && tr.gamma[j + 1] > g) ++j;
      const double f = (g - tr.gamma[j]) / (tr.gamma[j + 1] - tr.gamma[j]);
      const double gap = tr.gap[j] + f * (tr.gap[j + 1] - tr.gap[j]);
      EXPECT_GE(gap, 2.0 * e.delta_e * (1.0 - 1e-9));
    }
  }
}

TEST(DetectBottlenecks, AnnotatedWidthIsUsed) {
  auto tr = synthetic_trace({0.3}, {1.0, 1.5});
  const auto it = std::find(tr.gamma.begin(), tr.gamma.end(), 0.3);
  tr.width[std::size_t(it - tr.gamma.begin())] = 1e-9;
  const auto ev = detect_bottlenecks(tr);
  ASSERT_EQ(ev.size(), 1u);
  EXPECT_DOUBLE_EQ(ev[0].delta_gamma, 1e-9);
}

TEST(GapTrace, InsertKeepsDescendingOrder) {
  GapTrace tr;
  tr.push_back(0.9, 1.0, 0.0, 0.1);
  tr.push_back(0.5, 1.0, 0.0, 0.1);
  tr.insert(0.7, 2.0, 0.0, 0.1, true);
  tr.insert(0.95, 3.0, 0.0, 0.1, true);
  tr.insert(0.1, 4.0, 0.0, 0.1, true);
  tr.insert(0.5, 5.0, 0.0, 0.1, true);
  const std::vector<double> g{0.95, 0.9, 0.7, 0.5, 0.1};
  EXPECT_EQ(tr.gamma, g);
  EXPECT_EQ(tr.gap[3], 5.0);
  EXPECT_EQ(tr.refined[3], 0);  // a grid point stays a grid point
  EXPECT_EQ(tr.refined[2], 1);
}

TEST(LandauZener, Algebra) {
  // Exponent pi dE dG / (4 rate) = ln 2.
  const double rate = kPi / (4.0 * std::log(2.0));
  EXPECT_NEAR(lz_failure(1.0, 1.0, rate, 1), 0.5, 1e-15);
  EXPECT_NEAR(lz_failure(1.0, 1.0, rate, 3), 0.125, 1e-15);
  EXPECT_NEAR(lz_failure(1.0, 1.0, rate, 3), std::pow(lz_failure(1.0, 1.0, rate, 1), 3), 1e-15);
  EXPECT_LT(lz_failure(1.0, 1.0, 1e-6), 1e-300);
  EXPECT_THROW(lz_failure(1.0, 1.0, 0.0), std::invalid_argument);
  EXPECT_THROW(lz_failure(-1.0, 1.0, 1.0), std::invalid_argument);
}

TEST(Fits, ExactPowerLawRecovered) {
  std::vector<GapSample> s;
  for (Eigen::Index n : {100, 1000, 10000, 100000})
    for (std::uint64_t k = 0; k < 50; ++k) s.push_back({n, k, 2.0 * std::pow(double(n), -1.0 / 3.0)});
  const auto f = fit_gap_scaling(s);
  EXPECT_NEAR(f.slope, -1.0 / 3.0, 1e-12);
  EXPECT_NEAR(f.ci_lo, -1.0 / 3.0, 1e-12);
  EXPECT_NEAR(f.ci_hi, -1.0 / 3.0, 1e-12);
  EXPECT_EQ(f.n_points, 4u);
}

TEST(Fits, InsufficientDataRejected) {
  std::vector<GapSample> s;
  for (Eigen::Index n : {100, 1000, 10000})
    for (std::uint64_t k = 0; k < 50; ++k) s.push_back({n, k, 1.0});
  EXPECT_THROW(fit_gap_scaling(s), std::invalid_argument);
  s.clear();
  for (Eigen::Index n : {100, 1000, 10000, 100000})
    for (std::uint64_t k = 0; k < 10; ++k) s.push_back({n, k, 1.0});
  EXPECT_THROW(fit_gap_scaling(s), std::invalid_argument);
  FitOptions lax;
  lax.min_seeds = 10;
  EXPECT_NO_THROW(fit_gap_scaling(s, lax));
}

TEST(Fits, EventDensityAndActionExponent) {
  // Event counts 0.15 ln N + 1 realized exactly by mixing integer counts.
  std::vector<InstanceEvents> runs;
  for (Eigen::Index n : {1000, 3000, 10000, 30000}) {
    const double target = 0.15 * std::log(double(n));
    const int lo = int(std::floor(target));
    const int n_hi = int(std::lround((target - lo) * 100.0));
    for (int k = 0; k < 100; ++k) {
      InstanceEvents r;
      r.n_spins = n;
      r.seed = std::uint64_t(k);
      const int count = lo + (k < n_hi ? 1 : 0);
      for (int j = 0; j < count; ++j) {
        BottleneckEvent e;
        e.gamma_n = 0.01 * (j + 1);
        e.action = 0.7 * std::pow(e.gamma_n * double(n), 0.75);
        e.c_exponent = 0.7;
        r.events.push_back(e);
      }
      runs.push_back(r);
    }
  }
  const auto d = fit_event_density(runs);
  EXPECT_NEAR(d.slope, 0.15, 0.01);
  EXPECT_LE(d.ci_lo, d.slope);
  EXPECT_GE(d.ci_hi, d.slope);
  const auto a = fit_action_exponent(runs);
  EXPECT_NEAR(a.slope, 0.75, 1e-12);
  const auto rep = fit_scalings({}, {}, runs);
  EXPECT_TRUE(rep.has_alpha);
  EXPECT_TRUE(rep.has_exponent);
  EXPECT_FALSE(rep.has_qcp);
  EXPECT_NEAR(rep.c_stats.median, 0.7, 1e-12);
  EXPECT_EQ(rep.mean_events.size(), 4u);
}

TEST(QcpGamma, EdgeOfCriticalWindow) {
  EXPECT_NEAR(qcp_gamma(1000), 0.99, 1e-15);
  EXPECT_THROW(qcp_gamma(1), std::invalid_argument);
}

TEST(SweepGap, MatchesPeriodicSolvesAtGridPoints) {
  // Windowed solves must reproduce full-circle solves on the same fine grid.
  const auto inst = generate(400, Disorder::gaussian, 11);
  SweepOptions opt;
  opt.ratio = 0.8;
  const auto tr = sweep_gap(inst, 0.9, 0.01, opt);
  ASSERT_GE(tr.size(), 20u);
  EXPECT_DOUBLE_EQ(tr.gamma_min_cutoff, 0.01);
  for (std::size_t i = 0; i + 1 < tr.size(); ++i) EXPECT_GT(tr.gamma[i], tr.gamma[i + 1]);
  for (double e : tr.gap) EXPECT_GT(e, 0.0);
  for (std::size_t i = 0; i < tr.size(); i += 3) {
    if (tr.refined[i]) continue;
    const double g = tr.gamma[i];
    const PotentialEvaluator ev(inst, g);
    const auto sr = solve_ring(ev.periodic_grid(default_n_points(g, inst.n_spins())), 2);
    EXPECT_NEAR(tr.gap[i], sr.gap, 1e-6 * sr.gap) << "gamma " << g;
    EXPECT_LT(std::abs(std::remainder(tr.theta_peak[i] - sr.theta_peak, kPi)), 0.05) << "gamma " << g;
  }
}

TEST(SweepGap, RejectsInvalidRanges) {
  const auto inst = generate(200, Disorder::gaussian, 2);
  EXPECT_THROW(sweep_gap(inst, 1.0, 0.1), std::invalid_argument);
  EXPECT_THROW(sweep_gap(inst, 0.5, 0.6), std::invalid_argument);
  EXPECT_THROW(sweep_gap(inst, 0.5, 0.25 * gamma_min(inst)), std::invalid_argument);
}

TEST(SweepGap, GammaMinIsTheClassicalGap) {
  const auto inst = generate(500, Disorder::gaussian, 4);
  EXPECT_DOUBLE_EQ(gamma_min(inst), classical_gap(inst));
}
