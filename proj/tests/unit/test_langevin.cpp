#include "qab/langevin.hpp"

#include <gtest/gtest.h>

#include <boost/math/tools/roots.hpp>

#include <cmath>
#include <numbers>

using namespace qab;

namespace {

const AiryPotentialTable& table() {
  static const AiryPotentialTable t = build_airy_table();
  return t;
}

// Deterministic landscape on log-spaced nodes, symmetric node set.
Landscape synthetic(const std::function<double(double)>& chi, double lo = 1e-9, double hi = 10.0, int per_side = 20000) {
  Landscape l;
  const Eigen::ArrayXd r = Eigen::ArrayXd::LinSpaced(per_side, std::log(lo), std::log(hi)).exp();
  l.theta.resize(2 * per_side + 1);
  l.theta << -r.reverse(), Eigen::ArrayXd::Zero(1), r;
  l.chi = l.theta.unaryExpr(chi);
  return l;
}

UniversalConfig small_config() {
  UniversalConfig cfg;
  cfg.n_paths = 4;
  cfg.decades = 1.0;
  cfg.gamma_lo = 1e-5;
  cfg.dln_gamma = 0.02;
  cfg.smooth.n_max = 2;
  return cfg;
}

}  // namespace

TEST(AiryTable, PsiAtOriginIsClosedForm) {
  const double ref = std::pow(3.0, -1.0 / 3.0) / std::tgamma(1.0 / 3.0);
  EXPECT_NEAR(airy_psi(0.0), ref, 1e-14);
  EXPECT_NEAR(ref, 0.258819, 1e-6);
}

TEST(AiryTable, PositiveNormalizedAndBiasedToPositiveVelocity) {
  const auto& t = table();
  EXPECT_GT(t.rho.minCoeff(), 0.0);
  EXPECT_TRUE(t.u.allFinite());
  const double h = t.step();
  EXPECT_NEAR(h * (t.rho.sum() - 0.5 * (t.rho[0] + t.rho[t.rho.size() - 1])), 1.0, 1e-8);
  EXPECT_NEAR(t.cdf[t.cdf.size() - 1], 1.0, 1e-15);
  EXPECT_GT(t.mean_nu, 0.0);
}

TEST(AiryTable, CubicAsymptoticsAtLargeVelocity) {
  for (double v : {6.0, 7.0, 8.0}) EXPECT_NEAR(-std::log(airy_psi(v)) / (v * v * v / 9.0), 1.0, 0.1) << v;
}

TEST(AiryTable, DerivativeMatchesCenteredDifferences) {
  const auto& t = table();
  for (Eigen::Index i = 100; i + 100 < t.nu.size(); i += 701) {
    const double v = t.nu[i], e = 1e-5;
    const double fd = -(std::log(airy_psi(v + e)) - std::log(airy_psi(v - e))) / (2.0 * e);
    EXPECT_NEAR(t.u_prime[i], fd, 1e-6) << v;
  }
}

TEST(AiryTable, SignErrorIsAHardFailure) {
  // psi underflows to zero far on the negative side.
  EXPECT_THROW(build_airy_table(-30.0, 0.0, 301), std::runtime_error);
}

TEST(AiryTable, DriftContinuesPastTheEdges) {
  const auto& t = table();
  EXPECT_NEAR(t.drift(8.0), t.u_prime[t.u_prime.size() - 1], 1e-12);
  EXPECT_GT(t.drift(12.0), t.drift(8.0));
  EXPECT_LT(t.drift(-10.0), t.drift(-6.0));
}

TEST(SampleEquilibrium, DegenerateTableIsConstant) {
  const auto t = point_mass_table(0.7);
  Rng rng(3);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(sample_equilibrium(t, rng), 0.7);
}

TEST(SampleEquilibrium, SameSeedSameDraw) {
  EXPECT_EQ(sample_equilibrium(table(), 42), sample_equilibrium(table(), 42));
  EXPECT_NE(sample_equilibrium(table(), 42), sample_equilibrium(table(), 43));
}

TEST(SampleEquilibrium, MillionDrawsMatchDensity) {
  const auto& t = table();
  Rng rng(11);
  const std::size_t n = 1000000;
  std::vector<double> x(n);
  for (auto& v : x) v = sample_equilibrium(t, rng);
  const double h = t.step();
  const Eigen::ArrayXd m2 = t.nu.square() * t.rho;
  const double var = h * (m2.sum() - 0.5 * (m2[0] + m2[m2.size() - 1])) - t.mean_nu * t.mean_nu;
  EXPECT_NEAR(mean(x), t.mean_nu, 3.0 * std::sqrt(var / double(n)));
  const auto ks = ks_one_sample(std::move(x), [&t](double v) { return t.rho_cdf(v); });
  EXPECT_LT(ks.statistic, 0.005);
}

TEST(IntegrateBranch, ZeroNoiseFromPotentialMinimum) {
  const auto& t = table();
  std::uintmax_t it = 100;
  const auto [a, b] = boost::math::tools::bisect([&t](double v) { return t.drift(v); }, 0.0, 3.0,
                                                 boost::math::tools::eps_tolerance<double>(50), it);
  const double nu0 = 0.5 * (a + b);
  BranchOptions opt;
  opt.noise = false;
  opt.tau_max = 5.0;
  const auto p = integrate_branch(t, nu0, Branch::plus, opt, 1);
  EXPECT_LT((p.nu - nu0).abs().maxCoeff(), 1e-9);
  for (Eigen::Index k = 0; k < p.tau.size(); k += 500) {
    EXPECT_NEAR(p.mu[k], opt.mu0 + nu0 * p.tau[k], 1e-8);
    const double closed = 1.5 / nu0 * std::exp(2.0 * opt.mu0 / 3.0) * (std::exp(2.0 * nu0 * p.tau[k] / 3.0) - 1.0);
    EXPECT_NEAR(p.theta[k], closed, 1e-6 * closed + 1e-300);
  }
}

TEST(IntegrateBranch, StoredMuAndThetaAreIntegralsOfNu) {
  BranchOptions opt;
  opt.tau_max = 3.0;
  const auto p = integrate_branch(table(), 0.5, Branch::minus, opt, 9);
  double mu = opt.mu0, th = 0.0;
  for (Eigen::Index k = 1; k < p.tau.size(); ++k) {
    const double mu1 = mu + 0.5 * (p.nu[k - 1] + p.nu[k]) * opt.dtau;
    th -= 0.5 * (std::exp(2.0 * mu / 3.0) + std::exp(2.0 * mu1 / 3.0)) * opt.dtau;
    mu = mu1;
    EXPECT_NEAR(p.mu[k], mu, 1e-9);
    EXPECT_NEAR(p.theta[k], th, 1e-9 * std::abs(th));
    EXPECT_LT(p.theta[k], p.theta[k - 1]);
  }
}

TEST(IntegrateBranch, LongerRunExtendsTheSamePath) {
  BranchOptions a, b;
  a.tau_max = 2.0;
  b.tau_max = 4.0;
  const auto p = integrate_branch(table(), 1.0, Branch::plus, a, 5);
  const auto q = integrate_branch(table(), 1.0, Branch::plus, b, 5);
  ASSERT_GT(q.nu.size(), p.nu.size());
  EXPECT_TRUE((q.nu.head(p.nu.size()) == p.nu).all());
  EXPECT_TRUE((q.theta.head(p.theta.size()) == p.theta).all());
}

TEST(IntegrateBranch, OverflowTruncatesWithFlag) {
  BranchOptions opt;
  opt.tau_max = 50.0;
  opt.mu_overflow = -25.0;
  const auto p = integrate_branch(table(), 1.0, Branch::plus, opt, 2);
  EXPECT_TRUE(p.truncated);
  EXPECT_LE(p.mu.maxCoeff(), -25.0);
  EXPECT_LT(p.tau[p.tau.size() - 1], 50.0);
}

TEST(IntegrateBranch, StepHalvingChangesMeanMuByLessThanTwoPercent) {
  BranchOptions a, b;
  a.tau_max = b.tau_max = 10.0;
  a.dtau = 2e-3;
  b.dtau = 1e-3;
  double ma = 0.0, mb = 0.0;
  const int n = 1000;
  for (int s = 0; s < n; ++s) {
    const double nu0 = sample_equilibrium(table(), derive_seed(1, "nu0", std::uint64_t(s)));
    const auto pa = integrate_branch(table(), nu0, Branch::plus, a, derive_seed(1, "a", std::uint64_t(s)));
    const auto pb = integrate_branch(table(), nu0, Branch::plus, b, derive_seed(1, "b", std::uint64_t(s)));
    ma += pa.mu[pa.mu.size() - 1] / n;
    mb += pb.mu[pb.mu.size() - 1] / n;
  }
  EXPECT_LT(std::abs(ma - mb) / std::abs(mb), 0.02);
}

TEST(IntegrateBranch, StationaryEnsembleKeepsTheDensity) {
  const auto ks = fokker_planck_check(table(), 20000, 1.0, 1e-3, 17);
  EXPECT_LT(ks.statistic, 0.02);
}

TEST(Landscape, OriginIsTheGlobalMinimum) {
  BranchOptions opt;
  opt.tau_max = 5.0;
  const auto p = integrate_branch(table(), 0.8, Branch::plus, opt, 1);
  const auto m = integrate_branch(table(), 0.8, Branch::minus, opt, 2);
  const auto l = landscape_from_branches(p, m, 2, 3);
  Eigen::Index z = 0;
  l.theta.abs().minCoeff(&z);
  EXPECT_EQ(l.theta[z], 0.0);
  EXPECT_EQ(l.chi[z], 0.0);
  for (Eigen::Index i = 0; i < l.chi.size(); ++i)
    if (i != z) EXPECT_GT(l.chi[i], 0.0);
  ASSERT_EQ(l.eta.size(), 2u);
  EXPECT_EQ(l.eta[0][z], 0.0);
}

TEST(Landscape, MirroredBranchesGiveSymmetricLandscape) {
  BranchOptions opt;
  opt.tau_max = 3.0;
  const auto p = integrate_branch(table(), 0.8, Branch::plus, opt, 7);
  const auto m = integrate_branch(table(), 0.8, Branch::minus, opt, 7);
  const auto l = landscape_from_branches(p, m);
  const Eigen::Index n = l.theta.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    EXPECT_EQ(l.theta[i], -l.theta[n - 1 - i]);
    EXPECT_EQ(l.chi[i], l.chi[n - 1 - i]);
  }
}

TEST(Landscape, NonMonotoneBranchRejected) {
  BranchOptions opt;
  opt.tau_max = 1.0;
  auto p = integrate_branch(table(), 0.8, Branch::plus, opt, 7);
  const auto m = integrate_branch(table(), 0.8, Branch::minus, opt, 8);
  p.theta[10] = p.theta[12];
  EXPECT_THROW(landscape_from_branches(p, m), std::invalid_argument);
  EXPECT_THROW(landscape_from_branches(m, p), std::invalid_argument);
}

TEST(Landscape, EnsembleExponentIsThreeHalves) {
  BranchOptions opt;
  opt.tau_max = 40.0;
  std::vector<double> slopes;
  for (std::uint64_t s = 0; s < 40; ++s) {
    const double nu0 = sample_equilibrium(table(), derive_seed(5, "nu0", s));
    const auto p = integrate_branch(table(), nu0, Branch::plus, opt, derive_seed(5, "p", s));
    const auto m = integrate_branch(table(), nu0, Branch::minus, opt, derive_seed(5, "m", s));
    slopes.push_back(landscape_exponent(landscape_from_branches(p, m), 1e-7, 1e-3));
  }
  EXPECT_NEAR(median(slopes), 1.5, 0.1);
}

TEST(Rescale, TwoSmallStepsComposeToOne) {
  const auto l = synthetic([](double t) { return std::pow(std::abs(t), 1.5) + 0.1 * t * t; });
  const auto a = rescale_step(rescale_step(l, 0.01), 0.01);
  const auto b = rescale_step(l, 0.02);
  EXPECT_LT(((a.theta - b.theta).abs() / (b.theta.abs() + 1e-300)).maxCoeff(), 1e-14);
  EXPECT_LT(((a.chi - b.chi).abs() / (b.chi.abs() + 1e-300)).maxCoeff(), 1e-14);
  Eigen::Index z = 0;
  a.theta.abs().minCoeff(&z);
  EXPECT_EQ(a.chi[z], 0.0);
  EXPECT_THROW(rescale_step(l, 0.0), std::invalid_argument);
}

TEST(Rescale, EnsembleVarianceIsStationary) {
  // Var chi(theta0) against the landscape rescaled by one e-fold.
  BranchOptions opt;
  opt.tau_max = 30.0;
  const double theta0 = 1e-5, d = 1.0;
  std::vector<double> before, after;
  for (std::uint64_t s = 0; s < 1500; ++s) {
    const double nu0 = sample_equilibrium(table(), derive_seed(8, "nu0", s));
    const auto p = integrate_branch(table(), nu0, Branch::plus, opt, derive_seed(8, "p", s));
    const auto interp = [&p](double th) {
      const double* b = p.theta.data();
      const auto i = std::upper_bound(b, b + p.theta.size(), th) - b;
      const double f = (th - b[i - 1]) / (b[i] - b[i - 1]);
      return std::exp(p.mu[i - 1] + f * (p.mu[i] - p.mu[i - 1]));
    };
    before.push_back(interp(theta0));
    after.push_back(std::exp(-1.5 * d) * interp(theta0 * std::exp(d)));
  }
  const auto var = [](const std::vector<double>& v) {
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / double(v.size() - 1);
  };
  EXPECT_NEAR(var(after) / var(before), 1.0, 0.1);
}

TEST(Smooth, KernelHasUnitMassAndKnownLimits) {
  EXPECT_NEAR(smoothing_kernel(0.0), 0.75 * std::sqrt(std::numbers::pi / 2.0), 1e-12);
  EXPECT_NEAR(smoothing_kernel(50.0) * 4.0 * 50.0 * 50.0 * 50.0, 1.0, 0.01);
  // Unit mass: numeric integral on [0, 200] plus the s^{-3}/4 tail.
  double m = 0.0;
  const double h = 0.01;
  for (double s = 0.5 * h; s < 200.0; s += h) m += smoothing_kernel(s) * h;
  m += 1.0 / (8.0 * 200.0 * 200.0);
  EXPECT_NEAR(2.0 * m, 1.0, 1e-4);
  for (int n : {1, 3, 8}) {
    EXPECT_NEAR(noise_kernel(n, 0.7), -noise_kernel(n, -0.7), 1e-15);
    EXPECT_EQ(noise_kernel(n, 0.0), 0.0);
    // Decay: the leading 1/|s| term cancels for n >= 1.
    EXPECT_LT(std::abs(noise_kernel(n, 40.0)), 4.0 * std::abs(noise_kernel(n, 20.0)) / 4.0 * 1.05 + 1e-6);
  }
  EXPECT_THROW(noise_kernel(0, 1.0), std::invalid_argument);
}

TEST(Smooth, ConstantLandscapeUnchanged) {
  auto l = synthetic([](double) { return 0.37; });
  const auto sp = smooth_landscape(l, 1e-3);
  EXPECT_LT((sp.v - 0.37).abs().maxCoeff(), 1e-12);
}

TEST(Smooth, CloseWellsMergeAndDistantWellsSurvive) {
  const double g = 1e-3;
  const auto count = [g](double sep) {
    const auto l = synthetic([sep](double t) { return std::min(std::pow(std::abs(t - sep / 2), 1.5), std::pow(std::abs(t + sep / 2), 1.5)); });
    const auto sp = smooth_landscape(l, g);
    int n = 0;
    for (Eigen::Index i = 1; i + 1 < sp.v.size(); ++i) n += sp.v[i] < sp.v[i - 1] && sp.v[i] <= sp.v[i + 1];
    return n;
  };
  EXPECT_EQ(count(0.1 * g), 1);
  EXPECT_EQ(count(6.0 * g), 2);
}

TEST(Smooth, MinimumRaiseScalesWithThreeHalvesPower) {
  BranchOptions opt;
  opt.tau_max = 40.0;
  const double g0 = 1e-5;
  std::vector<double> raise[3];
  for (std::uint64_t s = 0; s < 60; ++s) {
    const double n0 = sample_equilibrium(table(), derive_seed(6, "a", s));
    const double n1 = sample_equilibrium(table(), derive_seed(6, "b", s));
    const auto l = landscape_from_branches(integrate_branch(table(), n0, Branch::plus, opt, derive_seed(6, "p", s)),
                                           integrate_branch(table(), n1, Branch::minus, opt, derive_seed(6, "m", s)));
    int k = 0;
    for (double f : {0.5, 1.0, 2.0}) raise[k++].push_back(smooth_landscape(l, f * g0).v.minCoeff());
  }
  const double r1 = mean(raise[1]) / mean(raise[0]), r2 = mean(raise[2]) / mean(raise[1]);
  EXPECT_NEAR(r1 / std::pow(2.0, 1.5), 1.0, 0.2);
  EXPECT_NEAR(r2 / std::pow(2.0, 1.5), 1.0, 0.2);
}

TEST(Smooth, RejectsUncoveredOrUnresolvedLandscapes) {
  const auto l = synthetic([](double t) { return std::abs(t); }, 1e-6, 1e-2, 2000);
  EXPECT_THROW(smooth_landscape(l, 1e-3), std::invalid_argument);  // reach 2e-2 > 1e-2
  EXPECT_NO_THROW(smooth_landscape(l, 1e-4));
  const auto coarse = synthetic([](double t) { return std::abs(t); }, 1e-6, 1.0, 30);
  EXPECT_THROW(smooth_landscape(coarse, 1e-4), std::invalid_argument);
}

TEST(Smooth, RescaledLandscapeAtUnitScaleMatchesDirectSmoothing) {
  auto l = synthetic([](double t) { return std::pow(std::abs(t), 1.5) * (1.0 + 0.3 * std::sin(400.0 * t)); });
  const double d = 0.7, g = 1e-3;
  const auto a = smooth_landscape(rescale_step(l, d), g);
  const auto b = smooth_landscape(l, g * std::exp(d));
  EXPECT_LT((a.v - b.v * std::exp(-1.5 * d)).abs().maxCoeff(), 1e-12 * b.v.abs().maxCoeff());
}

TEST(Smooth, IndexedLookupMatchesDirectWalk) {
  auto l = synthetic([](double t) { return std::pow(std::abs(t), 1.5) * (1.0 + 0.3 * std::sin(400.0 * t)); });
  Rng rng(5);
  std::normal_distribution<double> n01;
  for (int m = 0; m < 2; ++m) {
    Eigen::ArrayXd e = Eigen::ArrayXd::Zero(l.theta.size());
    for (Eigen::Index i = 1; i < e.size(); ++i) e[i] = e[i - 1] + std::sqrt(l.theta[i] - l.theta[i - 1]) * n01(rng);
    e -= e[e.size() / 2];
    l.eta.push_back(e);
  }
  auto li = l;
  index_landscape(li);
  SmoothOptions opt;
  opt.n_max = 2;
  for (double g : {1e-4, 1e-3, 3e-2}) {
    const auto a = smooth_landscape(l, g, opt);
    const auto b = smooth_landscape(li, g, opt);
    EXPECT_LT((a.v - b.v).abs().maxCoeff(), 1e-9 * a.v.abs().maxCoeff()) << g;
  }
  EXPECT_THROW(smooth_landscape(li, 1e-9, opt), std::invalid_argument);
}

TEST(UniversalEvents, SingleWellHasNoEvents) {
  const auto l = synthetic([](double t) { return std::pow(std::abs(t), 1.5); });
  auto sw = rescaling_sweep(l, 1e-6, 2.0, 0.02);
  EXPECT_TRUE(detect_universal_events(sw, 1e6).empty());
  EXPECT_EQ(sw.edge_steps, 0u);
}

namespace {

// Tilted double well with minima near +-w gamma whose tilt changes sign at g0.
UniversalSweep tilted_double_well(double w, double g0) {
  UniversalSweep sw;
  for (double g = 1e-4; g < 1e-2; g *= 1.01) {
    SmoothedPotential sp;
    sp.gamma = g;
    sp.theta = Eigen::ArrayXd::LinSpaced(241, -12.0, 12.0) * g;
    const Eigen::ArrayXd u = sp.theta / g;
    const double tilt = 0.05 * std::log(g / g0);
    sp.v = std::pow(g, 1.5) * ((u.square() - w * w).square() / (w * w * w * w) + tilt * u / w + 0.01 * u.square() * u.square() / 400.0);
    sw.steps.push_back(sp);
  }
  return sw;
}

}  // namespace

TEST(UniversalEvents, TiltedDoubleWellCrossesOnce) {
  auto sw = tilted_double_well(0.6, 1e-3);
  const auto ev = detect_universal_events(sw, 1e6);
  ASSERT_EQ(ev.size(), 1u);
  EXPECT_NEAR(std::log(ev[0].gamma_n / 1e-3), 0.0, 0.01);
  EXPECT_NEAR(ev[0].jump, 1.2, 0.05);
  EXPECT_NEAR(ev[0].delta_v, 1.0, 0.1);  // barrier of the untilted quartic
  // c = kappa jump sqrt(dV / (2 pi^{3/2})).
  EXPECT_NEAR(ev[0].c_exponent, ev[0].jump * std::sqrt(4.0 * ev[0].delta_v / (3.0 * std::pow(std::numbers::pi, 2))), 1e-9);
  EXPECT_NEAR(ev[0].c_exponent, ev[0].action / std::pow(ev[0].gamma_n * 1e6, 0.75), 1e-12);
  EXPECT_TRUE(std::isnan(ev[0].ratio_to_next));
  EXPECT_EQ(sw.wide_jumps, 0u);
}

TEST(UniversalEvents, DistantCompetitorsAreNotResonant) {
  auto sw = tilted_double_well(2.0, 1e-3);
  EXPECT_TRUE(detect_universal_events(sw, 1e6).empty());
  EXPECT_EQ(sw.wide_jumps, 1u);
}

TEST(UniversalEvents, InvariantUnderJointRescaling) {
  const auto cfg = small_config();
  BranchOptions opt;
  opt.tau_max = 60.0;
  for (std::uint64_t s = 0; s < 3; ++s) {
    const auto l = landscape_from_branches(integrate_branch(table(), 0.9, Branch::plus, opt, 10 + s),
                                           integrate_branch(table(), 0.9, Branch::minus, opt, 20 + s), 2, s);
    const double ell = 8.0;
    auto a = rescaling_sweep(l, cfg.gamma_lo, 1.0, 0.02, cfg.smooth);
    auto b = rescaling_sweep(scale_landscape(l, ell), ell * cfg.gamma_lo, 1.0, 0.02, cfg.smooth);
    const auto ea = detect_universal_events(a, 1e6), eb = detect_universal_events(b, 1e6);
    ASSERT_EQ(ea.size(), eb.size());
    for (std::size_t i = 0; i < ea.size(); ++i) {
      EXPECT_NEAR(eb[i].gamma_n / ea[i].gamma_n, ell, 1e-8 * ell);
      EXPECT_NEAR(ea[i].jump, eb[i].jump, 1e-8);
      EXPECT_NEAR(ea[i].c_exponent, eb[i].c_exponent, 1e-8);
    }
  }
}

TEST(UniversalEvents, RunIsReproducibleAndOrderIndependent) {
  const auto cfg = small_config();
  const auto r = run_universal(table(), cfg);
  EXPECT_EQ(r.counts.size(), cfg.n_paths);
  const auto again = universal_path_events(table(), cfg, 2);
  std::vector<UniversalEvent> from_run;
  for (const auto& e : r.events)
    if (e.path == 2) from_run.push_back(e);
  ASSERT_EQ(again.size(), from_run.size());
  for (std::size_t i = 0; i < again.size(); ++i) EXPECT_EQ(again[i].gamma_n, from_run[i].gamma_n);
  for (const auto& e : r.events) {
    EXPECT_GT(e.jump, 0.0);
    EXPECT_GT(e.c_exponent, 0.0);
    EXPECT_LE(e.jump, cfg.detect.resonance_window);
  }
}

TEST(Persistence, RejectsTooFewPaths) {
  EXPECT_THROW(persistence_check(1000, {10.0}, 1), std::invalid_argument);
}

TEST(Persistence, ZeroNoiseWithPositiveVelocitySurvives) {
  PersistenceOptions opt;
  opt.noise = false;
  const auto r = persistence_check(100, {1.0, 10.0, 100.0}, 1, opt, 1);
  for (double s : r.survival) EXPECT_EQ(s, 1.0);
}

TEST(Persistence, SurvivalDecaysWithQuarterExponent) {
  std::vector<double> hz;
  for (double t = 25.0; t <= 3200.0; t *= 2.0) hz.push_back(t);
  PersistenceOptions opt;
  opt.fit_from = 50.0;
  const auto r = persistence_check(30000, hz, 7, opt, 1000);
  EXPECT_NEAR(r.exponent, 0.25, 0.03);
  EXPECT_NEAR(r.doubling_ratio, std::pow(2.0, -0.25), 0.03);
  for (std::size_t i = 1; i < r.survival.size(); ++i) EXPECT_LE(r.survival[i], r.survival[i - 1]);
}
