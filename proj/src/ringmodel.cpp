#include "qab/ringmodel.hpp"

#include "qab/meanfield.hpp"

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace qab {

namespace {

constexpr double kPi = std::numbers::pi;

double wrap_pi(double t) {
  double w = std::fmod(t, kPi);
  if (w < 0.0) w += kPi;
  if (w >= kPi) w = 0.0;
  return w;
}

// sqrt(g^2 + a^2 s^2) - a|s| without cancellation.
double site_correction(double g, double a, double s) {
  const double as = a * std::abs(s);
  return g * g / (std::sqrt(g * g + as * as) + as);
}

// C-infinity transition: 1 for x <= 0, 0 for x >= 1.
double near_weight(double x) {
  if (x <= 0.0) return 1.0;
  if (x >= 1.0) return 0.0;
  const double p = std::exp(-1.0 / (1.0 - x));
  const double q = std::exp(-1.0 / x);
  return p / (p + q);
}

void check_gamma(double gamma) {
  if (!(gamma >= 0.0) || gamma >= 1.0)
    throw std::invalid_argument("random potential requires 0 <= gamma < 1 (ordered phase)");
}

}  // namespace

Eigen::Index default_n_points(double gamma, Eigen::Index n_spins) {
  double n = 512.0;
  if (gamma > 0.0) {
    n = std::max(n, std::ceil(32.0 * kPi / gamma));
    const double width = std::min(1.0, std::pow(gamma, 0.625) * std::pow(double(n_spins), -0.375));
    n = std::max(n, std::ceil(40.0 * kPi / width));
  }
  return static_cast<Eigen::Index>(n);
}

Eigen::VectorXd potential_direct(const DisorderInstance& inst, double gamma,
                                 const Eigen::VectorXd& theta) {
  check_gamma(gamma);
  const auto& mf = cached_mean_field(gamma);
  const double m = mf.m_gamma;
  const double g2 = gamma * gamma;
  const double offset = double(inst.n_spins()) * mf.offset_per_spin;
  Eigen::VectorXd v(theta.size());
  for (Eigen::Index j = 0; j < theta.size(); ++j) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < inst.n_spins(); ++i) {
      const double a = m * inst.xi[i] * std::sin(theta[j] - inst.theta[i]);
      s += std::sqrt(g2 + a * a);
    }
    v[j] = offset - s;
  }
  return v;
}

PotentialGrid random_potential(const DisorderInstance& inst, double gamma, Eigen::Index n_points) {
  check_gamma(gamma);
  if (n_points == 0) n_points = default_n_points(gamma, inst.n_spins());
  if (n_points < 64) throw std::invalid_argument("random_potential: n_points must be >= 64");
  const auto& mf = cached_mean_field(gamma);
  PotentialGrid pg;
  pg.gamma = gamma;
  pg.m_gamma = mf.m_gamma;
  pg.mass = double(inst.n_spins()) * mf.mass_per_spin;
  pg.offset = double(inst.n_spins()) * mf.offset_per_spin;
  pg.seed = inst.seed;
  pg.n_spins = inst.n_spins();
  pg.periodic = true;
  pg.spacing = kPi / double(n_points);
  pg.theta = Eigen::VectorXd::LinSpaced(n_points, 0.0, kPi - pg.spacing);
  pg.values = potential_direct(inst, gamma, pg.theta);
  return pg;
}

PotentialEvaluator::PotentialEvaluator(const DisorderInstance& inst, double gamma, double radius)
    : inst_(&inst), gamma_(gamma) {
  check_gamma(gamma);
  const auto& mf = cached_mean_field(gamma);
  const Eigen::Index n = inst.n_spins();
  m_ = mf.m_gamma;
  mass_ = double(n) * mf.mass_per_spin;
  offset_ = double(n) * mf.offset_per_spin;

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::vector<double> folded(order.size());
  for (Eigen::Index i = 0; i < n; ++i) folded[std::size_t(i)] = wrap_pi(inst.theta[i]);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return folded[a] < folded[b]; });
  // Sites with identical (angle, magnitude) are merged with a multiplicity.
  phi_.clear();
  std::vector<double> a, mult;
  for (const Eigen::Index i : order) {
    const double phi = folded[std::size_t(i)], ai = m_ * inst.xi[i];
    if (!phi_.empty() && phi_.back() == phi && a.back() == ai) {
      mult.back() += 1.0;
    } else {
      phi_.push_back(phi);
      a.push_back(ai);
      mult.push_back(1.0);
    }
  }
  const auto ns = static_cast<Eigen::Index>(phi_.size());
  a_ = Eigen::Map<const Eigen::ArrayXd>(a.data(), ns);
  mult_ = Eigen::Map<const Eigen::ArrayXd>(mult.data(), ns);
  cphi_.resize(ns);
  sphi_.resize(ns);
  for (Eigen::Index j = 0; j < ns; ++j) {
    cphi_[j] = std::cos(phi_[std::size_t(j)]);
    sphi_[j] = std::sin(phi_[std::size_t(j)]);
  }
  pc_.assign(phi_.size() + 1, 0.0);
  ps_.assign(phi_.size() + 1, 0.0);
  long double c = 0.0L, s = 0.0L;
  for (std::size_t j = 0; j < phi_.size(); ++j) {
    const auto w = static_cast<long double>(mult_[j] * a_[j]);
    c += w * std::cos(static_cast<long double>(phi_[j]));
    s += w * std::sin(static_cast<long double>(phi_[j]));
    pc_[j + 1] = static_cast<double>(c);
    ps_[j + 1] = static_cast<double>(s);
  }

  if (gamma > 0.0) {
    if (!(radius >= 0.0)) throw std::invalid_argument("PotentialEvaluator: radius must be >= 0");
    // The far part is smooth on the scale of the radius only once the radius
    // exceeds the gamma / a width of the site terms.
    const double floor = 20.0 * gamma / std::max(m_, 1e-300);
    radius_ = std::max(floor, radius > 0.0 ? radius : std::sqrt(0.5 * kPi * gamma));
    direct_ = 2.0 * radius_ >= 0.25 * kPi;
    std::size_t nf = 0;
    if (direct_) {
      // The whole sum is analytic in a strip of half-width ~ gamma / max(a).
      const double a_max = a_.size() == 0 ? 0.0 : a_.maxCoeff();
      nf = static_cast<std::size_t>(std::max(256.0, std::ceil(32.0 * kPi * a_max / gamma)));
    } else {
      nf = static_cast<std::size_t>(std::ceil(32.0 * kPi / radius_));
    }
    far_h_ = kPi / double(nf);
    far_.assign(nf, std::numeric_limits<double>::quiet_NaN());
  }
}

double PotentialEvaluator::far_sum_exact(double t) const {
  // Whole-circle sum in vectorized form, sin(t - phi) from the cached
  // cos/sin of the site angles.
  const double st = std::sin(t), ct = std::cos(t), g2 = gamma_ * gamma_;
  scratch_ = (a_ * (st * cphi_ - ct * sphi_)).abs();
  if (direct_) return (mult_ * (g2 + scratch_.square()).sqrt()).sum();
  const double all = (mult_ * g2 / ((g2 + scratch_.square()).sqrt() + scratch_)).sum();
  return all - near_sum(t);
}

double PotentialEvaluator::far_interp(double t) const {
  // Six-point Lagrange interpolation on the periodic far grid; nodes are
  // filled on first use. In direct mode the grid holds the whole site sum.
  const auto nf = static_cast<long>(far_.size());
  const double x = t / far_h_;
  const long j = static_cast<long>(std::floor(x));
  const double f = x - double(j);
  double sum = 0.0;
  for (int q = 0; q < 6; ++q) {
    long idx = (j - 2 + q) % nf;
    if (idx < 0) idx += nf;
    double& slot = far_[std::size_t(idx)];
    if (std::isnan(slot)) slot = far_sum_exact(double(idx) * far_h_);
    double w = 1.0;
    for (int r = 0; r < 6; ++r)
      if (r != q) w *= (f - double(r - 2)) / double(q - r);
    sum += w * slot;
  }
  return sum;
}

double PotentialEvaluator::near_sum(double t) const {
  const double reach = 2.0 * radius_;
  const std::size_t n = phi_.size();
  double sum = 0.0;
  auto add_range = [&](double lo, double hi) {
    auto b = std::lower_bound(phi_.begin(), phi_.end(), lo);
    auto e = std::upper_bound(phi_.begin(), phi_.end(), hi);
    for (auto it = b; it < e; ++it) {
      const std::size_t i = std::size_t(it - phi_.begin());
      double d = std::abs(t - phi_[i]);
      d = std::min(d, kPi - d);
      sum += near_weight((d - radius_) / radius_) * mult_[i] * site_correction(gamma_, a_[i], std::sin(d));
    }
  };
  if (n == 0) return 0.0;
  const double lo = t - reach, hi = t + reach;
  if (lo < 0.0) {
    add_range(0.0, hi);
    add_range(lo + kPi, kPi);
  } else if (hi >= kPi) {
    add_range(lo, kPi);
    add_range(0.0, hi - kPi);
  } else {
    add_range(lo, hi);
  }
  return sum;
}

double PotentialEvaluator::operator()(double theta) const {
  const double t = wrap_pi(theta);
  if (direct_) return offset_ - far_interp(t);
  const std::size_t n = phi_.size();
  const std::size_t j = std::size_t(std::upper_bound(phi_.begin(), phi_.end(), t) - phi_.begin());
  const double c_le = pc_[j], s_le = ps_[j];
  const double c_gt = pc_[n] - c_le, s_gt = ps_[n] - s_le;
  const double main = std::sin(t) * (c_le - c_gt) - std::cos(t) * (s_le - s_gt);
  const double corr = gamma_ > 0.0 ? near_sum(t) + far_interp(t) : 0.0;
  return offset_ - main - corr;
}

Eigen::VectorXd PotentialEvaluator::operator()(const Eigen::VectorXd& theta) const {
  Eigen::VectorXd v(theta.size());
  for (Eigen::Index j = 0; j < theta.size(); ++j) v[j] = (*this)(theta[j]);
  return v;
}

PotentialGrid PotentialEvaluator::blank_grid() const {
  PotentialGrid pg;
  pg.gamma = gamma_;
  pg.m_gamma = m_;
  pg.mass = mass_;
  pg.offset = offset_;
  pg.seed = inst_->seed;
  pg.n_spins = inst_->n_spins();
  return pg;
}

PotentialGrid PotentialEvaluator::periodic_grid(Eigen::Index n_points) const {
  if (n_points < 64) throw std::invalid_argument("periodic_grid: n_points must be >= 64");
  PotentialGrid pg = blank_grid();
  pg.periodic = true;
  pg.spacing = kPi / double(n_points);
  pg.theta = Eigen::VectorXd::LinSpaced(n_points, 0.0, kPi - pg.spacing);
  pg.values = (*this)(pg.theta);
  return pg;
}

PotentialGrid PotentialEvaluator::window_grid(double lo, double hi, Eigen::Index n_points) const {
  if (n_points < 3 || !(hi > lo)) throw std::invalid_argument("window_grid: need hi > lo and >= 3 points");
  PotentialGrid pg = blank_grid();
  pg.periodic = false;
  pg.theta = Eigen::VectorXd::LinSpaced(n_points, lo, hi);
  pg.spacing = (hi - lo) / double(n_points - 1);
  pg.values = (*this)(pg.theta);
  return pg;
}

std::vector<FourierCoefficient> fourier_coefficients(const PotentialGrid& pg, int k_max) {
  if (!pg.periodic) throw std::invalid_argument("fourier_coefficients: periodic grid required");
  const Eigen::Index n = pg.n_points();
  if (k_max < 0 || 4 * Eigen::Index(k_max) > n)
    throw std::invalid_argument("fourier_coefficients: k_max too large for the grid (need n >= 4 k_max)");
  Eigen::FFT<double> fft;
  std::vector<double> in(pg.values.data(), pg.values.data() + n);
  std::vector<std::complex<double>> out;
  fft.fwd(out, in);
  std::vector<FourierCoefficient> c(std::size_t(k_max) + 1);
  c[0].a = out[0].real() / double(n);
  for (int k = 1; k <= k_max; ++k) {
    // theta_j = j pi / n, so cos(2 k theta_j) is the k-th DFT harmonic.
    c[std::size_t(k)].a = 2.0 * out[std::size_t(k)].real() / double(n);
    c[std::size_t(k)].b = -2.0 * out[std::size_t(k)].imag() / double(n);
  }
  return c;
}

WhitenessResult whiteness_test(const PotentialGrid& pg) {
  if (pg.gamma != 0.0) throw std::invalid_argument("whiteness_test: requires a gamma = 0 grid");
  if (!pg.periodic) throw std::invalid_argument("whiteness_test: periodic grid required");
  const Eigen::Index n = pg.n_points();
  const double h = pg.spacing;
  Eigen::ArrayXd w(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double vm = pg.values[(j + n - 1) % n];
    const double vp = pg.values[(j + 1) % n];
    w[j] = (vp - 2.0 * pg.values[j] + vm) / (h * h) + pg.values[j];
  }
  const Eigen::ArrayXd d = w - w.mean();
  const double var = d.square().mean();
  WhitenessResult r;
  if (var > 0.0) {
    double c1 = 0.0, c2 = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      c1 += d[j] * d[(j + 1) % n];
      c2 += d[j] * d[(j + 2) % n];
    }
    r.lag1_autocorr = c1 / double(n) / var;
    r.lag2_autocorr = c2 / double(n) / var;
  }
  // Each kink of slope jump s between nodes j and j+1 enters w_j and w_{j+1}
  // with weights (1-f) and f, so the stencil sees hat-filtered white noise
  // with variance (2/3) sigma^2 / h.
  const double sigma = 4.0 * std::sqrt(double(pg.n_spins)) / kPi;
  r.variance_ratio = var / ((2.0 / 3.0) * sigma * sigma / h);
  return r;
}

}  // namespace qab
