#include "qab/langevin.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/airy.hpp>
#include <boost/math/special_functions/laguerre.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <tuple>

namespace qab {

namespace {

using GK = boost::math::quadrature::gauss_kronrod<double, 61>;

const double kCbrt6 = std::cbrt(6.0);
constexpr double kPi = std::numbers::pi;
constexpr double kXiMax = 14.0;  // e^{-xi^2/2} < 1e-42 beyond

}  // namespace

double airy_psi(double nu) {
  const double x = nu / kCbrt6;
  const double y = x * x;
  return x * boost::math::airy_ai(y) - boost::math::airy_ai_prime(y);
}

double airy_psi_prime(double nu) {
  // d/dx [x Ai(x^2) - Ai'(x^2)] with Ai''(y) = y Ai(y).
  const double x = nu / kCbrt6;
  const double y = x * x;
  const double ai = boost::math::airy_ai(y);
  const double aip = boost::math::airy_ai_prime(y);
  return (ai + 2.0 * y * aip - 2.0 * x * y * ai) / kCbrt6;
}

double AiryPotentialTable::drift(double v) const {
  const Eigen::Index n = nu.size();
  if (n < 2) return 0.0;
  const double lo = nu[0], hi = nu[n - 1];
  if (v >= hi) return u_prime[n - 1] + (v * v - hi * hi) / 3.0;
  if (v <= lo) return u_prime[0] - (v * v - lo * lo) / 3.0;
  const double p = (v - lo) / step();
  const auto i = std::min<Eigen::Index>(static_cast<Eigen::Index>(p), n - 2);
  const double f = p - static_cast<double>(i);
  return u_prime[i] + f * (u_prime[i + 1] - u_prime[i]);
}

double AiryPotentialTable::rho_cdf(double v) const {
  const Eigen::Index n = nu.size();
  if (n < 2) return v < nu[0] ? 0.0 : 1.0;
  if (v <= nu[0]) return 0.0;
  if (v >= nu[n - 1]) return 1.0;
  const double p = (v - nu[0]) / step();
  const auto i = std::min<Eigen::Index>(static_cast<Eigen::Index>(p), n - 2);
  const double f = p - static_cast<double>(i);
  // Exact integral of the linear interpolant of rho over the partial cell.
  const double h = step();
  const double r0 = rho[i], r1 = rho[i + 1];
  return cdf[i] + h * (r0 * f + 0.5 * (r1 - r0) * f * f);
}

AiryPotentialTable build_airy_table(double nu_min, double nu_max, int n) {
  if (!(nu_max > nu_min) || n < 3) throw std::invalid_argument("build_airy_table: bad grid");
  AiryPotentialTable t;
  t.nu = Eigen::ArrayXd::LinSpaced(n, nu_min, nu_max);
  t.u.resize(n);
  t.u_prime.resize(n);
  Eigen::ArrayXd psi(n);
  for (int i = 0; i < n; ++i) {
    psi[i] = airy_psi(t.nu[i]);
    if (!(psi[i] > 0.0))
      throw std::runtime_error("build_airy_table: psi <= 0 at nu = " + std::to_string(t.nu[i]));
    t.u[i] = -std::log(psi[i]);
    t.u_prime[i] = -airy_psi_prime(t.nu[i]) / psi[i];
  }
  const double h = t.step();
  Eigen::ArrayXd r = psi.square();
  t.cdf.resize(n);
  t.cdf[0] = 0.0;
  for (int i = 1; i < n; ++i) t.cdf[i] = t.cdf[i - 1] + 0.5 * h * (r[i - 1] + r[i]);
  const double z = t.cdf[n - 1];
  t.rho = r / z;
  t.cdf /= z;
  const Eigen::ArrayXd m = t.nu * t.rho;
  t.mean_nu = h * (m.sum() - 0.5 * (m[0] + m[n - 1]));
  return t;
}

AiryPotentialTable point_mass_table(double nu0) {
  AiryPotentialTable t;
  t.nu = Eigen::ArrayXd::Constant(1, nu0);
  t.u = Eigen::ArrayXd::Zero(1);
  t.u_prime = Eigen::ArrayXd::Zero(1);
  t.rho = Eigen::ArrayXd::Ones(1);
  t.cdf = Eigen::ArrayXd::Ones(1);
  t.mean_nu = nu0;
  return t;
}

double sample_equilibrium(const AiryPotentialTable& t, Rng& rng) {
  const double u = std::generate_canonical<double, 53>(rng);
  const Eigen::Index n = t.nu.size();
  if (n == 1) return t.nu[0];
  const double* c = t.cdf.data();
  const auto it = std::upper_bound(c, c + n, u);
  const Eigen::Index i = std::clamp<Eigen::Index>(it - c - 1, 0, n - 2);
  const double span = c[i + 1] - c[i];
  const double f = span > 0.0 ? (u - c[i]) / span : 0.0;
  return t.nu[i] + f * t.step();
}

double sample_equilibrium(const AiryPotentialTable& t, std::uint64_t seed) {
  Rng rng(seed);
  return sample_equilibrium(t, rng);
}

LangevinPath integrate_branch(const AiryPotentialTable& table, double nu0, Branch branch,
                              const BranchOptions& opt, std::uint64_t seed) {
  if (!(opt.dtau > 0.0) || !(opt.tau_max > 0.0)) throw std::invalid_argument("integrate_branch: bad step");
  const auto n_steps = static_cast<Eigen::Index>(std::ceil(opt.tau_max / opt.dtau - 1e-9));
  LangevinPath p;
  p.branch = branch;
  p.seed = seed;
  p.dtau = opt.dtau;
  p.tau.resize(n_steps + 1);
  p.nu.resize(n_steps + 1);
  p.mu.resize(n_steps + 1);
  p.theta.resize(n_steps + 1);
  p.tau[0] = 0.0;
  p.nu[0] = nu0;
  p.mu[0] = opt.mu0;
  p.theta[0] = 0.0;
  const double sgn = branch == Branch::plus ? 1.0 : -1.0;
  const double sq = std::sqrt(opt.dtau);
  Rng rng(seed);
  std::normal_distribution<double> n01;
  Eigen::Index k = 0;
  double e_prev = std::exp(2.0 * opt.mu0 / 3.0);
  for (; k < n_steps; ++k) {
    const double z = n01(rng);  // drawn even without noise so streams stay aligned
    const double nu1 = p.nu[k] - table.drift(p.nu[k]) * opt.dtau + (opt.noise ? sq * z : 0.0);
    const double mu1 = p.mu[k] + 0.5 * (p.nu[k] + nu1) * opt.dtau;
    if (mu1 > opt.mu_overflow) {
      p.truncated = true;
      break;
    }
    const double e1 = std::exp(2.0 * mu1 / 3.0);
    p.tau[k + 1] = static_cast<double>(k + 1) * opt.dtau;
    p.nu[k + 1] = nu1;
    p.mu[k + 1] = mu1;
    p.theta[k + 1] = p.theta[k] + sgn * 0.5 * (e_prev + e1) * opt.dtau;
    e_prev = e1;
  }
  if (p.truncated) {
    p.tau.conservativeResize(k + 1);
    p.nu.conservativeResize(k + 1);
    p.mu.conservativeResize(k + 1);
    p.theta.conservativeResize(k + 1);
  }
  return p;
}

Landscape landscape_from_branches(const LangevinPath& plus, const LangevinPath& minus, int n_noise,
                                  std::uint64_t noise_seed) {
  if (plus.branch != Branch::plus || minus.branch != Branch::minus)
    throw std::invalid_argument("landscape_from_branches: branch signs swapped");
  const Eigen::Index np = plus.theta.size(), nm = minus.theta.size();
  if (np < 2 || nm < 2) throw std::invalid_argument("landscape_from_branches: empty branch");
  const Eigen::Index n = np + nm - 1;
  Landscape l;
  l.theta.resize(n);
  l.chi.resize(n);
  Eigen::Index j = 0;
  for (Eigen::Index i = nm - 1; i >= 1; --i, ++j) {
    l.theta[j] = minus.theta[i];
    l.chi[j] = std::exp(minus.mu[i]);
  }
  const Eigen::Index zero = j;
  l.theta[j] = 0.0;
  l.chi[j] = 0.0;
  ++j;
  for (Eigen::Index i = 1; i < np; ++i, ++j) {
    l.theta[j] = plus.theta[i];
    l.chi[j] = std::exp(plus.mu[i]);
  }
  for (Eigen::Index i = 1; i < n; ++i)
    if (!(l.theta[i] > l.theta[i - 1])) throw std::invalid_argument("landscape_from_branches: theta not monotone");
  // One stream per (term, side), walking outward, so longer branches extend
  // the same realization.
  for (int m = 0; m < n_noise; ++m) {
    Eigen::ArrayXd eta(n);
    eta[zero] = 0.0;
    Rng right(derive_seed(noise_seed, "eta", std::uint64_t(m), 0)), left(derive_seed(noise_seed, "eta", std::uint64_t(m), 1));
    std::normal_distribution<double> n01;
    for (Eigen::Index i = zero + 1; i < n; ++i) eta[i] = eta[i - 1] + std::sqrt(l.theta[i] - l.theta[i - 1]) * n01(right);
    n01.reset();
    for (Eigen::Index i = zero - 1; i >= 0; --i) eta[i] = eta[i + 1] + std::sqrt(l.theta[i + 1] - l.theta[i]) * n01(left);
    l.eta.push_back(std::move(eta));
  }
  index_landscape(l);
  return l;
}

void index_landscape(Landscape& l) {
  const Eigen::Index n = l.theta.size();
  const double* th = l.theta.data();
  const Eigen::Index zero = std::lower_bound(th, th + n, 0.0) - th;
  l.integral.clear();
  l.gap_out.resize(0);
  if (zero >= n || th[zero] != 0.0) return;
  // Anchored at the origin so that small cells near it keep full precision.
  const auto running = [&](const Eigen::ArrayXd& y) {
    Eigen::ArrayXd c(n);
    c[zero] = 0.0;
    for (Eigen::Index i = zero + 1; i < n; ++i) c[i] = c[i - 1] + 0.5 * (y[i] + y[i - 1]) * (th[i] - th[i - 1]);
    for (Eigen::Index i = zero - 1; i >= 0; --i) c[i] = c[i + 1] - 0.5 * (y[i] + y[i + 1]) * (th[i + 1] - th[i]);
    return c;
  };
  l.integral.push_back(running(l.chi));
  for (const auto& e : l.eta) l.integral.push_back(running(e));
  l.gap_out = Eigen::ArrayXd::Zero(n);
  for (Eigen::Index i = zero + 1; i < n; ++i) l.gap_out[i] = std::max(l.gap_out[i - 1], th[i] - th[i - 1]);
  for (Eigen::Index i = zero - 1; i >= 0; --i) l.gap_out[i] = std::max(l.gap_out[i + 1], th[i + 1] - th[i]);
}

Landscape scale_landscape(const Landscape& l, double ell) {
  if (!(ell > 0.0)) throw std::invalid_argument("scale_landscape: ell must be positive");
  Landscape r;
  r.theta = l.theta * ell;
  r.chi = l.chi * std::pow(ell, 1.5);
  const double se = std::sqrt(ell);
  for (const auto& e : l.eta) r.eta.push_back(e * se);
  if (!l.integral.empty()) index_landscape(r);
  return r;
}

Landscape rescale_step(const Landscape& l, double dln_gamma) {
  if (!(dln_gamma > 0.0)) throw std::invalid_argument("rescale_step: dln_gamma must be positive");
  return scale_landscape(l, std::exp(-dln_gamma));
}

double landscape_exponent(const Landscape& l, double theta_lo, double theta_hi) {
  std::vector<double> x, y;
  for (Eigen::Index i = 0; i < l.theta.size(); ++i)
    if (l.theta[i] >= theta_lo && l.theta[i] <= theta_hi && l.chi[i] > 0.0) {
      x.push_back(std::log(l.theta[i]));
      y.push_back(std::log(l.chi[i]));
    }
  if (x.size() < 2) throw std::invalid_argument("landscape_exponent: no nodes in range");
  return fit_line(Eigen::Map<Eigen::VectorXd>(x.data(), Eigen::Index(x.size())),
                  Eigen::Map<Eigen::VectorXd>(y.data(), Eigen::Index(y.size())))
      .slope;
}

double smoothing_kernel(double s) {
  // Small-gamma form; the representation integrates to 2, halved to unit mass.
  const double s2 = s * s;
  const auto f = [s2](double xi) {
    const double q = 1.0 + xi * xi * s2;
    return xi * xi * xi * xi / (2.0 * q * std::sqrt(q)) * std::exp(-0.5 * xi * xi);
  };
  return 0.5 * GK::integrate(f, 0.0, kXiMax, 15, 1e-13);
}

double noise_kernel(int n, double s) {
  if (n < 1) throw std::invalid_argument("noise_kernel: n >= 1");
  const double s2 = s * s;
  const auto f = [n, s2](double xi) {
    const double x2 = xi * xi;
    return x2 * x2 * boost::math::laguerre(unsigned(n), 1u, 0.5 * x2) / std::sqrt(1.0 + x2 * s2) *
           std::exp(-0.5 * x2);
  };
  // Same factor 1/2 as the smoothing kernel keeps the relative weights.
  return 0.5 * s / (2.0 * std::sqrt(double(n + 1))) * GK::integrate(f, 0.0, kXiMax, 15, 1e-13);
}

namespace {

struct KernelSet {
  Eigen::ArrayXd f;               // unit-sum weights for chi
  std::vector<Eigen::ArrayXd> g;  // weights for eta_n, including the grid step
};

const KernelSet& kernel_set(double step, double cutoff, KernelMode mode, int n_max) {
  static std::mutex mu;
  static std::map<std::tuple<double, double, int, int>, KernelSet> cache;
  const std::lock_guard<std::mutex> lock(mu);
  const auto key = std::make_tuple(step, cutoff, int(mode), n_max);
  const auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  const auto taps = static_cast<Eigen::Index>(std::lround(cutoff / step));
  const Eigen::Index len = 2 * taps + 1;
  KernelSet k;
  k.f.resize(len);
  // A Gaussian of the same peak height stands in for the integral kernel.
  const double sigma = 1.0 / (std::sqrt(2.0 * kPi) * smoothing_kernel(0.0));
  for (Eigen::Index t = 0; t < len; ++t) {
    const double s = double(t - taps) * step;
    k.f[t] = mode == KernelMode::integral ? smoothing_kernel(s) : std::exp(-0.5 * s * s / (sigma * sigma));
  }
  k.f /= k.f.sum();
  for (int n = 1; n <= n_max; ++n) {
    Eigen::ArrayXd g(len);
    for (Eigen::Index t = 0; t <= taps; ++t) {
      const double v = noise_kernel(n, double(t) * step) * step;
      g[taps + t] = v;
      g[taps - t] = -v;
    }
    k.g.push_back(std::move(g));
  }
  return cache.emplace(key, std::move(k)).first->second;
}

// Averages of the piecewise-linear interpolant of y(x) over the cells
// [e_i, e_{i+1}] of ascending edges e, starting from node `start` <= e_0.
void cell_average(const Eigen::ArrayXd& x, const Eigen::ArrayXd& y, const Eigen::ArrayXd& e, Eigen::Index start,
                  Eigen::ArrayXd& out) {
  Eigen::Index j = start;
  const Eigen::Index n = x.size();
  double acc = 0.0;  // integral from x[start] to x[j]
  double prev = 0.0;
  for (Eigen::Index i = 0; i < e.size(); ++i) {
    while (j + 2 < n && x[j + 1] < e[i]) {
      acc += 0.5 * (y[j] + y[j + 1]) * (x[j + 1] - x[j]);
      ++j;
    }
    const double f = (e[i] - x[j]) / (x[j + 1] - x[j]);
    const double yi = y[j] + f * (y[j + 1] - y[j]);
    const double c = acc + 0.5 * (y[j] + yi) * (e[i] - x[j]);
    if (i > 0) out[i - 1] = (c - prev) / (e[i] - e[i - 1]);
    prev = c;
  }
}

// Same averages from a running integral c of y, by binary search per edge.
void cell_average_indexed(const Eigen::ArrayXd& x, const Eigen::ArrayXd& y, const Eigen::ArrayXd& c,
                          const Eigen::ArrayXd& e, Eigen::ArrayXd& out) {
  const double* xb = x.data();
  const Eigen::Index n = x.size();
  double prev = 0.0;
  for (Eigen::Index i = 0; i < e.size(); ++i) {
    Eigen::Index j = std::upper_bound(xb, xb + n, e[i]) - xb - 1;
    j = std::clamp<Eigen::Index>(j, 0, n - 2);
    const double f = (e[i] - x[j]) / (x[j + 1] - x[j]);
    const double yi = y[j] + f * (y[j + 1] - y[j]);
    const double ci = c[j] + 0.5 * (y[j] + yi) * (e[i] - x[j]);
    if (i > 0) out[i - 1] = (ci - prev) / (e[i] - e[i - 1]);
    prev = ci;
  }
}

}  // namespace

SmoothedPotential smooth_landscape(const Landscape& l, double gamma, const SmoothOptions& opt) {
  if (!(gamma > 0.0) || !(opt.step > 0.0) || !(opt.half_width > 0.0) || !(opt.cutoff > 0.0))
    throw std::invalid_argument("smooth_landscape: bad parameters");
  const auto half = static_cast<Eigen::Index>(std::lround(opt.half_width / opt.step));
  const auto taps = static_cast<Eigen::Index>(std::lround(opt.cutoff / opt.step));
  const Eigen::Index n_out = 2 * half + 1;
  const Eigen::Index n_in = n_out + 2 * taps;
  const double h = opt.step * gamma;
  const double reach = (double(half + taps) + 0.5) * h;
  if (l.theta_min() > -reach || l.theta_max() < reach)
    throw std::invalid_argument("smooth_landscape: landscape does not cover the smoothing window");
  const double* th = l.theta.data();
  const Eigen::Index first = std::max<Eigen::Index>(std::upper_bound(th, th + l.theta.size(), -reach) - th - 1, 0);
  const Eigen::Index last = std::upper_bound(th, th + l.theta.size(), reach) - th;
  const bool indexed = l.gap_out.size() == l.theta.size() && l.integral.size() == l.eta.size() + 1;
  double widest = 0.0;
  if (indexed) {
    widest = std::max(l.gap_out[first], l.gap_out[std::min(last, l.theta.size() - 1)]);
  } else {
    for (Eigen::Index i = first; i < last && i + 1 < l.theta.size(); ++i) widest = std::max(widest, th[i + 1] - th[i]);
  }
  if (widest > h) throw std::invalid_argument("smooth_landscape: landscape under-resolved at this scale");
  const Eigen::ArrayXd q = (Eigen::ArrayXd::LinSpaced(n_in, 0.0, double(n_in - 1)) - double(half + taps)) * h;
  const Eigen::ArrayXd edges = (Eigen::ArrayXd::LinSpaced(n_in + 1, 0.0, double(n_in)) - double(half + taps) - 0.5) * h;
  const auto average = [&](int term, Eigen::ArrayXd& out) {
    const Eigen::ArrayXd& y = term == 0 ? l.chi : l.eta[std::size_t(term - 1)];
    if (indexed)
      cell_average_indexed(l.theta, y, l.integral[std::size_t(term)], edges, out);
    else
      cell_average(l.theta, y, edges, first, out);
  };

  const int n_noise = std::min<int>(opt.n_max, int(l.eta.size()));
  const KernelSet& ks = kernel_set(opt.step, opt.cutoff, opt.kernel, n_noise);
  // Cell averages rather than point samples: the result then varies smoothly
  // with gamma even for the rough eta.
  Eigen::ArrayXd in(n_in);
  average(0, in);
  SmoothedPotential sp;
  sp.gamma = gamma;
  sp.theta = q.segment(taps, n_out);
  sp.v = Eigen::ArrayXd::Zero(n_out);
  const Eigen::Index len = 2 * taps + 1;
  // v_i = sum_t w_t x_{i + taps - (t - taps)}; output i sits at input i + taps.
  for (Eigen::Index t = 0; t < len; ++t) sp.v += ks.f[t] * in.segment(len - 1 - t, n_out);
  for (int m = 0; m < n_noise; ++m) {
    average(m + 1, in);
    Eigen::ArrayXd acc = Eigen::ArrayXd::Zero(n_out);
    for (Eigen::Index t = 0; t < len; ++t) acc += ks.g[std::size_t(m)][t] * in.segment(len - 1 - t, n_out);
    sp.v += gamma * acc;
  }
  return sp;
}

UniversalSweep rescaling_sweep(const Landscape& l, double gamma_lo, double decades, double dln_gamma,
                               const SmoothOptions& opt) {
  if (!(gamma_lo > 0.0) || !(decades > 0.0) || !(dln_gamma > 0.0))
    throw std::invalid_argument("rescaling_sweep: bad range");
  // Smoothing l at gamma equals smoothing the landscape rescaled to units of
  // gamma at unit width, so every step is evaluated directly from l.
  const auto k_max = static_cast<int>(std::lround(decades * std::log(10.0) / dln_gamma));
  UniversalSweep sw;
  sw.steps.reserve(std::size_t(k_max) + 1);
  for (int k = 0; k <= k_max; ++k) sw.steps.push_back(smooth_landscape(l, gamma_lo * std::exp(k * dln_gamma), opt));
  return sw;
}

namespace {

struct Minimum {
  double loc = 0.0;
  double value = 0.0;
  Eigen::Index index = 0;
};

std::vector<Minimum> local_minima(const SmoothedPotential& sp) {
  std::vector<Minimum> out;
  const auto& v = sp.v;
  const double h = sp.theta[1] - sp.theta[0];
  for (Eigen::Index i = 1; i + 1 < v.size(); ++i) {
    if (!(v[i] < v[i - 1] && v[i] <= v[i + 1])) continue;
    const double den = v[i - 1] - 2.0 * v[i] + v[i + 1];
    const double d = den > 0.0 ? 0.5 * (v[i - 1] - v[i + 1]) / den : 0.0;
    out.push_back({sp.theta[i] + d * h, v[i] - 0.25 * (v[i - 1] - v[i + 1]) * d, i});
  }
  return out;
}

const Minimum* nearest(const std::vector<Minimum>& ms, double loc, double radius) {
  const Minimum* best = nullptr;
  for (const auto& m : ms)
    if (std::abs(m.loc - loc) <= radius && (!best || std::abs(m.loc - loc) < std::abs(best->loc - loc))) best = &m;
  return best;
}

const Minimum* lowest(const std::vector<Minimum>& ms) {
  const Minimum* best = nullptr;
  for (const auto& m : ms)
    if (!best || m.value < best->value) best = &m;
  return best;
}

}  // namespace

std::vector<UniversalEvent> detect_universal_events(UniversalSweep& sweep, double n_spins,
                                                    const DetectUniversalOptions& opt) {
  std::vector<UniversalEvent> events;
  std::vector<Minimum> prev_list;
  const Minimum* prev = nullptr;
  Minimum prev_copy;
  double prev_gamma = 0.0;
  sweep.wide_jumps = 0;
  sweep.edge_steps = 0;
  for (const auto& sp : sweep.steps) {
    const double g = sp.gamma;
    auto list = local_minima(sp);
    const Minimum* glob = lowest(list);
    const Eigen::Index n = sp.v.size();
    // The global minimum must be an interior minimum away from the window edge.
    if (!glob || glob->index < 2 || glob->index > n - 3 || sp.v.minCoeff() < glob->value - 1e-300) {
      ++sweep.edge_steps;
      prev = nullptr;
      prev_list.clear();
      continue;
    }
    if (prev) {
      const Minimum* cont = nearest(list, prev_copy.loc, opt.track_radius * g);
      if (cont && cont != glob) {
        const double dtheta = std::abs(glob->loc - cont->loc);
        if (dtheta > opt.resonance_window * g) {
          ++sweep.wide_jumps;
        } else {
          UniversalEvent e;
          // Crossing of the two tracked minima, linear in ln gamma.
          double lng = std::log(g);
          if (const Minimum* b0 = nearest(prev_list, glob->loc, opt.track_radius * g)) {
            const double d0 = (b0->value - prev_copy.value) / std::pow(prev_gamma, 1.5);
            const double d1 = (glob->value - cont->value) / std::pow(g, 1.5);
            if (d0 > d1) lng = std::log(prev_gamma) + d0 / (d0 - d1) * (std::log(g) - std::log(prev_gamma));
          }
          e.gamma_n = std::exp(lng);
          e.jump = dtheta / g;
          const Eigen::Index a = std::min(glob->index, cont->index), b = std::max(glob->index, cont->index);
          double top = std::max(glob->value, cont->value);
          for (Eigen::Index i = a; i <= b; ++i) top = std::max(top, sp.v[i]);
          e.delta_v = std::max(top - 0.5 * (glob->value + cont->value), 0.0) / std::pow(g, 1.5);
          // Small-gamma limits M = N / (3 pi gamma^2) and V = (4 sqrt(N) / pi) chi.
          const double m = n_spins / (3.0 * kPi * e.gamma_n * e.gamma_n);
          const double dv = 4.0 * std::sqrt(n_spins) / kPi * e.delta_v * std::pow(e.gamma_n, 1.5);
          e.action = opt.kappa * std::sqrt(m * dv) * e.jump * e.gamma_n;
          e.c_exponent = e.action / std::pow(e.gamma_n * n_spins, 0.75);
          events.push_back(e);
        }
      }
    }
    prev_list = std::move(list);
    prev = lowest(prev_list);
    prev_copy = *prev;
    prev_gamma = g;
  }
  std::sort(events.begin(), events.end(), [](const auto& x, const auto& y) { return x.gamma_n > y.gamma_n; });
  for (std::size_t i = 0; i + 1 < events.size(); ++i) events[i].ratio_to_next = events[i].gamma_n / events[i + 1].gamma_n;
  return events;
}

std::vector<UniversalEvent> universal_path_events(const AiryPotentialTable& table, const UniversalConfig& cfg,
                                                  std::size_t path, UniversalResult* diag) {
  const double gamma_hi = cfg.gamma_lo * std::pow(10.0, cfg.decades);
  const double reach = (cfg.smooth.half_width + cfg.smooth.cutoff + 2.0 * cfg.smooth.step) * gamma_hi;
  const std::uint64_t i = path;
  LangevinPath br[2];
  const Branch sides[2] = {Branch::plus, Branch::minus};
  for (int s = 0; s < 2; ++s) {
    const double nu0 = sample_equilibrium(table, derive_seed(cfg.master_seed, "langevin-nu0", i, std::uint64_t(s)));
    const std::uint64_t seed = derive_seed(cfg.master_seed, "langevin-branch", i, std::uint64_t(s));
    BranchOptions bo = cfg.branch;
    for (int tries = 0;; ++tries) {
      br[s] = integrate_branch(table, nu0, sides[s], bo, seed);
      if (std::abs(br[s].theta[br[s].theta.size() - 1]) >= reach) break;
      if (br[s].truncated || tries == 8)
        throw std::runtime_error("universal_path_events: branch cannot cover the smoothing window");
      bo.tau_max *= 2.0;
      if (diag) ++diag->extended_paths;
    }
  }
  const Landscape l = landscape_from_branches(br[0], br[1], cfg.smooth.n_max,
                                              derive_seed(cfg.master_seed, "langevin-eta", i));
  auto sw = rescaling_sweep(l, cfg.gamma_lo, cfg.decades, cfg.dln_gamma, cfg.smooth);
  auto ev = detect_universal_events(sw, cfg.n_spins, cfg.detect);
  for (auto& e : ev) e.path = path;
  if (diag) {
    diag->wide_jumps += sw.wide_jumps;
    diag->edge_steps += sw.edge_steps;
  }
  return ev;
}

UniversalResult run_universal(const AiryPotentialTable& table, const UniversalConfig& cfg) {
  if (cfg.n_paths == 0) throw std::invalid_argument("run_universal: no paths");
  UniversalResult r;
  for (std::size_t p = 0; p < cfg.n_paths; ++p) {
    auto ev = universal_path_events(table, cfg, p, &r);
    r.counts.push_back(ev.size());
    r.events.insert(r.events.end(), ev.begin(), ev.end());
  }
  std::vector<double> c(r.counts.begin(), r.counts.end());
  const double span = cfg.decades * std::log(10.0);
  const double m = mean(c);
  double var = 0.0;
  for (double x : c) var += (x - m) * (x - m);
  var = c.size() > 1 ? var / double(c.size() - 1) : 0.0;
  r.alpha = m / span;
  r.alpha_se = std::sqrt(var / double(c.size())) / span;
  return r;
}

KsResult fokker_planck_check(const AiryPotentialTable& table, std::size_t n_paths, double tau, double dtau,
                             std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> n01;
  const auto steps = static_cast<long>(std::lround(tau / dtau));
  const double sq = std::sqrt(dtau);
  std::vector<double> out(n_paths);
  for (auto& v : out) {
    double x = sample_equilibrium(table, rng);
    for (long k = 0; k < steps; ++k) x += -table.drift(x) * dtau + sq * n01(rng);
    v = x;
  }
  return ks_one_sample(std::move(out), [&table](double x) { return table.rho_cdf(x); });
}

namespace {

// Minimum over s in (0, 1] of the cubic Hermite interpolant of (x0, d0) and (x1, d1),
// with d the derivatives already multiplied by the step.
double hermite_min(double x0, double d0, double x1, double d1) {
  // p(s) = a s^3 + b s^2 + d0 s + x0
  const double a = 2.0 * x0 - 2.0 * x1 + d0 + d1;
  const double b = -3.0 * x0 + 3.0 * x1 - 2.0 * d0 - d1;
  double best = x1;
  const auto eval = [&](double s) {
    if (s > 0.0 && s < 1.0) best = std::min(best, ((a * s + b) * s + d0) * s + x0);
  };
  // p'(s) = 3 a s^2 + 2 b s + d0
  if (std::abs(a) < 1e-300) {
    if (b != 0.0) eval(-d0 / (2.0 * b));
  } else {
    const double disc = b * b - 3.0 * a * d0;
    if (disc >= 0.0) {
      const double r = std::sqrt(disc);
      eval((-b + r) / (3.0 * a));
      eval((-b - r) / (3.0 * a));
    }
  }
  return best;
}

}  // namespace

PersistenceResult persistence_check(std::size_t n_paths, const std::vector<double>& horizons, std::uint64_t seed,
                                    const PersistenceOptions& opt, std::size_t min_paths) {
  if (n_paths < min_paths) throw std::invalid_argument("persistence_check: too few paths");
  if (horizons.empty()) throw std::invalid_argument("persistence_check: no horizons");
  std::vector<double> hz = horizons;
  std::sort(hz.begin(), hz.end());
  if (!(hz.front() > 0.0)) throw std::invalid_argument("persistence_check: horizons must be positive");
  std::vector<std::size_t> alive(hz.size(), 0);
  Rng rng(seed);
  std::normal_distribution<double> n01;
  const double c3 = 0.5 / std::sqrt(3.0);
  for (std::size_t p = 0; p < n_paths; ++p) {
    double t = 0.0, x = 0.0, v = opt.v0;
    std::size_t next = 0;
    bool dead = false;
    while (next < hz.size()) {
      double dt = std::max(opt.min_step, opt.rel_step * t);
      if (t + dt >= hz[next]) dt = hz[next] - t;
      double v1 = v, x1 = x + v * dt;
      if (opt.noise) {
        const double z1 = n01(rng), z2 = n01(rng);
        const double sq = std::sqrt(dt);
        v1 = v + sq * z1;
        x1 = x + v * dt + dt * sq * (0.5 * z1 + c3 * z2);
      }
      if (x1 <= 0.0 || hermite_min(x, v * dt, x1, v1 * dt) < 0.0) {
        dead = true;
        break;
      }
      t += dt;
      x = x1;
      v = v1;
      if (t >= hz[next]) {
        t = hz[next];
        ++alive[next];
        ++next;
      }
    }
    (void)dead;
  }
  PersistenceResult r;
  r.n_paths = n_paths;
  r.horizons = hz;
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < hz.size(); ++i) {
    r.survival.push_back(double(alive[i]) / double(n_paths));
    if (hz[i] >= opt.fit_from && alive[i] > 0) {
      lx.push_back(std::log(hz[i]));
      ly.push_back(std::log(r.survival.back()));
    }
  }
  if (lx.size() >= 2) {
    const auto f = fit_line(Eigen::Map<Eigen::VectorXd>(lx.data(), Eigen::Index(lx.size())),
                            Eigen::Map<Eigen::VectorXd>(ly.data(), Eigen::Index(ly.size())));
    r.exponent = -f.slope;
    r.exponent_se = f.slope_se;
  }
  for (std::size_t i = hz.size(); i-- > 0;) {
    const auto it = std::find_if(hz.begin(), hz.end(), [&](double h) { return std::abs(h - 2.0 * hz[i]) < 1e-9 * h; });
    if (it != hz.end() && r.survival[i] > 0.0) {
      r.doubling_ratio = r.survival[std::size_t(it - hz.begin())] / r.survival[i];
      break;
    }
  }
  return r;
}

}  // namespace qab
