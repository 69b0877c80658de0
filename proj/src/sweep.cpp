#include "qab/sweep.hpp"

#include "qab/meanfield.hpp"
#include "qab/ringmodel.hpp"
#include "qab/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <stdexcept>

namespace qab {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double wrap_pi(double t) {
  double w = std::fmod(t, kPi);
  if (w < 0.0) w += kPi;
  return w >= kPi ? 0.0 : w;
}

double circ_dist(double a, double b) {
  const double d = wrap_pi(a - b);
  return std::min(d, kPi - d);
}

thread_local SweepDiagnostics g_diag;

struct Span {
  double lo = 0.0, hi = 0.0;  // absolute angles, lo < hi
};

// Merges spans on the period-pi circle; returns them with lo in [0, pi).
std::vector<Span> merge_circular(std::vector<Span> spans) {
  for (auto& s : spans) {
    const double shift = s.lo - wrap_pi(s.lo);
    s.lo -= shift;
    s.hi -= shift;
  }
  std::sort(spans.begin(), spans.end(), [](const Span& a, const Span& b) { return a.lo < b.lo; });
  std::vector<Span> out;
  for (const auto& s : spans) {
    if (!out.empty() && s.lo <= out.back().hi) {
      out.back().hi = std::max(out.back().hi, s.hi);
    } else {
      out.push_back(s);
    }
  }
  // Wrap-around overlap of the last span with the first ones.
  while (out.size() > 1 && out.back().hi >= out.front().lo + kPi) {
    out.back().hi = std::max(out.back().hi, out.front().hi + kPi);
    out.erase(out.begin());
  }
  return out;
}

double total_length(const std::vector<Span>& spans) {
  double s = 0.0;
  for (const auto& x : spans) s += x.hi - x.lo;
  return s;
}

struct LevelInfo {
  double energy = 0.0;
  double location = 0.0;
  double spread = 0.0;
  int component = 0;
};

struct Snapshot {
  double gamma = 0.0;
  double mass = 0.0;
  bool periodic = false;
  std::vector<LevelInfo> levels;  // ascending

  double gap() const { return levels[1].energy - levels[0].energy; }
  const LevelInfo& ground() const { return levels[0]; }
};

// Ring-model solves along a decreasing gamma schedule. Low regions of the
// potential are located by a coarse scan of the full circle, repeated each
// time gamma drops by the rescan factor; in between only the tracked
// candidate regions are sampled.
class RingTracker {
 public:
  RingTracker(const DisorderInstance& inst, const SweepOptions& opt) : inst_(inst), opt_(opt) {}

  Snapshot solve(double gamma) {
    ++g_diag.solves;
    const double m = cached_mean_field(gamma).m_gamma;
    const Eigen::Index n_spins = inst_.n_spins();
    const auto n_fine = default_n_points(gamma, n_spins);
    const double h_f = kPi / double(n_fine);
    const auto n_coarse = static_cast<Eigen::Index>(std::max(1024.0, std::ceil(8.0 * kPi * m / gamma)));
    const double h_c = kPi / double(n_coarse);
    const PotentialEvaluator ev_c(inst_, gamma, std::sqrt(8.0 * kPi * h_c));
    const PotentialEvaluator ev_f(inst_, gamma, std::sqrt(8.0 * kPi * h_f));
    const double mass = ev_f.mass();

    if (candidates_.empty() || gamma <= scan_gamma_ / opt_.rescan_factor) rescan(gamma, ev_c, h_c, n_coarse);

    // Coarse samples on the candidate regions.
    std::vector<std::vector<std::pair<long, double>>> groups;
    double vmin = std::numeric_limits<double>::infinity();
    long jmin = 0;
    for (const auto& c : candidates_) {
      std::vector<std::pair<long, double>> g;
      const auto j0 = static_cast<long>(std::ceil(c.lo / h_c)), j1 = static_cast<long>(std::floor(c.hi / h_c));
      for (long j = j0; j <= j1; ++j) {
        const double v = ev_c(double(j) * h_c);
        g.emplace_back(j, v);
        if (v < vmin) {
          vmin = v;
          jmin = j;
        }
      }
      if (!g.empty()) groups.push_back(std::move(g));
    }
    if (groups.empty()) throw std::runtime_error("sweep: no candidate region sampled");

    double margin = margin_hint_;
    if (!(margin > 0.0)) margin = initial_margin(ev_c, jmin, h_c, mass);
    for (int attempt = 0;; ++attempt) {
      const double e_cut = vmin + margin;
      auto windows = build_windows(groups, ev_c, h_c, mass, e_cut);
      Snapshot snap;
      snap.gamma = gamma;
      snap.mass = mass;
      const bool periodic = windows.empty() || total_length(windows) > opt_.periodic_fraction * kPi;
      if (periodic) {
        ++g_diag.periodic_solves;
        snap.periodic = true;
        const auto pg = ev_f.periodic_grid(n_fine);
        append_levels(solve_ring(pg, std::max(2, opt_.levels)), 0, snap.levels);
      } else {
        for (std::size_t w = 0; w < windows.size(); ++w) {
          ++g_diag.window_solves;
          const auto i0 = static_cast<long>(std::floor(windows[w].lo / h_f));
          const auto i1 = static_cast<long>(std::ceil(windows[w].hi / h_f));
          const auto pg = ev_f.window_grid(double(i0) * h_f, double(i1) * h_f, i1 - i0 + 1);
          const int k = static_cast<int>(std::min<long>(std::max(2, opt_.levels), i1 - i0));
          append_levels(solve_ring(pg, k), int(w), snap.levels);
        }
      }
      std::sort(snap.levels.begin(), snap.levels.end(),
                [](const LevelInfo& a, const LevelInfo& b) { return a.energy < b.energy; });
      const auto keep = std::min<std::size_t>(snap.levels.size(), std::size_t(std::max(2, opt_.levels)));
      snap.levels.resize(keep);
      const double top = snap.levels.back().energy;
      if (periodic || top < e_cut || attempt >= 12) {
        margin_hint_ = std::max(1.5 * (top - vmin), 0.0);
        return snap;
      }
      ++g_diag.margin_retries;
      margin *= 2.0;
    }
  }

  // Tunneling splitting of two resonant wells from the barrier action on the
  // shorter arc between them.
  double splitting(double gamma, const LevelInfo& a, const LevelInfo& b, double energy) const {
    const Eigen::Index n_spins = inst_.n_spins();
    const double h_f = kPi / double(default_n_points(gamma, n_spins));
    const PotentialEvaluator ev(inst_, gamma, std::sqrt(8.0 * kPi * h_f));
    const double mass = ev.mass();
    double d = wrap_pi(b.location - a.location);
    if (d > kPi / 2.0) d -= kPi;
    const auto n = static_cast<long>(std::clamp(std::abs(d) / h_f, 2000.0, 400000.0));
    double action = 0.0;
    double prev = 0.0;
    for (long i = 0; i <= n; ++i) {
      const double t = a.location + d * double(i) / double(n);
      const double f = std::sqrt(2.0 * mass * std::max(ev(t) - energy, 0.0));
      if (i > 0) action += 0.5 * (f + prev) * std::abs(d) / double(n);
      prev = f;
    }
    // Attempt frequencies from the well widths, omega = 1 / (2 M sigma^2).
    const double wa = 1.0 / (2.0 * mass * a.spread * a.spread);
    const double wb = 1.0 / (2.0 * mass * b.spread * b.spread);
    return std::sqrt(wa * wb) / kPi * std::exp(-action);
  }

 private:
  static void append_levels(const SpectrumResult& sr, int component, std::vector<LevelInfo>& out) {
    for (Eigen::Index j = 0; j < sr.levels.size(); ++j) {
      const Eigen::VectorXd dens = sr.states.col(j).array().square();
      const auto pos = circular_position(sr.theta, dens);
      out.push_back({sr.levels[j], pos.location, pos.spread, component});
    }
  }

  double initial_margin(const PotentialEvaluator& ev, long jmin, double h_c, double mass) const {
    const double t = double(jmin) * h_c;
    const double curv = (ev(t - h_c) - 2.0 * ev(t) + ev(t + h_c)) / (h_c * h_c);
    const double omega = std::sqrt(std::max(curv, 0.0) / mass);
    return double(opt_.levels + 1) * std::max(omega, 2.0 / mass);
  }

  void rescan(double gamma, const PotentialEvaluator& ev, double h_c, Eigen::Index n_coarse) {
    ++g_diag.rescans;
    Eigen::VectorXd v(n_coarse);
    for (Eigen::Index j = 0; j < n_coarse; ++j) v[j] = ev(double(j) * h_c);
    Eigen::Index jmin = 0;
    const double vmin = v.minCoeff(&jmin);
    if (!candidates_.empty()) {
      const double t = double(jmin) * h_c;
      bool inside = false;
      for (const auto& c : candidates_)
        if (circ_dist(t, 0.5 * (c.lo + c.hi)) <= 0.5 * (c.hi - c.lo)) inside = true;
      if (!inside) ++g_diag.candidate_misses;
    }
    const double n = double(inst_.n_spins());
    const double thresh = vmin + opt_.scan_margin * std::sqrt(n) * std::pow(gamma, 1.5) + margin_hint_;
    std::vector<Span> spans;
    for (Eigen::Index j = 0; j < n_coarse; ++j)
      if (v[j] <= thresh) spans.push_back({double(j - 2) * h_c, double(j + 2) * h_c});
    candidates_ = merge_circular(std::move(spans));
    if (total_length(candidates_) > 0.5 * kPi) candidates_ = {{0.0, kPi - h_c}};
    scan_gamma_ = gamma;
  }

  // Sublevel runs {V <= e_cut} padded on both sides until the tunneling
  // action beyond the run reaches the configured value.
  std::vector<Span> build_windows(const std::vector<std::vector<std::pair<long, double>>>& groups,
                                  const PotentialEvaluator& ev, double h_c, double mass, double e_cut) const {
    std::vector<Span> spans;
    const auto max_steps = static_cast<long>(std::ceil(kPi / h_c));
    auto pad = [&](long j, int dir) {
      double s = 0.0;
      long steps = 0;
      while (s < opt_.barrier_action && steps < max_steps) {
        j += dir;
        ++steps;
        const double v = ev(double(j) * h_c);
        if (v > e_cut) s += std::sqrt(2.0 * mass * (v - e_cut)) * h_c;
      }
      return j;
    };
    for (const auto& g : groups) {
      std::size_t i = 0;
      while (i < g.size()) {
        if (g[i].second > e_cut) {
          ++i;
          continue;
        }
        std::size_t k = i;
        while (k + 1 < g.size() && g[k + 1].second <= e_cut) ++k;
        const long lo = pad(g[i].first, -1), hi = pad(g[k].first, +1);
        spans.push_back({double(lo) * h_c, double(hi) * h_c});
        if (double(hi - lo) * h_c >= kPi) return {};
        i = k + 1;
      }
    }
    auto merged = merge_circular(std::move(spans));
    for (const auto& s : merged)
      if (s.hi - s.lo >= kPi) return {};
    return merged;
  }

  const DisorderInstance& inst_;
  SweepOptions opt_;
  std::vector<Span> candidates_;
  double scan_gamma_ = 0.0;
  double margin_hint_ = 0.0;
};

// Level of `snap` localized nearest to `well`, or nullptr when none is.
const LevelInfo* level_near(const Snapshot& snap, const LevelInfo& well) {
  const double tol = std::max(3.0 * well.spread, 1e-12);
  for (const auto& l : snap.levels)
    if (circ_dist(l.location, well.location) <= tol) return &l;
  return nullptr;
}

struct Sample {
  double gamma;
  Snapshot snap;
};

class SweepRunner {
 public:
  SweepRunner(const DisorderInstance& inst, const SweepOptions& opt, GapTrace& trace)
      : opt_(opt), tracker_(inst, opt), trace_(trace) {}

  Snapshot eval(double gamma) { return tracker_.solve(gamma); }

  void record(const Snapshot& s, bool refined) {
    const auto& g = s.ground();
    trace_.insert(s.gamma, s.gap(), g.location, g.spread, refined);
  }

  bool is_jump(const Snapshot& a, const Snapshot& b) const {
    const auto &ga = a.ground(), &gb = b.ground();
    const double d = circ_dist(ga.location, gb.location);
    const double g = std::sqrt(a.gamma * b.gamma);
    return d > std::max(opt_.jump_spread_factor * std::max(ga.spread, gb.spread), opt_.jump_gamma_factor * g);
  }

  // Locates the resonance between the ground well at `hi` and the one at `lo`
  // (hi.gamma > lo.gamma) and records its splitting on the trace.
  void resolve_crossing(const Snapshot& hi, const Snapshot& lo) {
    ++g_diag.crossings;
    const LevelInfo wa = hi.ground(), wb = lo.ground();
    auto side = [&](const Snapshot& s) {
      return circ_dist(s.ground().location, wa.location) <= circ_dist(s.ground().location, wb.location) ? 1.0
                                                                                                          : -1.0;
    };
    std::vector<Snapshot> pts;
    double xh = std::log(hi.gamma), xl = std::log(lo.gamma);
    double fh = hi.gap(), fl = -lo.gap();
    Snapshot sh = hi, sl = lo;
    int stuck = 0;  // Illinois bookkeeping
    for (int it = 0; it < opt_.root_steps; ++it) {
      if (xh - xl <= 1e-14 * std::max(1.0, std::abs(xl))) break;
      double x = (xl * fh - xh * fl) / (fh - fl);
      if (!(x > xl && x < xh) || it % 4 == 3) x = 0.5 * (xl + xh);  // guard against one-sided convergence
      Snapshot s = eval(std::exp(x));
      const double f = side(s) * s.gap();
      pts.push_back(s);
      if (f > 0.0) {
        xh = x;
        fh = f;
        sh = s;
        if (stuck == -1) fl *= 0.5;
        stuck = -1;
      } else {
        xl = x;
        fl = f;
        sl = s;
        if (stuck == 1) fh *= 0.5;
        stuck = 1;
      }
    }

    // Numeric splitting when both wells sit in one window and the gap is resolved.
    const double num_gap = std::min(sh.gap(), sl.gap());
    const LevelInfo* b_in_hi = level_near(sh, wb);
    const bool same_component = sh.periodic || (b_in_hi != nullptr && b_in_hi->component == sh.ground().component);
    const double omega = 1.0 / (2.0 * sh.mass * std::max(wa.spread * wb.spread, 1e-300));
    double delta = num_gap;
    GapMethod method = GapMethod::numeric;
    const double g_star = std::exp(0.5 * (xh + xl));
    if (!(same_component && num_gap > opt_.numeric_floor * omega)) {
      const double energy = 0.5 * (sh.levels[0].energy + (b_in_hi ? b_in_hi->energy : sl.levels[0].energy));
      delta = tracker_.splitting(g_star, sh.ground(), sl.ground(), energy);
      method = GapMethod::semiclassical;
      ++g_diag.semiclassical;
    }

    // Detuning slope from the original bracket, tracking both wells.
    double slope = (hi.gap() + lo.gap()) / (hi.gamma - lo.gamma);
    const LevelInfo* b_hi = level_near(hi, wb);
    const LevelInfo* a_lo = level_near(lo, wa);
    if (b_hi && a_lo) {
      const double d_hi = b_hi->energy - hi.ground().energy;
      const double d_lo = lo.ground().energy - a_lo->energy;
      slope = (d_hi - d_lo) / (hi.gamma - lo.gamma);
    }
    const double width = 2.0 * std::sqrt(3.0) * delta / std::max(std::abs(slope), 1e-300);

    for (const auto& s : pts) {
      double gap = s.gap();
      if (method == GapMethod::semiclassical) gap = std::hypot(gap, delta);
      const auto& g = s.ground();
      trace_.insert(s.gamma, gap, g.location, g.spread, true, kNaN, method);
    }
    const auto& g = (sh.gap() <= sl.gap() ? sh : sl).ground();
    trace_.insert(g_star, delta, g.location, g.spread, true, width, method);
  }

  // Trisection around a smooth minimum at grid point `mid`.
  void trisect(const Snapshot& left, const Snapshot& mid, const Snapshot& right) {
    Snapshot a = left, b = mid, c = right;
    for (int pass = 0; pass < opt_.refine_passes; ++pass) {
      const double x0 = std::log(c.gamma), x1 = std::log(b.gamma), x2 = std::log(a.gamma);
      Snapshot p1 = eval(std::exp(x0 + (x1 - x0) / 3.0)), p2 = eval(std::exp(x0 + 2.0 * (x1 - x0) / 3.0));
      Snapshot q1 = eval(std::exp(x1 + (x2 - x1) / 3.0)), q2 = eval(std::exp(x1 + 2.0 * (x2 - x1) / 3.0));
      for (const auto* s : {&p1, &p2, &q1, &q2}) record(*s, true);
      // Ascending gamma: c, p1, p2, b, q1, q2, a.
      std::vector<Snapshot> seq{c, p1, p2, b, q1, q2, a};
      std::size_t best = 3;
      for (std::size_t i = 1; i + 1 < seq.size(); ++i)
        if (seq[i].gap() < seq[best].gap()) best = i;
      c = seq[best - 1];
      b = seq[best];
      a = seq[best + 1];
    }
  }

 private:
  SweepOptions opt_;
  RingTracker tracker_;
  GapTrace& trace_;
};

}  // namespace

void GapTrace::push_back(double g, double e, double loc, double sp, bool ref, double w, GapMethod m) {
  gamma.push_back(g);
  gap.push_back(e);
  theta_peak.push_back(loc);
  spread.push_back(sp);
  refined.push_back(ref ? 1 : 0);
  width.push_back(w);
  method.push_back(m);
}

void GapTrace::insert(double g, double e, double loc, double sp, bool ref, double w, GapMethod m) {
  const auto it = std::lower_bound(gamma.begin(), gamma.end(), g, std::greater<>());
  const auto i = static_cast<std::size_t>(it - gamma.begin());
  if (it != gamma.end() && *it == g) {
    gap[i] = e;
    theta_peak[i] = loc;
    spread[i] = sp;
    refined[i] = refined[i] && ref;
    width[i] = w;
    method[i] = m;
    return;
  }
  gamma.insert(gamma.begin() + long(i), g);
  gap.insert(gap.begin() + long(i), e);
  theta_peak.insert(theta_peak.begin() + long(i), loc);
  spread.insert(spread.begin() + long(i), sp);
  refined.insert(refined.begin() + long(i), ref ? 1 : 0);
  width.insert(width.begin() + long(i), w);
  method.insert(method.begin() + long(i), m);
}

const SweepDiagnostics& last_sweep_diagnostics() { return g_diag; }

double gamma_min(const DisorderInstance& inst) { return classical_gap(inst); }

double qcp_gamma(Eigen::Index n_spins) {
  if (n_spins < 2) throw std::invalid_argument("qcp_gamma: need N >= 2");
  return 1.0 - std::pow(double(n_spins), -2.0 / 3.0);
}

GapTrace sweep_gap(const DisorderInstance& inst, double gamma_hi, double gamma_lo, const SweepOptions& opt) {
  if (!(gamma_hi < 1.0) || !(gamma_lo > 0.0) || !(gamma_hi > gamma_lo))
    throw std::invalid_argument("sweep_gap: need 0 < gamma_lo < gamma_hi < 1");
  if (!(opt.ratio > 0.0 && opt.ratio < 1.0)) throw std::invalid_argument("sweep_gap: ratio must lie in (0, 1)");
  if (gamma_lo < 0.5 * gamma_min(inst)) throw std::invalid_argument("sweep_gap: gamma_lo below half the classical gap");
  g_diag = {};
  GapTrace trace;
  trace.n_spins = inst.n_spins();
  trace.seed = inst.seed;
  trace.gamma_min_cutoff = gamma_lo;
  SweepRunner run(inst, opt, trace);

  std::vector<Snapshot> grid;  // the last three grid points
  const auto n_steps = static_cast<long>(std::floor(std::log(gamma_lo / gamma_hi) / std::log(opt.ratio) + 1e-9));
  for (long s = 0; s <= n_steps; ++s) {
    const double g = gamma_hi * std::pow(opt.ratio, double(s));
    grid.push_back(run.eval(g));
    run.record(grid.back(), false);
    const std::size_t n = grid.size();
    if (n >= 2 && run.is_jump(grid[n - 2], grid[n - 1])) run.resolve_crossing(grid[n - 2], grid[n - 1]);
    if (n >= 3) {
      const auto &a = grid[n - 3], &b = grid[n - 2], &c = grid[n - 1];
      if (b.gap() < a.gap() && b.gap() <= c.gap() && !run.is_jump(a, b) && !run.is_jump(b, c)) run.trisect(a, b, c);
      grid.erase(grid.begin());
    }
  }
  return trace;
}

std::vector<BottleneckEvent> detect_bottlenecks(const GapTrace& trace, const DetectOptions& opt) {
  std::vector<BottleneckEvent> events;
  const std::size_t n = trace.size();
  if (n < 3) return events;
  // Grid points for the log-decade reference.
  std::vector<std::pair<double, double>> grid;
  for (std::size_t i = 0; i < n; ++i)
    if (!trace.refined[i]) grid.emplace_back(std::log(trace.gamma[i]), trace.gap[i]);
  const double half_decade = 0.5 * std::log(10.0);
  struct Found {
    BottleneckEvent ev;
    std::size_t jl, jr;
  };
  std::vector<Found> found;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double e = trace.gap[i];
    if (!(e < trace.gap[i - 1] && e <= trace.gap[i + 1]) || !(e > 0.0)) continue;
    const double x = std::log(trace.gamma[i]);
    std::vector<double> near;
    for (const auto& [gx, gv] : grid)
      if (std::abs(gx - x) <= half_decade) near.push_back(gv);
    if (near.empty()) continue;
    const double ref = median(near);
    if (!(e / ref < opt.gap_ratio)) continue;

    std::size_t jl = i, jr = i;
    while (jl > 0 && trace.gap[jl] < 2.0 * e) --jl;
    while (jr + 1 < n && trace.gap[jr] < 2.0 * e) ++jr;
    double width = trace.width[i];
    if (!std::isfinite(width)) {
      // Linear interpolation of the gamma where the gap returns to 2 e.
      auto cross = [&](std::size_t outer, std::size_t inner) {
        const double g0 = trace.gap[inner], g1 = trace.gap[outer];
        if (g1 < 2.0 * e) return trace.gamma[outer];
        const double f = (2.0 * e - g0) / (g1 - g0);
        return trace.gamma[inner] + f * (trace.gamma[outer] - trace.gamma[inner]);
      };
      width = cross(jl, jl + 1) - cross(jr, jr - 1);
    }
    const double dtheta = circ_dist(trace.theta_peak[jl], trace.theta_peak[jr]);
    const double spread = std::max(trace.spread[jl], trace.spread[jr]);
    if (!(dtheta > std::max(opt.spread_factor * spread, opt.gamma_factor * trace.gamma[i]))) continue;
    if (!(width > 0.0)) continue;

    BottleneckEvent ev;
    ev.gamma_n = trace.gamma[i];
    ev.delta_e = e;
    ev.delta_gamma = width;
    ev.delta_theta = dtheta;
    ev.delta_e_ref = ref;
    ev.action = std::abs(std::log(e / ref));
    ev.c_exponent = ev.action / std::pow(ev.gamma_n * double(trace.n_spins > 0 ? trace.n_spins : 1), 0.75);
    ev.method = trace.method[i];
    // Minima sharing one dip keep the deepest.
    if (!found.empty() && jl <= found.back().jr) {
      if (e < found.back().ev.delta_e) found.back() = {ev, std::min(jl, found.back().jl), jr};
      continue;
    }
    found.push_back({ev, jl, jr});
  }
  for (const auto& f : found) events.push_back(f.ev);
  for (std::size_t k = 0; k + 1 < events.size(); ++k) events[k].ratio_to_next = events[k].gamma_n / events[k + 1].gamma_n;
  return events;
}

double lz_failure(double delta_e, double delta_gamma, double rate, int n_runs) {
  if (!(rate > 0.0)) throw std::invalid_argument("lz_failure: rate must be positive");
  if (!(delta_e > 0.0) || !(delta_gamma > 0.0) || n_runs < 1)
    throw std::invalid_argument("lz_failure: arguments must be positive");
  return std::exp(-double(n_runs) * kPi * delta_e * delta_gamma / (4.0 * rate));
}

namespace {

SlopeFit finish_fit(const Eigen::VectorXd& x, const Eigen::VectorXd& y, std::vector<double> boot) {
  SlopeFit f;
  const auto lf = fit_line(x, y);
  f.slope = lf.slope;
  f.slope_se = lf.slope_se;
  f.intercept = lf.intercept;
  f.n_points = std::size_t(x.size());
  if (!boot.empty()) {
    f.ci_lo = quantile(boot, 0.025);
    f.ci_hi = quantile(boot, 0.975);
  }
  return f;
}

template <typename T, typename Key>
std::map<Eigen::Index, std::vector<T>> group_by_n(const std::vector<T>& v, Key key, const FitOptions& opt,
                                                  const char* what) {
  std::map<Eigen::Index, std::vector<T>> g;
  for (const auto& s : v) g[key(s)].push_back(s);
  if (g.size() < opt.min_n_values)
    throw std::invalid_argument(std::string(what) + ": need at least " + std::to_string(opt.min_n_values) +
                                " values of N");
  for (const auto& [n, grp] : g)
    if (grp.size() < opt.min_seeds)
      throw std::invalid_argument(std::string(what) + ": N = " + std::to_string(n) + " has " +
                                  std::to_string(grp.size()) + " seeds, need " + std::to_string(opt.min_seeds));
  return g;
}

}  // namespace

SlopeFit fit_gap_scaling(const std::vector<GapSample>& samples, const FitOptions& opt) {
  const auto g = group_by_n(samples, [](const GapSample& s) { return s.n_spins; }, opt, "fit_gap_scaling");
  std::vector<double> x;
  std::vector<std::vector<double>> groups;
  for (const auto& [n, grp] : g) {
    x.push_back(std::log(double(n)));
    std::vector<double> gaps;
    for (const auto& s : grp) {
      if (!(s.gap > 0.0)) throw std::invalid_argument("fit_gap_scaling: gaps must be positive");
      gaps.push_back(s.gap);
    }
    groups.push_back(std::move(gaps));
  }
  Eigen::VectorXd xv(long(x.size())), yv(long(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) {
    xv[long(i)] = x[i];
    yv[long(i)] = std::log(median(groups[i]));
  }
  SlopeFit f = finish_fit(xv, yv, {});
  const auto ci = bootstrap_slope_of_medians(x, groups, true, 0.95, opt.n_boot, opt.seed);
  f.ci_lo = ci.lo;
  f.ci_hi = ci.hi;
  return f;
}

SlopeFit fit_event_density(const std::vector<InstanceEvents>& runs, const FitOptions& opt) {
  const auto g = group_by_n(runs, [](const InstanceEvents& r) { return r.n_spins; }, opt, "fit_event_density");
  std::vector<std::vector<double>> counts;
  Eigen::VectorXd xv(long(g.size())), yv(long(g.size()));
  long k = 0;
  for (const auto& [n, grp] : g) {
    std::vector<double> c;
    for (const auto& r : grp) c.push_back(double(r.events.size()));
    xv[k] = std::log(double(n));
    yv[k] = mean(c);
    counts.push_back(std::move(c));
    ++k;
  }
  Rng rng(opt.seed);
  std::vector<double> boot;
  Eigen::VectorXd yb(yv.size());
  for (int b = 0; b < opt.n_boot; ++b) {
    for (std::size_t i = 0; i < counts.size(); ++i) {
      std::uniform_int_distribution<std::size_t> pick(0, counts[i].size() - 1);
      double s = 0.0;
      for (std::size_t j = 0; j < counts[i].size(); ++j) s += counts[i][pick(rng)];
      yb[long(i)] = s / double(counts[i].size());
    }
    boot.push_back(fit_line(xv, yb).slope);
  }
  return finish_fit(xv, yv, std::move(boot));
}

SlopeFit fit_action_exponent(const std::vector<InstanceEvents>& runs, const FitOptions& opt) {
  std::vector<double> x, y;
  for (const auto& r : runs)
    for (const auto& e : r.events)
      if (e.action > 0.0) {
        x.push_back(std::log(e.gamma_n * double(r.n_spins)));
        y.push_back(std::log(e.action));
      }
  if (x.size() < 3) throw std::invalid_argument("fit_action_exponent: need at least 3 events");
  const long m = long(x.size());
  const Eigen::VectorXd xv = Eigen::Map<const Eigen::VectorXd>(x.data(), m);
  const Eigen::VectorXd yv = Eigen::Map<const Eigen::VectorXd>(y.data(), m);
  Rng rng(opt.seed);
  std::uniform_int_distribution<long> pick(0, m - 1);
  std::vector<double> boot;
  Eigen::VectorXd xb(m), yb(m);
  for (int b = 0; b < opt.n_boot; ++b) {
    for (long i = 0; i < m; ++i) {
      const long j = pick(rng);
      xb[i] = xv[j];
      yb[i] = yv[j];
    }
    if (xb.maxCoeff() > xb.minCoeff()) boot.push_back(fit_line(xb, yb).slope);
  }
  return finish_fit(xv, yv, std::move(boot));
}

ScalingReport fit_scalings(const std::vector<GapSample>& qcp, const std::vector<GapSample>& glass,
                           const std::vector<InstanceEvents>& census, const FitOptions& opt) {
  ScalingReport rep;
  if (!qcp.empty()) {
    rep.qcp = fit_gap_scaling(qcp, opt);
    rep.has_qcp = true;
  }
  if (!glass.empty()) {
    rep.glass = fit_gap_scaling(glass, opt);
    rep.has_glass = true;
  }
  if (!census.empty()) {
    rep.alpha = fit_event_density(census, opt);
    rep.has_alpha = true;
    std::map<Eigen::Index, std::pair<double, int>> acc;
    std::vector<double> c;
    for (const auto& r : census) {
      acc[r.n_spins].first += double(r.events.size());
      acc[r.n_spins].second += 1;
      for (const auto& e : r.events) c.push_back(e.c_exponent);
    }
    for (const auto& [n, s] : acc) rep.mean_events.emplace_back(n, s.first / double(s.second));
    if (!c.empty()) {
      rep.c_stats = {c.size(), mean(c), median(c), quantile(c, 0.25), quantile(c, 0.75)};
    }
    std::size_t n_events = 0;
    for (const auto& r : census) n_events += r.events.size();
    if (n_events >= 3) {
      rep.exponent_34 = fit_action_exponent(census, opt);
      rep.has_exponent = true;
    }
  }
  return rep;
}

}  // namespace qab
