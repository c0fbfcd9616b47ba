#pragma once

// Asymptotic phase of a stable cycle: Theta(mu) is read off the limit
// S(mu) = lim T^{n T} mu by matching against the sampled cycle.

#include "mvosc/core.hpp"
#include "mvosc/orbit.hpp"
#include "mvosc/pde.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

namespace mvosc {

struct IsochronConfig {
  double match_tol = 1e-3;  // landing distance accepted as "on the cycle"
  int max_periods = 200;
  double fd_step = 1e-4;    // displacement (state norm) for finite-difference gradients
  int polish_iterations = 6;
};

/// Reduced ODE: Euclidean geometry, slow time.
struct ReducedDynamics {
  const ReducedFlow* flow;
  const LimitCycle* cycle;

  Vec flow_for(const Vec& x, double t) const { return flow->flow(x, t); }
  Vec flow_periods(const Vec& x, int k) const {
    return k == 0 ? x : flow->flow(x, k * cycle->period, k * cycle->size() * cycle->substeps);
  }
  Vec field(const Vec& x) const { return flow->field(x); }
  double inner(const Vec& a, const Vec& b) const { return a.dot(b); }
  double distance(const Vec& a, const Vec& b) const { return (a - b).norm(); }
  double norm(const Vec& a) const { return a.norm(); }
  Vec cycle_point(double u) const { return cycle_state(*cycle, *flow, u); }
};

/// Spectral PDE: truncated dual Sobolev norm on p plus Euclidean on m, fast time.
struct PdeDynamics {
  const SpectralSystem* sys;
  const LimitCycle* cycle;

  double step() const { return cycle->spacing() / cycle->substeps; }
  Vec flow_for(const Vec& x, double t) const {
    return t == 0.0 ? x : sys->flow(x, t, std::max(1, static_cast<int>(std::ceil(t / step() - 1e-9))));
  }
  Vec flow_periods(const Vec& x, int k) const {
    return k == 0 ? x : sys->flow(x, k * cycle->period, k * cycle->size() * cycle->substeps);
  }
  Vec field(const Vec& x) const { return sys->vector_field(x); }
  double inner(const Vec& a, const Vec& b) const { return sys->inner(a, b); }
  double distance(const Vec& a, const Vec& b) const { return sys->distance(a, b); }
  double norm(const Vec& a) const { return sys->norm(a); }
  Vec cycle_point(double u) const { return cycle_state(*cycle, *sys, u); }
};

struct PhaseResult {
  double phase = 0.0;
  double landing_distance = 0.0;
  int periods = 0;
  Vec limit;  // S(mu) up to the landing distance
};

struct RateFit {
  bool skipped = false;  // state already on the cycle
  double rate = 0.0;     // slope of log distance against t
  double intercept = 0.0;
  std::vector<double> times, distances;
};

template <typename Dynamics>
class PhaseMap {
 public:
  PhaseMap(const LimitCycle& cycle, Dynamics dyn, double rate, IsochronConfig cfg = {})
      : cycle_(&cycle), dyn_(dyn), rate_(rate), cfg_(cfg) {
    require(rate > 0.0, ErrorKind::invalid_parameter, "phase map needs a positive contraction rate");
    require(cfg.match_tol > 0.0, ErrorKind::invalid_parameter, "isochron match_tol must be > 0");
    require(cfg.max_periods >= 1, ErrorKind::invalid_parameter, "isochron max_periods must be >= 1");
  }

  const LimitCycle& cycle() const { return *cycle_; }
  const Dynamics& dynamics() const { return dyn_; }
  double period() const { return cycle_->period; }
  double rate() const { return rate_; }
  const IsochronConfig& config() const { return cfg_; }

  /// Smallest n with e^{-rate n T} d0 <= match_tol / 10 (0 for states on the cycle).
  int horizon_for(double d0) const {
    const double scale = 1.0 + dyn_.norm(cycle_->samples[0]);
    if (d0 <= 1e-13 * scale) return 0;
    const double target = cfg_.match_tol / 10.0;
    if (d0 <= target) return 1;
    const int n = static_cast<int>(std::ceil(std::log(d0 / target) / (rate_ * period())));
    return std::clamp(n, 1, cfg_.max_periods);
  }

  PhaseResult evaluate(const Vec& state) const {
    const LimitCycle& c = *cycle_;
    const int m = c.size();
    PhaseResult res;
    auto advance = [&](const Vec& x, int k) {
      try {
        return dyn_.flow_periods(x, k);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::instability) throw;
        fail(ErrorKind::outside_basin, std::string("state does not converge to the cycle: ") + e.what());
      }
    };
    // nearest sample, quadratic refinement on squared distances, then polish
    auto locate = [&](const Vec& x, double& u) {
      const auto [j, dj] = nearest(x);
      const double dm = dyn_.distance(x, c.samples[(j + m - 1) % m]);
      const double dp = dyn_.distance(x, c.samples[(j + 1) % m]);
      const double a = dm * dm, b = dj * dj, cc = dp * dp;
      const double den = a - 2.0 * b + cc;
      const double off = den > 0.0 ? std::clamp(0.5 * (a - cc) / den, -1.0, 1.0) : 0.0;
      u = (j + off) * c.spacing();
      return dyn_.distance(x, polish(x, u));
    };
    res.periods = horizon_for(nearest(state).second);
    Vec land = advance(state, res.periods);
    double u = 0.0;
    res.landing_distance = locate(land, u);
    // far from the cycle the linear rate is optimistic; keep going from where we landed
    while (res.landing_distance > cfg_.match_tol / 10.0 && res.periods < cfg_.max_periods) {
      const int more = std::min(horizon_for(res.landing_distance), cfg_.max_periods - res.periods);
      land = advance(land, more);
      res.periods += more;
      res.landing_distance = locate(land, u);
    }
    if (!(res.landing_distance <= cfg_.match_tol)) {
      std::ostringstream os;
      os << "state does not converge to the cycle: landing distance " << res.landing_distance << " after "
         << res.periods << " periods exceeds match_tol " << cfg_.match_tol;
      fail(ErrorKind::outside_basin, os.str());
    }
    res.phase = c.wrap(u - res.periods * c.period);
    res.limit = land;
    return res;
  }

  double phase(const Vec& state) const { return evaluate(state).phase; }

  /// Signed phase difference a - b folded into [-T/2, T/2).
  double phase_difference(double a, double b) const {
    const double t = period();
    double d = std::fmod(a - b, t);
    if (d < -0.5 * t) d += t;
    if (d >= 0.5 * t) d -= t;
    return d;
  }

  /// Slope of log dist(T^{kT} mu, cycle) over whole periods k, while the
  /// distance stays above round-off. The distance is taken to the cycle point
  /// nearest to the iterate (polished from phase Theta(mu)); measuring against
  /// a fixed phase would pick up the O(1e-11) per-period drift between the
  /// discrete period map and the recorded period.
  RateFit convergence_rate(const Vec& state) const {
    RateFit fit;
    const PhaseResult pr = evaluate(state);
    const int kmax = std::max(pr.periods, 1) + 2;
    const double floor = 1e-14 * (1.0 + dyn_.norm(pr.limit));
    Vec x = state;
    for (int k = 0; k <= kmax; ++k) {
      if (k > 0) x = dyn_.flow_periods(x, 1);
      double u = pr.phase;
      const double dk = dyn_.distance(x, polish(x, u));
      // stop at round-off, or once the per-period contraction collapses: a
      // genuine exponential keeps its ratio, the cycle's own closing error does not
      const std::size_t n = fit.distances.size();
      if (dk <= floor || (n >= 1 && dk > 0.5 * fit.distances[n - 1])) break;
      if (n >= 2 && std::log(dk / fit.distances[n - 1]) > 0.5 * std::log(fit.distances[n - 1] / fit.distances[n - 2]))
        break;
      fit.times.push_back(k * period());
      fit.distances.push_back(dk);
    }
    if (fit.times.size() < 2) {
      fit.skipped = true;
      return fit;
    }
    double st = 0, sl = 0, stt = 0, stl = 0;
    const int n = static_cast<int>(fit.times.size());
    for (int i = 0; i < n; ++i) {
      const double l = std::log(fit.distances[i]);
      st += fit.times[i];
      sl += l;
      stt += fit.times[i] * fit.times[i];
      stl += fit.times[i] * l;
    }
    fit.rate = (n * stl - st * sl) / (n * stt - st * st);
    fit.intercept = (sl - fit.rate * st) / n;
    return fit;
  }

  /// Central difference of Theta at x along v: (Theta(x + h v) - Theta(x - h v)) / 2h,
  /// with h chosen so the displacement has norm cfg.fd_step.
  double directional_derivative(const Vec& x, const Vec& v) const {
    const double nv = dyn_.norm(v);
    require(nv > 0.0, ErrorKind::invalid_parameter, "zero direction in phase derivative");
    const double h = cfg_.fd_step / nv;
    const double plus = phase(x + h * v);
    const double minus = phase(x - h * v);
    return phase_difference(plus, minus) / (2.0 * h);
  }

 private:
  // Newton steps on u for <x - Gamma_u, f(Gamma_u)> = 0; returns Gamma_u.
  Vec polish(const Vec& x, double& u) const {
    const double sp = cycle_->spacing();
    Vec g = dyn_.cycle_point(u);
    for (int it = 0; it < cfg_.polish_iterations; ++it) {
      const Vec v = dyn_.field(g);
      const double du = dyn_.inner(x - g, v) / dyn_.inner(v, v);
      u += std::clamp(du, -sp, sp);
      g = dyn_.cycle_point(u);
      if (std::abs(du) <= 1e-14 * cycle_->period) break;
    }
    return g;
  }

  std::pair<int, double> nearest(const Vec& x) const {
    int best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (int j = 0; j < cycle_->size(); ++j) {
      const double d = dyn_.distance(x, cycle_->samples[j]);
      if (d < bd) {
        bd = d;
        best = j;
      }
    }
    return {best, bd};
  }

  const LimitCycle* cycle_;
  Dynamics dyn_;
  double rate_;
  IsochronConfig cfg_;
};

using ReducedPhaseMap = PhaseMap<ReducedDynamics>;
using PdePhaseMap = PhaseMap<PdeDynamics>;

inline ReducedPhaseMap make_phase_map(const LimitCycle& cyc, const ReducedFlow& flow, const FloquetData& fd,
                                      IsochronConfig cfg = {}) {
  return ReducedPhaseMap(cyc, ReducedDynamics{&flow, &cyc}, fd.rate, cfg);
}

inline PdePhaseMap make_phase_map(const LimitCycle& cyc, const SpectralSystem& sys, const FloquetData& fd,
                                  IsochronConfig cfg = {}) {
  return PdePhaseMap(cyc, PdeDynamics{&sys, &cyc}, fd.rate, cfg);
}

template <typename D>
double phase(const PhaseMap<D>& pm, const Vec& state) {
  return pm.phase(state);
}

template <typename D>
RateFit phase_convergence_rate(const PhaseMap<D>& pm, const Vec& state) {
  return pm.convergence_rate(state);
}

struct PhaseGradient {
  Vec finite_difference;  // D Theta applied to each direction
  Vec floquet;            // the same from the Floquet left eigenvector
  double mismatch = 0.0;  // max relative difference
};

namespace detail {
inline double relative_mismatch(const Vec& a, const Vec& b) {
  const double scale = std::max(a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff());
  return scale > 0.0 ? (a - b).cwiseAbs().maxCoeff() / scale : 0.0;
}

inline void check_mismatch(const PhaseGradient& g) {
  if (g.mismatch > 5e-3) {
    std::ostringstream os;
    os << "phase gradient: finite-difference and Floquet constructions differ by " << g.mismatch << " (relative)";
    fail(ErrorKind::numerical, os.str());
  }
}
}  // namespace detail

/// D Theta(Gamma_u) on the reduced cycle, full gradient (coordinate directions).
inline PhaseGradient phase_gradient(const ReducedPhaseMap& pm, double u, bool check = true) {
  const ReducedFlow& flow = *pm.dynamics().flow;
  const LimitCycle& cyc = pm.cycle();
  const int d = flow.dim();
  const Vec x = cycle_state(cyc, flow, u);
  PhaseGradient g;
  g.finite_difference.resize(d);
  for (int i = 0; i < d; ++i) g.finite_difference(i) = pm.directional_derivative(x, Vec::Unit(d, i));
  g.floquet = floquet_at(cyc, flow, u).left;
  g.mismatch = detail::relative_mismatch(g.finite_difference, g.floquet);
  if (check) detail::check_mismatch(g);
  return g;
}

/// D Theta(Gamma_u) applied to the given mass-zero directions (columns). The
/// Floquet value is l_0[Phi_{T,u} v] with l_0 the left eigenvector at phase 0.
inline PhaseGradient phase_gradient(const PdePhaseMap& pm, const FloquetData& fd, double u, const Mat& directions,
                                    bool check = true) {
  const SpectralSystem& sys = *pm.dynamics().sys;
  const LimitCycle& cyc = pm.cycle();
  const int n = sys.size();
  require(directions.rows() == n, ErrorKind::invalid_parameter, "directions must be full state vectors");
  for (int c = 0; c < directions.cols(); ++c) sys.require_mass_zero(directions.col(c));
  u = cyc.wrap(u);
  const Vec x = cycle_state(cyc, sys, u);
  PhaseGradient g;
  g.finite_difference.resize(directions.cols());
  for (int c = 0; c < directions.cols(); ++c) g.finite_difference(c) = pm.directional_derivative(x, directions.col(c));
  Mat moved = directions;
  const double rest = cyc.period - u;
  if (u > 0.0) {
    const double h = cyc.spacing() / cyc.substeps;
    moved = sys.tangent_flow(x, directions, rest, std::max(1, static_cast<int>(std::ceil(rest / h - 1e-9))));
  }
  const Vec l0 = fd.scaling.cwiseProduct(fd.left);  // tangent-space coordinates
  g.floquet = moved.bottomRows(n - 1).transpose() * l0;
  g.mismatch = detail::relative_mismatch(g.finite_difference, g.floquet);
  if (check) detail::check_mismatch(g);
  return g;
}

/// Stable eigenvector of the monodromy (second multiplier) as a state-space
/// direction with the same norm as the cycle tangent.
inline Vec stable_direction(const FloquetData& fd, const Vec& tangent_state, const SpectralSystem& sys) {
  const int n = sys.size();
  const int idx = fd.center_index == 0 ? 1 : 0;
  Vec w = fd.eigenvectors.col(idx).real();
  if (w.norm() == 0.0) w = fd.eigenvectors.col(idx).imag();
  Vec v = Vec::Zero(n);
  v.tail(n - 1) = w.cwiseQuotient(fd.scaling);
  return v * (sys.norm(tangent_state) / sys.norm(v));
}

struct IsochronGrid {
  std::vector<double> xs, ys;
  Mat theta;  // NaN outside the basin
};

/// Theta over a rectangle of the reduced plane (d = 2), for level-set plots.
inline IsochronGrid isochron_grid(const ReducedPhaseMap& pm, double x0, double x1, double y0, double y1, int nx,
                                  int ny) {
  require(pm.dynamics().flow->dim() == 2, ErrorKind::invalid_parameter, "isochron grid needs d = 2");
  require(nx >= 2 && ny >= 2, ErrorKind::invalid_parameter, "isochron grid needs >= 2 points per axis");
  IsochronGrid g;
  g.theta.resize(ny, nx);
  for (int i = 0; i < nx; ++i) g.xs.push_back(x0 + (x1 - x0) * i / (nx - 1));
  for (int j = 0; j < ny; ++j) g.ys.push_back(y0 + (y1 - y0) * j / (ny - 1));
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      Vec z(2);
      z << g.xs[i], g.ys[j];
      try {
        g.theta(j, i) = pm.phase(z);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::outside_basin) throw;
        g.theta(j, i) = std::numeric_limits<double>::quiet_NaN();
      }
    }
  return g;
}

}  // namespace mvosc
