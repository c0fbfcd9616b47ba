#pragma once

// Periodic orbits of the reduced mean ODE and of the spectral PDE, their
// Floquet data, and the approximate-invariance diagnostics of the manifold
// {(rho, alpha_u)} under the PDE flow.
//
// Reduced computations run in slow time s = delta t with unit drift <F_z, rho>,
// so alpha^delta_t = alpha^1_{delta t}; PDE computations run in fast time.

#include "mvosc/core.hpp"
#include "mvosc/model.hpp"
#include "mvosc/pde.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace mvosc {

struct OrbitConfig {
  double dt = 0.01;          // reduced RK4 step (slow time)
  int quad_order = 8;        // Gauss–Hermite order for <F_z, rho>
  int samples = 256;         // phase samples M
  double transient = 400.0;  // slow time discarded before searching
  double window = 200.0;     // slow time scanned for the anchor and the first crossing
  double tol = 1e-10;        // reduced shooting tolerance
  double pde_tol = 1e-6;     // PDE shooting tolerance
  int max_newton = 50;
  int pde_max_periods = 40;
  double fixed_point_amplitude = 1e-6;
};

enum class Space { reduced, pde };

inline const char* to_string(Space s) { return s == Space::reduced ? "reduced" : "pde"; }

struct Section {
  Vec anchor;
  Vec normal;  // unit
  double value(const Vec& m) const { return (m - anchor).dot(normal); }
};

struct LimitCycle {
  Space space = Space::reduced;
  double period = 0.0;
  std::vector<Vec> samples;  // state at phase j * period / M
  Section section;
  double delta = 0.0;
  std::string time_scale = "slow";
  int substeps = 1;            // integrator steps between consecutive samples
  double shooting_residual = 0.0;
  double periodicity_residual = 0.0;

  int size() const { return static_cast<int>(samples.size()); }
  double spacing() const { return period / size(); }
  double phase_of(int j) const { return j * spacing(); }
  double wrap(double u) const {
    double w = std::fmod(u, period);
    if (w < 0) w += period;
    if (w >= period) w -= period;
    return w;
  }
};

// ---------------------------------------------------------------- reduced flow

class ReducedFlow {
 public:
  using Field = std::function<Vec(const Vec&)>;
  using Jacobian = std::function<Mat(const Vec&)>;

  /// Drift <F_z, rho> by quadrature.
  explicit ReducedFlow(const ModelSpec& model, const OrbitConfig& cfg = {}) : dt_(cfg.dt) {
    require(cfg.dt > 0.0, ErrorKind::invalid_parameter, "orbit dt must be > 0");
    auto eff = std::make_shared<EffectiveField>(model, cfg.quad_order);
    dim_ = model.d;
    field_ = [eff](const Vec& z) { return eff->drift(z); };
    jac_ = [eff](const Vec& z) { return eff->jacobian(z); };
  }

  ReducedFlow(int dim, Field field, Jacobian jac, const OrbitConfig& cfg = {})
      : dim_(dim), field_(std::move(field)), jac_(std::move(jac)), dt_(cfg.dt) {
    require(cfg.dt > 0.0, ErrorKind::invalid_parameter, "orbit dt must be > 0");
  }

  /// Closed-form FitzHugh–Nagumo reduced drift; ratio1 = 0 gives the bare drift.
  static ReducedFlow fhn_closed(const FhnParams& p, double ratio1, const OrbitConfig& cfg = {}) {
    require(ratio1 >= 0.0, ErrorKind::invalid_parameter, "ratio1 must be >= 0");
    return ReducedFlow(
        2, [p, ratio1](const Vec& z) { return effective_drift_fhn_closed(z, p, ratio1); },
        [p, ratio1](const Vec& z) { return effective_jacobian_fhn_closed(z, p, ratio1); }, cfg);
  }

  int dim() const { return dim_; }
  double dt() const { return dt_; }

  Vec field(const Vec& z) const { return field_(z); }
  Mat jacobian(const Vec& z) const { return jac_(z); }

  Vec step(const Vec& z, double h) const {
    const Vec k1 = field(z);
    const Vec k2 = field(z + 0.5 * h * k1);
    const Vec k3 = field(z + 0.5 * h * k2);
    const Vec k4 = field(z + h * k3);
    Vec out = z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!(out.cwiseAbs().maxCoeff() <= 1e8)) fail(ErrorKind::instability, "reduced trajectory left |z| <= 1e8");
    return out;
  }

  int steps_for(double t) const { return std::max(1, static_cast<int>(std::ceil(std::abs(t) / dt_ - 1e-9))); }

  Vec flow(Vec z, double t, int n = 0) const {
    require(t >= 0.0, ErrorKind::invalid_parameter, "flow time must be >= 0");
    if (t == 0.0) return z;
    if (n <= 0) n = steps_for(t);
    const double h = t / n;
    for (int s = 0; s < n; ++s) z = step(z, h);
    return z;
  }

  /// RK4 on (z, pi, int trace) for d/dt pi = <DF_z, rho> pi.
  void step_variational(Vec& z, Mat& pi, double& trace_int, double h) const {
    const int d = dim();
    auto rhs = [&](const Vec& y, const Mat& p, Vec& dy, Mat& dp, double& dtr) {
      const Mat j = jacobian(y);
      dy = field(y);
      dp = j * p;
      dtr = j.trace();
    };
    Vec k1z(d), k2z(d), k3z(d), k4z(d);
    Mat k1p, k2p, k3p, k4p;
    double t1, t2, t3, t4;
    rhs(z, pi, k1z, k1p, t1);
    rhs(z + 0.5 * h * k1z, pi + 0.5 * h * k1p, k2z, k2p, t2);
    rhs(z + 0.5 * h * k2z, pi + 0.5 * h * k2p, k3z, k3p, t3);
    rhs(z + h * k3z, pi + h * k3p, k4z, k4p, t4);
    z += (h / 6.0) * (k1z + 2.0 * k2z + 2.0 * k3z + k4z);
    pi += (h / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
    trace_int += (h / 6.0) * (t1 + 2.0 * t2 + 2.0 * t3 + t4);
  }

 private:
  int dim_ = 0;
  Field field_;
  Jacobian jac_;
  double dt_ = 0.01;
};

struct Trajectory {
  std::vector<double> t;
  std::vector<Vec> x;
  std::string time_scale;
};

/// RK4 trajectory of the reduced ODE with step dt in recorded-time units.
/// `scale` is the slow time per unit of recorded time: 1 records slow time,
/// delta records fast time (drift delta <F_z, rho>).
inline Trajectory integrate_reduced(const Vec& z0, double horizon, double dt, const ReducedFlow& flow,
                                    double scale = 1.0, int stride = 1) {
  require(dt > 0.0, ErrorKind::invalid_parameter, "reduced dt must be > 0");
  require(horizon >= 0.0, ErrorKind::invalid_parameter, "reduced horizon must be >= 0");
  require(stride >= 1, ErrorKind::invalid_parameter, "stride must be >= 1");
  require(z0.size() == flow.dim(), ErrorKind::invalid_parameter, "initial point has wrong dimension");
  Trajectory tr;
  tr.time_scale = scale == 1.0 ? "slow" : "fast";
  const int n = horizon > 0.0 ? std::max(1, static_cast<int>(std::ceil(horizon / dt - 1e-9))) : 0;
  const double h = n > 0 ? horizon / n : 0.0;
  Vec z = z0;
  tr.t.push_back(0.0);
  tr.x.push_back(z);
  for (int s = 1; s <= n; ++s) {
    if (scale != 0.0) z = flow.step(z, h * scale);
    if (s % stride == 0 || s == n) {
      tr.t.push_back(s * h);
      tr.x.push_back(z);
    }
  }
  return tr;
}

/// With slow_time the horizon, dt and recorded times are slow (unit drift);
/// otherwise they are fast times and the drift is delta <F_z, rho>.
inline Trajectory integrate_reduced(const Vec& z0, double horizon, double dt, const ModelSpec& model,
                                    bool slow_time = true, int stride = 1, int quad_order = 8) {
  OrbitConfig cfg;
  cfg.quad_order = quad_order;
  return integrate_reduced(z0, horizon, dt, ReducedFlow(model, cfg), slow_time ? 1.0 : model.delta, stride);
}

// ------------------------------------------------------------ section crossings

struct Crossing {
  bool found = false;
  Vec state;
  double time = 0.0;
};

/// Integrates with fixed steps h until g changes sign from negative to
/// nonnegative, then solves for the partial step by the Illinois method.
template <typename Step, typename G>
Crossing next_crossing(const Vec& x0, double h, double max_time, const Step& step, const G& g) {
  Crossing c;
  Vec x = x0;
  double gx = g(x);
  double t = 0.0;
  while (t < max_time) {
    Vec x1 = step(x, h);
    const double g1 = g(x1);
    if (gx < 0.0 && g1 >= 0.0) {
      double a = 0.0, b = h, ga = gx, gb = g1;
      int side = 0;
      Vec xb = x1;
      for (int it = 0; it < 100; ++it) {
        const double tau = (a * gb - b * ga) / (gb - ga);
        Vec xt = step(x, tau);
        const double gt = g(xt);
        if (std::abs(gt) <= 1e-15 * (1.0 + x.norm()) || b - a <= 1e-15 * h) {
          a = b = tau;
          xb = xt;
          break;
        }
        if (gt < 0.0) {
          a = tau;
          ga = gt;
          if (side == -1) gb *= 0.5;
          side = -1;
        } else {
          b = tau;
          gb = gt;
          xb = xt;
          if (side == 1) ga *= 0.5;
          side = 1;
        }
      }
      c.found = true;
      c.time = t + b;
      c.state = xb;
      return c;
    }
    x = std::move(x1);
    gx = g1;
    t += h;
  }
  return c;
}

// ---------------------------------------------------------------- fixed points

struct FixedPoint {
  Vec z;
  Mat jacobian;
  double trace = 0.0;
  double det = 0.0;
  bool stable = false;
};

inline FixedPoint find_fixed_point(const ReducedFlow& flow, Vec z) {
  for (int it = 0; it < 100; ++it) {
    const Vec f = flow.field(z);
    if (f.norm() <= 1e-14) break;
    const Vec dz = flow.jacobian(z).fullPivLu().solve(f);
    z -= dz;
    if (dz.norm() <= 1e-15 * (1.0 + z.norm())) break;
  }
  require(flow.field(z).norm() <= 1e-9, ErrorKind::convergence, "fixed-point Newton iteration did not converge");
  FixedPoint fp;
  fp.z = z;
  fp.jacobian = flow.jacobian(z);
  fp.trace = fp.jacobian.trace();
  fp.det = fp.jacobian.determinant();
  Eigen::EigenSolver<Mat> es(fp.jacobian);
  fp.stable = (es.eigenvalues().real().array() < 0.0).all();
  return fp;
}

// -------------------------------------------------------------- reduced cycle

struct CycleResult {
  bool found = false;
  LimitCycle cycle;
  std::optional<FixedPoint> fixed_point;  // the attractor when no cycle exists
  int newton_iterations = 0;
  std::string message;
};

namespace detail {

/// Orthonormal basis of the complement of a unit vector (d x (d-1)).
inline Mat complement_basis(const Vec& n) {
  const int d = static_cast<int>(n.size());
  const Mat nm = n;
  Eigen::HouseholderQR<Mat> qr(nm);
  const Mat q = qr.householderQ() * Mat::Identity(d, d);
  return q.rightCols(d - 1);
}

/// Samples M states along one period of a one-step map, k substeps each.
template <typename Step>
std::vector<Vec> sample_period(const Vec& x0, double period, int m, int k, const Step& step, Vec* end_state) {
  const double h = period / (static_cast<double>(m) * k);
  std::vector<Vec> out;
  out.reserve(m);
  Vec x = x0;
  for (int j = 0; j < m; ++j) {
    out.push_back(x);
    for (int s = 0; s < k; ++s) x = step(x, h);
  }
  if (end_state) *end_state = x;
  return out;
}

}  // namespace detail

/// Poincaré-section shooting for a periodic orbit of the reduced ODE.
inline CycleResult find_cycle_reduced(const Vec& z0, const ReducedFlow& flow, const OrbitConfig& cfg = {}) {
  require(z0.size() == flow.dim(), ErrorKind::invalid_parameter, "initial point has wrong dimension");
  require(cfg.samples >= 3, ErrorKind::invalid_parameter, "orbit samples must be >= 3");
  require(cfg.tol > 0.0, ErrorKind::invalid_parameter, "orbit tol must be > 0");
  const int dim = flow.dim();
  CycleResult res;
  auto step = [&](const Vec& x, double h) { return flow.step(x, h); };

  // transient, then look for a nontrivial attractor
  Vec z = flow.flow(z0, cfg.transient);
  std::vector<Vec> win;
  double amp_first = 0.0, amp_second = 0.0;
  for (int attempt = 0; attempt < 10; ++attempt) {
    const int n = flow.steps_for(cfg.window);
    const double h = cfg.window / n;
    win.clear();
    win.reserve(n + 1);
    win.push_back(z);
    for (int s = 0; s < n; ++s) win.push_back(z = flow.step(z, h));
    const Vec& end = win.back();
    amp_first = amp_second = 0.0;
    for (int s = 0; s <= n; ++s)
      (s < n / 2 ? amp_first : amp_second) = std::max(s < n / 2 ? amp_first : amp_second, (win[s] - end).norm());
    const double scale = 1.0 + end.norm();
    if (amp_second <= cfg.fixed_point_amplitude * scale) break;
    if (amp_second > 0.9 * amp_first) break;  // sustained oscillation
  }
  if (dim < 2 || amp_second <= cfg.fixed_point_amplitude * (1.0 + win.back().norm()) ||
      amp_second < 0.9 * amp_first) {
    res.fixed_point = find_fixed_point(flow, win.back());
    std::ostringstream os;
    os << "trajectory settles on a fixed point (oscillation amplitude " << amp_second << "); no limit cycle";
    res.message = os.str();
    return res;
  }

  // anchor: point of maximal dz_1/dt (> 0) in the second half of the window
  int best = static_cast<int>(win.size()) / 2;
  double best_v = -std::numeric_limits<double>::infinity();
  for (int s = static_cast<int>(win.size()) / 2; s < static_cast<int>(win.size()); ++s) {
    const double v = flow.field(win[s])(0);
    if (v > best_v) {
      best_v = v;
      best = s;
    }
  }
  Section sec;
  sec.anchor = win[best];
  const Vec fa = flow.field(sec.anchor);
  require(fa.norm() > 0.0, ErrorKind::numerical, "degenerate section: vector field vanishes at the anchor");
  sec.normal = fa.normalized();
  auto g = [&](const Vec& x) { return sec.value(x); };

  Crossing first = next_crossing(win.back(), flow.dt(), 2.0 * cfg.window, step, g);
  require(first.found, ErrorKind::convergence, "no section crossing found within the search window");

  const Mat basis = detail::complement_basis(sec.normal);
  const int k = dim - 1;
  auto ret = [&](const Vec& s, double* time) {
    const Vec x = sec.anchor + basis * s;
    // start slightly after the section so the starting point is not detected
    Crossing c = next_crossing(flow.step(x, flow.dt()), flow.dt(), 4.0 * cfg.window, step, g);
    require(c.found, ErrorKind::convergence, "return map: trajectory did not come back to the section");
    if (time) *time = c.time + flow.dt();
    return Vec(basis.transpose() * (c.state - sec.anchor));
  };
  Vec s = basis.transpose() * (first.state - sec.anchor);
  double period = 0.0;
  Vec r = ret(s, &period) - s;
  int it = 0;
  while (r.norm() > cfg.tol) {
    if (++it > cfg.max_newton) {
      std::ostringstream os;
      os << "Newton on the return map stagnated after " << cfg.max_newton << " iterations (residual " << r.norm()
         << ")";
      fail(ErrorKind::convergence, os.str());
    }
    Mat jac(k, k);
    const double eps = 1e-6;
    for (int c = 0; c < k; ++c) {
      Vec sp = s, sm = s;
      sp(c) += eps;
      sm(c) -= eps;
      jac.col(c) = ((ret(sp, nullptr) - sp) - (ret(sm, nullptr) - sm)) / (2.0 * eps);
    }
    const Vec ds = jac.fullPivLu().solve(-r);
    double lam = 1.0;
    for (int half = 0; half < 20; ++half, lam *= 0.5) {
      const Vec trial = s + lam * ds;
      double tp = 0.0;
      const Vec rt = ret(trial, &tp) - trial;
      if (rt.norm() < r.norm() || half == 19) {
        s = trial;
        r = rt;
        period = tp;
        break;
      }
    }
  }
  res.newton_iterations = it;

  LimitCycle& cyc = res.cycle;
  cyc.space = Space::reduced;
  cyc.section = sec;
  cyc.time_scale = "slow";
  cyc.period = period;
  cyc.shooting_residual = r.norm();
  const int m = cfg.samples;
  const int sub = std::max(1, static_cast<int>(std::ceil(period / (m * cfg.dt) - 1e-9)));
  cyc.substeps = sub;
  Vec end;
  cyc.samples = detail::sample_period(sec.anchor + basis * s, period, m, sub, step, &end);
  cyc.periodicity_residual = (end - cyc.samples[0]).norm();
  res.found = true;
  res.message = "limit cycle found";
  return res;
}

inline CycleResult find_cycle_reduced(const Vec& z0, const ModelSpec& model, const OrbitConfig& cfg = {}) {
  CycleResult res = find_cycle_reduced(z0, ReducedFlow(model, cfg), cfg);
  res.cycle.delta = model.delta;
  return res;
}

/// State on a reduced cycle at phase u (slow time).
inline Vec cycle_state(const LimitCycle& cyc, const ReducedFlow& flow, double u) {
  u = cyc.wrap(u);
  const int j = std::min(cyc.size() - 1, static_cast<int>(std::floor(u / cyc.spacing())));
  const double r = u - cyc.phase_of(j);
  if (r <= 0.0) return cyc.samples[j];
  const double h = cyc.spacing() / cyc.substeps;
  const int q = std::min(cyc.substeps, static_cast<int>(std::floor(r / h)));
  Vec x = q > 0 ? flow.flow(cyc.samples[j], q * h, q) : cyc.samples[j];
  const double rest = r - q * h;
  return rest > 1e-14 * h ? flow.step(x, rest) : x;
}

struct PrincipalSolution {
  Mat pi;
  double trace_integral = 0.0;
  Vec end_state;
};

/// pi_{u+t,u} along the reduced cycle, integrated together with the state.
inline PrincipalSolution principal_matrix(const LimitCycle& cyc, const ReducedFlow& flow, double u, double t) {
  require(cyc.space == Space::reduced, ErrorKind::invalid_parameter, "principal_matrix needs a reduced cycle");
  require(t >= 0.0, ErrorKind::invalid_parameter, "principal_matrix: t must be >= 0");
  PrincipalSolution ps;
  Vec z = cycle_state(cyc, flow, u);
  ps.pi = Mat::Identity(flow.dim(), flow.dim());
  if (t > 0.0) {
    const int n = flow.steps_for(t);
    const double h = t / n;
    for (int s = 0; s < n; ++s) flow.step_variational(z, ps.pi, ps.trace_integral, h);
  }
  ps.end_state = z;
  return ps;
}

inline PrincipalSolution principal_matrix(const LimitCycle& cyc, double u, double t, const ModelSpec& model,
                                          const OrbitConfig& cfg = {}) {
  return principal_matrix(cyc, ReducedFlow(model, cfg), u, t);
}

// -------------------------------------------------------------------- Floquet

struct FloquetData {
  Space space = Space::reduced;
  double period = 0.0;
  Mat monodromy;                    // in the working coordinates (see `scaling`)
  Eigen::VectorXcd multipliers;     // sorted by decreasing modulus
  Eigen::MatrixXcd eigenvectors;    // matching columns
  int center_index = 0;             // index of the multiplier closest to 1
  Mat pc, ps;                       // spectral projections, working coordinates
  Vec tangent;                      // flow direction at phase 0, working coordinates
  Vec left;                         // left eigenvector normalized by left . tangent = 1
  Vec scaling;                      // working = diag(scaling) * tangent-space coordinates
  double rate = 0.0;                // -log|second multiplier| / period
  double multiplier_one_error = 0.0;
  double tangent_angle = 0.0;
  double commutation_residual = 0.0;
  double idempotence_residual = 0.0;
  double liouville_residual = 0.0;  // reduced only
  double c_alpha = 0.0, C_alpha = 0.0;

  std::complex<double> second_multiplier() const {
    return multipliers.size() > 1 ? multipliers(center_index == 0 ? 1 : 0) : std::complex<double>(0.0);
  }
};

namespace detail {

/// Eigen-structure, projections and residuals of a monodromy matrix.
inline void fill_floquet(FloquetData& fd, const Vec& tangent, double max_one_error, double max_angle) {
  const Mat& mono = fd.monodromy;
  const int n = static_cast<int>(mono.rows());
  Eigen::EigenSolver<Mat> es(mono);
  require(es.info() == Eigen::Success, ErrorKind::numerical, "monodromy eigen-decomposition failed");
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return std::abs(es.eigenvalues()(a)) > std::abs(es.eigenvalues()(b)); });
  fd.multipliers.resize(n);
  fd.eigenvectors.resize(n, n);
  for (int i = 0; i < n; ++i) {
    fd.multipliers(i) = es.eigenvalues()(order[i]);
    fd.eigenvectors.col(i) = es.eigenvectors().col(order[i]);
  }
  int ci = 0;
  for (int i = 1; i < n; ++i)
    if (std::abs(fd.multipliers(i) - 1.0) < std::abs(fd.multipliers(ci) - 1.0)) ci = i;
  fd.center_index = ci;
  fd.multiplier_one_error = std::abs(fd.multipliers(ci) - 1.0);
  if (fd.multiplier_one_error > max_one_error) {
    std::ostringstream os;
    os << "no Floquet multiplier within " << max_one_error << " of 1 (closest " << fd.multipliers(ci) << ")";
    fail(ErrorKind::cycle_quality, os.str());
  }
  Vec v = fd.eigenvectors.col(ci).real();
  v.normalize();
  Eigen::EigenSolver<Mat> et(Mat(mono.transpose()));
  int li = 0;
  for (int i = 1; i < n; ++i)
    if (std::abs(et.eigenvalues()(i) - fd.multipliers(ci)) < std::abs(et.eigenvalues()(li) - fd.multipliers(ci))) li = i;
  Vec w = et.eigenvectors().col(li).real();
  fd.tangent = tangent;
  const Vec tu = tangent.normalized();
  const double cosang = std::min(1.0, std::abs(v.dot(tu)));
  fd.tangent_angle = std::acos(cosang);
  if (fd.tangent_angle > max_angle) {
    std::ostringstream os;
    os << "multiplier-1 eigenvector is " << fd.tangent_angle << " rad away from the cycle tangent";
    fail(ErrorKind::cycle_quality, os.str());
  }
  fd.pc = v * w.transpose() / w.dot(v);
  fd.ps = Mat::Identity(n, n) - fd.pc;
  fd.left = w / w.dot(tangent);
  const double scale = std::max(1.0, mono.norm());
  fd.commutation_residual = (fd.pc * mono - mono * fd.pc).norm() / scale;
  fd.idempotence_residual = (fd.pc * fd.pc - fd.pc).norm();
  const double mu2 = std::abs(fd.second_multiplier());
  fd.rate = mu2 > 0.0 ? -std::log(mu2) / fd.period : std::numeric_limits<double>::infinity();
}

}  // namespace detail

/// Floquet data of the reduced cycle at phase u (slow time).
inline FloquetData floquet_at(const LimitCycle& cyc, const ReducedFlow& flow, double u) {
  FloquetData fd;
  fd.space = Space::reduced;
  fd.period = cyc.period;
  const PrincipalSolution ps = principal_matrix(cyc, flow, u, cyc.period);
  fd.monodromy = ps.pi;
  fd.scaling = Vec::Ones(flow.dim());
  fd.liouville_residual = std::abs(ps.pi.determinant() - std::exp(ps.trace_integral));
  detail::fill_floquet(fd, flow.field(cycle_state(cyc, flow, u)), 1e-3, 1e-4);
  return fd;
}

/// Monodromy, multipliers, projections and the constants c_alpha, C_alpha of
/// |pi P^s n| <= C e^{-lambda t}|n|, c|n| <= |pi n| <= C|n| for n in range P^c,
/// fitted on a grid of phases and times t in [0, 2T].
inline FloquetData floquet_reduced(const LimitCycle& cyc, const ReducedFlow& flow, int fit_phases = 16,
                                   int fit_times = 64) {
  FloquetData fd = floquet_at(cyc, flow, 0.0);
  double cmin = std::numeric_limits<double>::infinity(), cmax = 0.0;
  const double big_t = 2.0 * cyc.period;
  for (int j = 0; j < fit_phases; ++j) {
    const double u = j * cyc.period / fit_phases;
    const FloquetData fu = j == 0 ? fd : floquet_at(cyc, flow, u);
    Vec z = cycle_state(cyc, flow, u);
    Mat pi = Mat::Identity(flow.dim(), flow.dim());
    double tr = 0.0;
    const Vec vc = fu.pc.col(0).norm() > fu.pc.col(fu.pc.cols() - 1).norm() ? Vec(fu.pc.col(0)) : Vec(fu.pc.col(fu.pc.cols() - 1));
    const Vec vhat = vc.normalized();
    const int per = std::max(1, flow.steps_for(big_t / fit_times));
    const double h = big_t / (static_cast<double>(fit_times) * per);
    for (int q = 0; q <= fit_times; ++q) {
      const double t = q * per * h;
      Eigen::JacobiSVD<Mat> svd_s(pi * fu.ps), svd_c(pi * fu.pc);
      cmax = std::max({cmax, svd_s.singularValues()(0) * std::exp(fd.rate * t), svd_c.singularValues()(0)});
      cmin = std::min(cmin, (pi * vhat).norm());
      if (q < fit_times)
        for (int s = 0; s < per; ++s) flow.step_variational(z, pi, tr, h);
    }
  }
  fd.c_alpha = cmin;
  fd.C_alpha = cmax;
  return fd;
}

inline FloquetData floquet_reduced(const LimitCycle& cyc, const ModelSpec& model, const OrbitConfig& cfg = {}) {
  return floquet_reduced(cyc, ReducedFlow(model, cfg));
}

/// Smallest tau with e^{-lambda tau} <= c / (8 C).
inline double bates_tau(const FloquetData& fd) {
  return std::log(8.0 * fd.C_alpha / fd.c_alpha) / fd.rate;
}

// -------------------------------------------------------------------- PDE cycle

struct PdeCycleResult {
  LimitCycle cycle;
  std::vector<double> residual_history;
  double min_density = 0.0;  // over quadrature nodes and phase samples
  int periods_used = 0;
};

/// State on a PDE cycle at phase u (fast time), flowing from the nearest
/// earlier sample with the cycle's step size.
inline Vec cycle_state(const LimitCycle& cyc, const SpectralSystem& sys, double u) {
  u = cyc.wrap(u);
  const int j = std::min(cyc.size() - 1, static_cast<int>(std::floor(u / cyc.spacing())));
  const double r = u - cyc.phase_of(j);
  if (r <= 0.0) return cyc.samples[j];
  // whole steps of the sampling step stay on the discrete orbit; only the
  // remainder is a partial step
  const double h = cyc.spacing() / cyc.substeps;
  const int q = std::min(cyc.substeps, static_cast<int>(std::floor(r / h)));
  Vec x = q > 0 ? sys.flow(cyc.samples[j], q * h, q) : cyc.samples[j];
  const double rest = r - q * h;
  return rest > 1e-14 * h ? sys.step(x, rest) : x;
}

/// Periodic solution of the spectral PDE, started from (rho, alpha_0).
/// Successive section returns are followed until they agree to the shooting
/// tolerance, then the period is polished by a phase-condition correction
/// along the vector field with the step count fixed.
inline PdeCycleResult find_cycle_pde(const SpectralSystem& sys, const LimitCycle& reduced, const OrbitConfig& cfg = {}) {
  require(reduced.space == Space::reduced, ErrorKind::invalid_parameter, "find_cycle_pde needs the reduced cycle");
  const double delta = sys.delta();
  require(delta > 0.0, ErrorKind::invalid_parameter, "find_cycle_pde needs delta > 0");
  const int d = sys.dim();
  PdeCycleResult res;
  const Section& sec = reduced.section;
  auto g = [&](const Vec& u) { return sec.value(u.tail(d)); };
  auto step = [&](const Vec& u, double h) { return sys.step(u, h); };
  const double dt = sys.config().dt;
  const double t_guess = reduced.period / delta;

  Vec u = sys.rho_state(reduced.samples[0]);
  // leave the section, then collect returns
  u = sys.flow(u, 0.25 * t_guess);
  Crossing c = next_crossing(u, dt, 2.0 * t_guess, step, g);
  require(c.found, ErrorKind::convergence, "PDE trajectory never crossed the section");
  Vec prev = c.state;
  double period = t_guess;
  bool ok = false;
  for (int k = 0; k < cfg.pde_max_periods; ++k) {
    Crossing nx = next_crossing(sys.step(prev, dt), dt, 2.0 * t_guess, step, g);
    if (!nx.found) {
      std::ostringstream os;
      os << "PDE trajectory stopped returning to the section; residual history:";
      for (double r : res.residual_history) os << " " << r;
      fail(ErrorKind::convergence, os.str());
    }
    const double resid = sys.distance(nx.state, prev);
    res.residual_history.push_back(resid);
    period = nx.time + dt;
    prev = nx.state;
    res.periods_used = k + 1;
    if (resid <= cfg.pde_tol) {
      ok = true;
      break;
    }
  }
  if (!ok) {
    std::ostringstream os;
    os << "PDE cycle did not converge within " << cfg.pde_max_periods << " periods; residual history:";
    for (double r : res.residual_history) os << " " << r;
    fail(ErrorKind::convergence, os.str());
  }

  // fixed-step refinement: n = M * k steps of size T / n
  const int m = cfg.samples;
  const int sub = std::max(1, static_cast<int>(std::ceil(period / (m * dt) - 1e-9)));
  const int nsteps = m * sub;
  Vec mu = prev;
  for (int it = 0; it < 20; ++it) {
    const Vec nu = sys.flow(mu, period, nsteps);
    const double gap = sys.distance(nu, mu);
    const Vec v = sys.vector_field(nu);
    const double shift = -g(nu) / sec.normal.dot(v.tail(d));
    mu = nu + shift * v;
    period += shift;
    res.residual_history.push_back(gap);
    if (gap <= cfg.pde_tol && it >= 1) break;
  }
  LimitCycle& cyc = res.cycle;
  cyc.space = Space::pde;
  cyc.section = sec;
  cyc.delta = delta;
  cyc.time_scale = "fast";
  cyc.period = period;
  cyc.substeps = sub;
  Vec end;
  cyc.samples = detail::sample_period(mu, period, m, sub, step, &end);
  cyc.shooting_residual = sys.distance(end, cyc.samples[0]);
  // periodicity at every stored phase: run one more period alongside
  double worst = 0.0;
  Vec x = end;
  const double h = period / nsteps;
  for (int j = 0; j < m; ++j) {
    worst = std::max(worst, sys.distance(x, cyc.samples[j]));
    for (int s = 0; s < sub; ++s) x = sys.step(x, h);
  }
  cyc.periodicity_residual = worst;
  double mn = std::numeric_limits<double>::infinity();
  for (const Vec& s : cyc.samples) mn = std::min(mn, sys.density_at_nodes(s).minCoeff());
  res.min_density = mn;
  return res;
}

/// Columns spanning the mass-zero tangent space: unit vectors on modes l != 0
/// and on the mean coordinates.
inline Mat tangent_basis(const SpectralSystem& sys) {
  const int n = sys.size();
  Mat b = Mat::Zero(n, n - 1);
  for (int i = 1; i < n; ++i) b(i, i - 1) = 1.0;
  return b;
}

/// Monodromy of the PDE cycle on the mass-zero tangent space, in coordinates
/// weighted so that Euclidean length equals the state norm.
inline FloquetData pde_monodromy(const LimitCycle& cyc, const SpectralSystem& sys, int batch = 32) {
  require(cyc.space == Space::pde, ErrorKind::invalid_parameter, "pde_monodromy needs a PDE cycle");
  const int n = sys.size() - 1;
  const Mat basis = tangent_basis(sys);
  const int nsteps = cyc.size() * cyc.substeps;
  Mat mono(n, n);
  for (int c0 = 0; c0 < n; c0 += batch) {
    const int nc = std::min(batch, n - c0);
    const Mat cols = sys.tangent_flow(cyc.samples[0], basis.middleCols(c0, nc), cyc.period, nsteps);
    mono.middleCols(c0, nc) = cols.bottomRows(n);
  }
  FloquetData fd;
  fd.space = Space::pde;
  fd.period = cyc.period;
  fd.scaling = sys.norm_scaling().tail(n);
  fd.monodromy = fd.scaling.asDiagonal() * mono * fd.scaling.cwiseInverse().asDiagonal();
  const Vec tangent = fd.scaling.cwiseProduct(sys.vector_field(cyc.samples[0]).tail(n));
  detail::fill_floquet(fd, tangent, 1e-2, 1e-1);
  return fd;
}

// ----------------------------------------------------- period from correlation

/// Lag of the first autocorrelation peak after the first zero crossing,
/// refined by a parabola through the neighboring lags. Later peaks sit at
/// multiples of the period and are ignored.
inline double period_from_autocorrelation(const std::vector<double>& series, double dt) {
  const int n = static_cast<int>(series.size());
  require(n >= 8, ErrorKind::invalid_parameter, "autocorrelation needs at least 8 samples");
  double mean = 0.0;
  for (double v : series) mean += v;
  mean /= n;
  auto acf = [&](int lag) {
    double s = 0.0;
    for (int i = 0; i + lag < n; ++i) s += (series[i] - mean) * (series[i + lag] - mean);
    return s / (n - lag);
  };
  const int last = (3 * n) / 4;
  int lag = 1;
  while (lag < last && acf(lag) > 0.0) ++lag;
  while (lag < last && acf(lag) <= 0.0) ++lag;
  int best = lag;
  double bv = acf(lag);
  while (best + 1 < last) {
    const double v = acf(best + 1);
    if (v < bv) break;
    bv = v;
    ++best;
  }
  require(best > 1 && best + 1 < last, ErrorKind::numerical, "series too short to resolve a period");
  const double a = acf(best - 1), b = bv, c = acf(best + 1);
  const double den = a - 2.0 * b + c;
  const double off = den != 0.0 ? 0.5 * (a - c) / den : 0.0;
  return (best + off) * dt;
}

// ------------------------------------------------- approximate invariance check

struct BatesPhase {
  double u = 0.0;  // slow phase
  double defect = 0.0;
  double cross_cs = 0.0;  // || Pi^c DT |_{X^s} ||
  double cross_sc = 0.0;  // || Pi^s DT |_{X^c} ||
  double stable_norm = 0.0;
  double center_inverse = 0.0;  // || (Pi^c DT |_{X^c})^{-1} ||^{-1}
};

struct BatesDelta {
  double delta = 0.0;
  std::vector<BatesPhase> phases;
  double defect_max = 0.0, defect_min = 0.0;
  double cross_cs_max = 0.0, cross_sc_max = 0.0;
  double stable_max = 0.0, center_min = 0.0;
};

struct BatesReport {
  double tau = 0.0;
  double c_alpha = 0.0, C_alpha = 0.0, lambda_alpha = 0.0;
  std::vector<BatesDelta> per_delta;
  double defect_slope = 0.0, cross_cs_slope = 0.0, cross_sc_slope = 0.0;
  bool stable_ok = false, center_ok = false, phase_uniform = false;
  int tangent_n_max = 0;
};

inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const int n = static_cast<int>(x.size());
  require(n >= 2 && static_cast<int>(y.size()) == n, ErrorKind::invalid_parameter, "slope fit needs >= 2 points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

struct BatesOptions {
  std::vector<double> deltas = {0.1, 0.05, 0.025};
  double tau = 0.0;       // 0: smallest tau allowed by the Floquet constants
  int phases = 8;
  int tangent_n_max = 10;  // truncation for the block norms
};

/// Approximate normal hyperbolicity of {(rho, alpha_u)} for the time-tau/delta
/// map, over several delta: invariance defect, cross-block norms, and the
/// stable/center block bounds.
inline BatesReport check_bates_hypotheses(const ModelSpec& base, const SolverConfig& solver, const LimitCycle& reduced,
                                          const ReducedFlow& rflow, const FloquetData& floq,
                                          const BatesOptions& opt = {}) {
  BatesReport rep;
  rep.c_alpha = floq.c_alpha;
  rep.C_alpha = floq.C_alpha;
  rep.lambda_alpha = floq.rate;
  const double tau_min = bates_tau(floq);
  rep.tau = opt.tau > 0.0 ? opt.tau : tau_min;
  require(rep.tau >= tau_min * (1.0 - 1e-12), ErrorKind::invalid_parameter,
          "tau violates the spectral-gap margin e^{-lambda tau} <= c/(8C)");
  rep.tangent_n_max = opt.tangent_n_max;
  const int d = base.d;

  // projections at the needed slow phases
  std::vector<double> us(opt.phases);
  std::vector<Mat> pc0(opt.phases), pc1(opt.phases);
  std::vector<Vec> z0(opt.phases), z1(opt.phases);
  for (int j = 0; j < opt.phases; ++j) {
    us[j] = j * reduced.period / opt.phases;
    pc0[j] = floquet_at(reduced, rflow, us[j]).pc;
    pc1[j] = floquet_at(reduced, rflow, us[j] + rep.tau).pc;
    z0[j] = cycle_state(reduced, rflow, us[j]);
    z1[j] = cycle_state(reduced, rflow, us[j] + rep.tau);
  }

  for (double delta : opt.deltas) {
    ModelSpec model = base;
    model.delta = delta;
    SpectralSystem sys(model, solver);
    SolverConfig tcfg = solver;
    tcfg.n_max = std::min(solver.n_max, opt.tangent_n_max);
    tcfg.quad_order = 0;
    SpectralSystem tsys(model, tcfg);
    const double horizon = rep.tau / delta;
    BatesDelta bd;
    bd.delta = delta;
    const int nm = tsys.n_modes();
    const int n = tsys.size();
    const Vec w = tsys.norm_scaling();
    for (int j = 0; j < opt.phases; ++j) {
      BatesPhase ph;
      ph.u = us[j];
      const Vec end = sys.flow(sys.rho_state(z0[j]), horizon);
      ph.defect = sys.distance(end, sys.rho_state(z1[j]));

      const Mat ps0 = Mat::Identity(d, d) - pc0[j];
      const Mat ps1 = Mat::Identity(d, d) - pc1[j];
      // stable block basis: mass-zero modes plus range(P^s_u)
      Eigen::JacobiSVD<Mat> svs(ps0, Eigen::ComputeFullU);
      const Mat srange = svs.matrixU().leftCols(d - 1);
      Eigen::JacobiSVD<Mat> svc(pc0[j], Eigen::ComputeFullU);
      const Vec crange = svc.matrixU().col(0);
      Mat bs = Mat::Zero(n, nm - 1 + d - 1);
      for (int p = 1; p < nm; ++p) bs(p, p - 1) = 1.0 / w(p);  // unit length in the state norm
      bs.block(nm, nm - 1, d, d - 1) = srange;
      Mat bc = Mat::Zero(n, 1);
      bc.block(nm, 0, d, 1) = crange;
      Mat all(n, bs.cols() + 1);
      all << bs, bc;
      const Mat out = tsys.tangent_flow(tsys.rho_state(z0[j]), all, horizon);
      auto proj_c = [&](const Mat& v) {
        Mat r = Mat::Zero(n, v.cols());
        r.bottomRows(d) = pc1[j] * v.bottomRows(d);
        return r;
      };
      auto proj_s = [&](const Mat& v) {
        Mat r = v;
        r.bottomRows(d) = ps1 * v.bottomRows(d);
        return r;
      };
      auto opnorm = [&](const Mat& v) {
        const Mat wv = w.asDiagonal() * v;
        Eigen::JacobiSVD<Mat> svd(wv);
        return svd.singularValues()(0);
      };
      const Mat outs = out.leftCols(bs.cols());
      const Mat outc = out.rightCols(1);
      ph.cross_cs = opnorm(proj_c(outs));
      ph.cross_sc = opnorm(proj_s(outc));
      ph.stable_norm = opnorm(proj_s(outs));
      ph.center_inverse = (pc1[j] * outc.bottomRows(d)).norm();
      bd.phases.push_back(ph);
    }
    bd.defect_max = bd.cross_cs_max = bd.cross_sc_max = bd.stable_max = 0.0;
    bd.defect_min = bd.center_min = std::numeric_limits<double>::infinity();
    for (const auto& ph : bd.phases) {
      bd.defect_max = std::max(bd.defect_max, ph.defect);
      bd.defect_min = std::min(bd.defect_min, ph.defect);
      bd.cross_cs_max = std::max(bd.cross_cs_max, ph.cross_cs);
      bd.cross_sc_max = std::max(bd.cross_sc_max, ph.cross_sc);
      bd.stable_max = std::max(bd.stable_max, ph.stable_norm);
      bd.center_min = std::min(bd.center_min, ph.center_inverse);
    }
    rep.per_delta.push_back(bd);
  }
  std::vector<double> ds, def, ccs, csc;
  rep.stable_ok = rep.center_ok = rep.phase_uniform = true;
  const double stable_bound = 2.0 * floq.C_alpha * std::exp(-floq.rate * rep.tau);
  for (const auto& bd : rep.per_delta) {
    ds.push_back(bd.delta);
    def.push_back(bd.defect_max);
    ccs.push_back(bd.cross_cs_max);
    csc.push_back(bd.cross_sc_max);
    rep.stable_ok = rep.stable_ok && bd.stable_max <= stable_bound;
    rep.center_ok = rep.center_ok && bd.center_min > floq.c_alpha / 4.0;
    rep.phase_uniform = rep.phase_uniform && bd.defect_max <= 10.0 * bd.defect_min;
  }
  if (ds.size() >= 2) {
    rep.defect_slope = loglog_slope(ds, def);
    rep.cross_cs_slope = loglog_slope(ds, ccs);
    rep.cross_sc_slope = loglog_slope(ds, csc);
  }
  return rep;
}

}  // namespace mvosc
