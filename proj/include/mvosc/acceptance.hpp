#pragma once

// The acceptance suite: nine end-to-end criteria, each reporting measured
// values against pinned bounds. Shared by the acceptance test binary and the
// `verify` command.

#include "mvosc/core.hpp"
#include "mvosc/hermite.hpp"
#include "mvosc/isochron.hpp"
#include "mvosc/model.hpp"
#include "mvosc/orbit.hpp"
#include "mvosc/particles.hpp"
#include "mvosc/pde.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace mvosc::acceptance {

struct Measurement {
  std::string name;
  double value = 0.0;
  std::string bound;  // human-readable, e.g. "<= 1e-10"
  bool ok = true;
};

struct CriterionResult {
  int id = 0;
  std::string title;
  bool passed = false;
  double seconds = 0.0;
  double budget = 0.0;  // seconds
  std::vector<Measurement> values;
  std::string error;  // set when the criterion threw

  void check_le(const std::string& name, double v, double hi) {
    std::ostringstream b;
    b << "<= " << hi;
    values.push_back({name, v, b.str(), v <= hi});
  }
  void check_ge(const std::string& name, double v, double lo) {
    std::ostringstream b;
    b << ">= " << lo;
    values.push_back({name, v, b.str(), v >= lo});
  }
  void check_in(const std::string& name, double v, double lo, double hi) {
    std::ostringstream b;
    b << "in [" << lo << ", " << hi << "]";
    values.push_back({name, v, b.str(), v >= lo && v <= hi});
  }
  void record(const std::string& name, double v) { values.push_back({name, v, "", true}); }
};

/// Parameters shared by the criteria. Defaults are the FitzHugh-Nagumo setup
/// (a = 1/3, b = 1, c = 10, ratios 0.2, delta = 0.05, K = I).
struct Setup {
  FhnParams fhn{};
  double ratio1 = 0.2, ratio2 = 0.2;
  double delta = 0.05;
  OrbitConfig orbit{};
  double pde_dt = 0.1;
  int pde_n_max = 16;
  Vec z0 = (Vec(2) << 0.5, 0.1).finished();

  ModelSpec model(double d) const { return make_fhn_model(fhn, ratio1, ratio2, d); }
  ModelSpec model() const { return model(delta); }
  SolverConfig solver() const {
    SolverConfig s;
    s.dt = pde_dt;
    s.n_max = pde_n_max;
    return s;
  }
};

namespace detail {

using Clock = std::chrono::steady_clock;

inline CriterionResult run(int id, std::string title, double budget, const std::function<void(CriterionResult&)>& body) {
  CriterionResult r;
  r.id = id;
  r.title = std::move(title);
  r.budget = budget;
  const auto t0 = Clock::now();
  try {
    body(r);
  } catch (const std::exception& e) {
    r.error = e.what();
  }
  r.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  r.check_le("runtime_s", r.seconds, budget);
  r.passed = r.error.empty();
  for (const auto& m : r.values) r.passed = r.passed && m.ok;
  return r;
}

// Shared cycle data, computed on first use.
struct Cache {
  std::optional<ReducedFlow> flow;
  std::optional<LimitCycle> reduced;
  std::optional<FloquetData> floquet;
  std::optional<SpectralSystem> sys;
  std::optional<PdeCycleResult> pde;
  std::optional<FloquetData> pde_floquet;
};

inline void ensure_reduced(const Setup& s, Cache& c) {
  if (c.reduced) return;
  c.flow.emplace(s.model(), s.orbit);
  const CycleResult cr = find_cycle_reduced(s.z0, *c.flow, s.orbit);
  require(cr.found, ErrorKind::convergence, "reduced cycle not found: " + cr.message);
  c.reduced = cr.cycle;
  c.floquet = floquet_reduced(*c.reduced, *c.flow);
}

inline void ensure_pde(const Setup& s, Cache& c) {
  ensure_reduced(s, c);
  if (c.pde) return;
  c.sys.emplace(s.model(), s.solver());
  c.pde = find_cycle_pde(*c.sys, *c.reduced, s.orbit);
}

inline void ensure_pde_floquet(const Setup& s, Cache& c) {
  ensure_pde(s, c);
  if (!c.pde_floquet) c.pde_floquet = pde_monodromy(c.pde->cycle, *c.sys);
}

// Distance from m to the closed curve through the reduced samples, refined on
// the segment to the nearest neighbors.
inline double distance_to_curve(const std::vector<Vec>& curve, const Vec& m) {
  double best = std::numeric_limits<double>::infinity();
  const int n = static_cast<int>(curve.size());
  for (int j = 0; j < n; ++j) {
    const Vec& a = curve[j];
    const Vec& b = curve[(j + 1) % n];
    const Vec ab = b - a;
    const double t = std::clamp((m - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
    best = std::min(best, (a + t * ab - m).norm());
  }
  return best;
}

inline Vec random_mass_zero(const SpectralSystem& sys, std::mt19937_64& rng, double size) {
  std::normal_distribution<double> g;
  Vec v(sys.size());
  for (int i = 0; i < v.size(); ++i) v(i) = g(rng);
  v(0) = 0.0;
  return v * (size / sys.norm(v));
}

}  // namespace detail

class Suite {
 public:
  explicit Suite(Setup s = {}) : setup_(std::move(s)) {}
  const Setup& setup() const { return setup_; }

  static constexpr int count = 9;

  CriterionResult run(int id) {
    switch (id) {
      case 1: return effective_drift();
      case 2: return excitability();
      case 3: return floquet_structure();
      case 4: return spectral_calculus();
      case 5: return pde_solver();
      case 6: return three_way();
      case 7: return approximate_invariance();
      case 8: return pde_cycle();
      case 9: return isochron();
      default: fail(ErrorKind::invalid_parameter, "acceptance criteria are numbered 1..9");
    }
  }

  // 1. Quadrature effective drift against the closed form on a 101 x 101 grid.
  CriterionResult effective_drift() {
    return detail::run(1, "effective drift: quadrature vs closed form", 5.0, [&](CriterionResult& r) {
      const ModelSpec m = setup_.model();
      double worst = 0.0;
      for (int i = 0; i <= 100; ++i)
        for (int j = 0; j <= 100; ++j) {
          Vec z(2);
          z << -3.0 + 0.06 * i, -3.0 + 0.06 * j;
          const Vec q = mvosc::effective_drift(z, m);
          const Vec c = effective_drift_fhn_closed(z, setup_.fhn, m.ratio(0));
          worst = std::max(worst, (q - c).cwiseAbs().maxCoeff());
        }
      r.check_le("max_abs_difference", worst, 1e-10);
    });
  }

  // 2. Fixed point at ratio 0 versus oscillation at ratio 0.2.
  CriterionResult excitability() {
    return detail::run(2, "excitability dichotomy", 30.0, [&](CriterionResult& r) {
      const ReducedFlow quiet = ReducedFlow::fhn_closed(setup_.fhn, 0.0, setup_.orbit);
      const Vec end = quiet.flow(setup_.z0, 600.0);
      Vec target(2);
      target << -1.0, -2.0 / 3.0;
      r.check_le("ratio0_distance_to_(-1,-2/3)", (end - target).norm(), 1e-6);
      const FixedPoint fq = find_fixed_point(quiet, end);
      r.check_le("ratio0_trace_error", std::abs(fq.trace + 0.1), 1e-8);
      r.check_le("ratio0_det_error", std::abs(fq.det - 0.1), 1e-8);
      const CycleResult none = find_cycle_reduced(setup_.z0, quiet, setup_.orbit);
      r.check_le("ratio0_cycle_found", none.found ? 1.0 : 0.0, 0.0);

      ensure_reduced();
      Vec guess(2);
      guess << -0.8, -0.47;
      const FixedPoint fp = find_fixed_point(*cache_.flow, guess);
      r.record("ratio02_period", cache_.reduced->period);
      Vec expect(2);
      expect << -0.803, -0.470;
      r.check_le("ratio02_fixed_point_offset", (fp.z - expect).cwiseAbs().maxCoeff(), 1e-3);
      r.check_in("ratio02_trace", fp.trace, 0.050, 0.060);
      r.check_le("ratio02_fixed_point_stable", fp.stable ? 1.0 : 0.0, 0.0);
    });
  }

  // 3. Multipliers, projections and Liouville for the reduced cycle.
  CriterionResult floquet_structure() {
    return detail::run(3, "reduced Floquet structure", 30.0, [&](CriterionResult& r) {
      ensure_reduced();
      const FloquetData& fd = *cache_.floquet;
      r.check_le("multiplier_one_error", fd.multiplier_one_error, 1e-6);
      r.check_le("second_multiplier_modulus", std::abs(fd.second_multiplier()), 1.0 - 1e-12);
      r.check_le("idempotence_residual", fd.idempotence_residual, 1e-8);
      r.check_le("commutation_residual", fd.commutation_residual, 1e-8);
      r.check_le("liouville_residual", fd.liouville_residual, 1e-6);
      r.record("floquet_rate", fd.rate);
    });
  }

  // 4. Orthonormality, generator triangularity and spectrum, mean-zero decay.
  CriterionResult spectral_calculus() {
    return detail::run(4, "spectral OU calculus", 60.0, [&](CriterionResult& r) {
      const ModelSpec m = setup_.model();
      double gram = 0.0, tri = 0.0, eig = 0.0, worst_rate = std::numeric_limits<double>::infinity();
      std::mt19937_64 rng(2024);
      std::normal_distribution<double> g;
      for (double theta : {0.25, 0.5, 1.0}) {
        const auto idx = make_index_set(m.d, 8);
        const Vec scales = basis_scales(theta, m);
        const TensorRule rule = make_tensor_rule(scales, 12);
        const Mat b = basis_table(*idx, scales, rule.nodes);
        // L^2_theta pairing in the scaled variables y_i = scale_i x_i
        const Mat gm = b * rule.weights.asDiagonal() * b.transpose() * scales.prod();
        gram = std::max(gram, (gm - Mat::Identity(gm.rows(), gm.cols())).cwiseAbs().maxCoeff());

        const GeneratorMatrix gen = cross_weight_generator(theta, 1.0, 12, m);
        for (long row = 0; row < gen.matrix.rows(); ++row)
          for (long col = 0; col < row; ++col) tri = std::max(tri, std::abs(gen.matrix(row, col)));
        const Vec ev = generator_eigenvalues(gen);
        for (int p = 0; p < ev.size(); ++p) {
          const double exact = -ou_eigenvalue((*gen.indices)[p], 1.0, m.k);
          eig = std::max(eig, std::abs(ev(p) - exact) / std::max(1.0, std::abs(exact)));
        }

        // e^{t L*_{1}} on mean-zero functions, measured in H^r_theta
        const SobolevParams sp = SobolevParams::make(2.0, theta, m.k);
        for (int trial = 0; trial < 100; ++trial) {
          SpectralCoeffs f = SpectralCoeffs::zeros(theta, Side::function, gen.indices, m);
          for (int p = 1; p < f.size(); ++p) f.coeffs(p) = g(rng);
          const double t = 2.0;
          SpectralCoeffs ft = semigroup_apply(f, t, gen);
          ft.coeffs(0) = 0.0;  // subtract the w_theta mean
          const double rate = -std::log(sobolev_norm(ft, sp) / sobolev_norm(f, sp)) / t;
          worst_rate = std::min(worst_rate, rate);
        }
      }
      r.check_le("gram_max_deviation", gram, 1e-9);
      r.check_le("generator_below_diagonal", tri, 0.0);
      r.check_le("generator_eigenvalue_error", eig, 1e-14);
      r.check_ge("mean_zero_decay_rate_over_min_k", worst_rate / m.k.min(), 0.99);
    });
  }

  // 5. Mass conservation, delta = 0 modal decay, derivative checks at N_max = 24.
  CriterionResult pde_solver() {
    return detail::run(5, "PDE solver", 300.0, [&](CriterionResult& r) {
      SolverConfig sc;
      sc.n_max = 24;
      sc.dt = 0.05;
      const SpectralSystem sys(setup_.model(), sc);
      std::mt19937_64 rng(5);
      Vec u = sys.rho_state(setup_.z0) + detail::random_mass_zero(sys, rng, 1e-2);
      const double mass0 = sys.mass(u);
      double drift = 0.0;
      for (int s = 0; s < 10000; ++s) {
        u = sys.step(u, sc.dt);
        drift = std::max(drift, std::abs(sys.mass(u) - mass0));
      }
      r.check_le("mass_drift_1e4_steps", drift, 1e-12);

      ModelSpec still = setup_.model();
      still.delta = 0.0;
      const SpectralSystem lin(still, sc);
      std::normal_distribution<double> g;
      Vec c0 = Vec::Zero(lin.size());
      for (int p = 0; p < lin.n_modes(); ++p) c0(p) = 1.0 + std::abs(g(rng));
      const double t = 1.0;
      const Vec c1 = lin.flow(c0, t);
      double worst = 0.0;
      for (int p = 1; p < lin.n_modes(); ++p) {
        const double rate = -std::log(c1(p) / c0(p)) / t;
        worst = std::max(worst, std::abs(rate - lin.eigenvalues()(p)) / lin.eigenvalues()(p));
      }
      r.check_le("delta0_decay_rate_rel_error", worst, 1e-3);

      // derivative checks at a state with a nontrivial profile
      const Vec base = sys.rho_state(setup_.z0) + detail::random_mass_zero(sys, rng, 5e-2);
      double dg = 0.0, d2g = 0.0;
      for (int trial = 0; trial < 3; ++trial) {
        const Vec v1 = detail::random_mass_zero(sys, rng, 1.0);
        const Vec v2 = detail::random_mass_zero(sys, rng, 1.0);
        const double eps = 1e-5;
        const Vec exact = sys.linearize_DG(base, v1);
        const Vec fd = (sys.rhs_G(base + eps * v1) - sys.rhs_G(base - eps * v1)) / (2.0 * eps);
        dg = std::max(dg, (fd - exact).norm() / exact.norm());
        const Vec exact2 = sys.second_DG(base, v1, v2);
        const Vec fd2 =
            (sys.linearize_DG(base + eps * v2, v1) - sys.linearize_DG(base - eps * v2, v1)) / (2.0 * eps);
        d2g = std::max(d2g, (fd2 - exact2).norm() / exact2.norm());
      }
      r.check_le("DG_fd_rel_error", dg, 1e-6);
      r.check_le("D2G_fd_rel_error", d2g, 1e-4);
    });
  }

  // 6. Mean trajectories over one period: PDE vs reduced (O(delta)) and
  // particles vs PDE (N^{-1/2}).
  CriterionResult three_way() {
    return detail::run(6, "three-way mean consistency", 1200.0, [&](CriterionResult& r) {
      ensure_reduced();
      const LimitCycle& cyc = *cache_.reduced;
      const Vec a0 = cyc.samples[0];
      const double rec = 0.5;  // fast-time spacing of the comparison grid

      std::vector<double> ds, es;
      std::vector<Vec> pde_ref;
      for (double delta : {0.1, 0.05, 0.025}) {
        const ModelSpec m = setup_.model(delta);
        const SpectralSystem sys(m, setup_.solver());
        const double horizon = cyc.period / delta;
        const int n = static_cast<int>(std::ceil(horizon / rec - 1e-9));
        const int sub = std::max(1, static_cast<int>(std::llround(rec / setup_.pde_dt)));
        Vec u = sys.rho_state(a0), z = a0;
        double e = 0.0;
        std::vector<Vec> path{a0};
        for (int i = 1; i <= n; ++i) {
          u = sys.flow(u, rec, sub);
          z = cache_.flow->flow(z, delta * rec, std::max(1, static_cast<int>(std::ceil(delta * rec / setup_.orbit.dt))));
          e = std::max(e, (u.tail(2) - z).norm());
          path.push_back(u.tail(2));
        }
        ds.push_back(delta);
        es.push_back(e);
        r.record("sup_pde_minus_reduced_over_delta@" + fmt(delta), e / delta);
        if (delta == setup_.delta) pde_ref = std::move(path);
      }
      r.check_in("pde_reduced_loglog_slope", loglog_slope(ds, es), 0.8, 1.2);

      const ModelSpec m = setup_.model();
      std::vector<double> ns, errs;
      for (int n : {1000, 4000, 16000}) {
        double ss = 0.0;
        for (std::uint64_t seed = 1; seed <= 8; ++seed) {
          Ensemble e = sample_reference(m, n, seed, a0);
          SimConfig sim;
          sim.h = 0.01;
          sim.seed = seed;
          sim.horizon = rec * (static_cast<double>(pde_ref.size()) - 1.0);
          sim.stride = static_cast<int>(std::llround(rec / sim.h));
          const auto recs = simulate(e, m, sim);
          double sup = 0.0;
          for (std::size_t i = 0; i < recs.size() && i < pde_ref.size(); ++i)
            sup = std::max(sup, (recs[i].mean - pde_ref[i]).norm());
          ss += sup * sup;
        }
        const double rms = std::sqrt(ss / 8.0);
        ns.push_back(n);
        errs.push_back(rms);
        r.record("rms_sup_particles_minus_pde@N=" + std::to_string(n), rms);
      }
      r.check_in("particles_pde_loglog_slope", loglog_slope(ns, errs), -0.65, -0.35);
    });
  }

  // 7. Defect and cross-block norms of the time-tau/delta map scale like delta.
  CriterionResult approximate_invariance() {
    return detail::run(7, "approximate invariance scaling", 1200.0, [&](CriterionResult& r) {
      ensure_reduced();
      const BatesReport rep =
          check_bates_hypotheses(setup_.model(), setup_.solver(), *cache_.reduced, *cache_.flow, *cache_.floquet);
      r.record("tau", rep.tau);
      for (const auto& bd : rep.per_delta) {
        r.record("defect_max@" + fmt(bd.delta), bd.defect_max);
        r.record("cross_cs_max@" + fmt(bd.delta), bd.cross_cs_max);
        r.record("cross_sc_max@" + fmt(bd.delta), bd.cross_sc_max);
      }
      r.check_in("defect_slope", rep.defect_slope, 0.8, 1.2);
      r.check_in("cross_cs_slope", rep.cross_cs_slope, 0.8, 1.2);
      r.check_in("cross_sc_slope", rep.cross_sc_slope, 0.8, 1.2);
    });
  }

  // 8. PDE periodic solution near the reduced cycle.
  CriterionResult pde_cycle() {
    return detail::run(8, "PDE periodic solution", 1800.0, [&](CriterionResult& r) {
      ensure_pde_floquet();
      const PdeCycleResult& pc = *cache_.pde;
      const LimitCycle& cyc = pc.cycle;
      const double delta = setup_.delta;
      r.check_le("periodicity_residual", cyc.periodicity_residual, 10.0 * setup_.orbit.pde_tol);
      r.record("shooting_residual", cyc.shooting_residual);
      double far = 0.0;
      for (const Vec& s : cyc.samples) far = std::max(far, detail::distance_to_curve(cache_.reduced->samples, s.tail(2)));
      r.check_le("mean_distance_to_reduced_over_delta", far / delta, 4.0);
      r.check_le("period_rel_error", std::abs(cyc.period * delta / cache_.reduced->period - 1.0), 0.1);
      const FloquetData& fd = *cache_.pde_floquet;
      r.check_le("multiplier_one_error", fd.multiplier_one_error, 1e-4);
      r.check_le("second_multiplier_modulus", std::abs(fd.second_multiplier()), 1.0 - 1e-12);
      r.check_ge("min_density_at_nodes", pc.min_density, -1e-8);
    });
  }

  // 9. Asymptotic phase: flow identity, convergence rate, gradient structure.
  CriterionResult isochron() {
    return detail::run(9, "isochron phase map", 1200.0, [&](CriterionResult& r) {
      ensure_pde_floquet();
      const LimitCycle& rc = *cache_.reduced;
      const ReducedFlow& flow = *cache_.flow;
      const ReducedPhaseMap rpm = make_phase_map(rc, flow, *cache_.floquet);
      const double offsets[5] = {0.05, 0.3, 0.55, 1.2, 2.7};
      std::mt19937_64 rng(99);
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      double worst = 0.0;
      for (int k = 0; k < 100; ++k) {
        const double u = unif(rng) * rc.period;
        const double ang = 2.0 * kPi * unif(rng), rad = 0.3 * std::sqrt(unif(rng));
        Vec x = cycle_state(rc, flow, u);
        x(0) += rad * std::cos(ang);
        x(1) += rad * std::sin(ang);
        const double th = rpm.phase(x);
        for (double o : offsets) {
          const double s = o * rc.period;
          worst = std::max(worst, std::abs(rpm.phase_difference(rpm.phase(flow.flow(x, s)), th + s)));
        }
      }
      r.check_le("reduced_phase_flow_error_over_T", worst / rc.period, 1e-4);

      const LimitCycle& pcy = cache_.pde->cycle;
      const SpectralSystem& sys = *cache_.sys;
      const FloquetData& pfd = *cache_.pde_floquet;
      const PdePhaseMap ppm = make_phase_map(pcy, sys, pfd);
      double pworst = 0.0;
      for (int k = 0; k < 10; ++k) {
        const double u = unif(rng) * pcy.period;
        const Vec x = cycle_state(pcy, sys, u) + detail::random_mass_zero(sys, rng, 0.02);
        const double th = ppm.phase(x);
        for (double o : offsets) {
          const double s = o * pcy.period;
          pworst = std::max(pworst, std::abs(ppm.phase_difference(ppm.phase(sys.flow(x, s)), th + s)));
        }
      }
      r.check_le("pde_phase_flow_error_over_T", pworst / pcy.period, 1e-2);

      // convergence along the stable direction against the Floquet gap
      double rate_err = 0.0;
      for (int j = 0; j < 4; ++j) {
        const double u = j * rc.period / 4;
        const FloquetData fu = floquet_at(rc, flow, u);
        const Vec vs = fu.eigenvectors.col(fu.center_index == 0 ? 1 : 0).real().normalized();
        const RateFit fit = rpm.convergence_rate(cycle_state(rc, flow, u) + 1e-3 * vs);
        require(!fit.skipped, ErrorKind::numerical, "reduced rate fit skipped");
        rate_err = std::max(rate_err, std::abs(-fit.rate / cache_.floquet->rate - 1.0));
      }
      r.check_le("reduced_rate_rel_error", rate_err, 0.3);
      const Vec x0 = pcy.samples[0];
      const Vec tangent = sys.vector_field(x0);
      Vec vs = stable_direction(pfd, tangent, sys);
      const RateFit pfit = ppm.convergence_rate(x0 + vs * (1e-3 / sys.norm(vs)));
      require(!pfit.skipped, ErrorKind::numerical, "PDE rate fit skipped");
      r.check_le("pde_rate_rel_error", std::abs(-pfit.rate / pfd.rate - 1.0), 0.3);

      // D Theta on the tangent and on the stable eigendirection
      double tan_err = 0.0, stab = 0.0, mismatch = 0.0;
      for (int j = 0; j < 4; ++j) {
        const double u = j * rc.period / 4;
        const Vec x = cycle_state(rc, flow, u);
        const FloquetData fu = floquet_at(rc, flow, u);
        const Vec f = flow.field(x);
        const Vec v = fu.eigenvectors.col(fu.center_index == 0 ? 1 : 0).real().normalized() * f.norm();
        tan_err = std::max(tan_err, std::abs(rpm.directional_derivative(x, f) - 1.0));
        stab = std::max(stab, std::abs(rpm.directional_derivative(x, v)));
        mismatch = std::max(mismatch, phase_gradient(rpm, u).mismatch);
      }
      Mat dirs(sys.size(), 2);
      dirs.col(0) = tangent;
      dirs.col(1) = vs;
      const PhaseGradient pg = phase_gradient(ppm, pfd, 0.0, dirs);
      tan_err = std::max(tan_err, std::abs(pg.finite_difference(0) - 1.0));
      stab = std::max(stab, std::abs(pg.finite_difference(1)));
      mismatch = std::max(mismatch, pg.mismatch);
      r.check_le("DTheta_tangent_error", tan_err, 1e-3);
      r.check_le("DTheta_stable_direction", stab, 1e-3);
      r.check_le("fd_vs_floquet_gradient_mismatch", mismatch, 5e-3);
    });
  }

 private:
  static std::string fmt(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
  }
  void ensure_reduced() { detail::ensure_reduced(setup_, cache_); }
  void ensure_pde_floquet() { detail::ensure_pde_floquet(setup_, cache_); }

  Setup setup_;
  detail::Cache cache_;
};

/// One line per criterion: "[PASS] 3 reduced Floquet structure (1.2 s)" and
/// the measured values indented below.
inline void print(std::ostream& os, const CriterionResult& r) {
  os << (r.passed ? "[PASS] " : "[FAIL] ") << r.id << " " << r.title << " (" << std::fixed << std::setprecision(1)
     << r.seconds << " s)\n";
  os.unsetf(std::ios::floatfield);
  for (const auto& m : r.values)
    os << "       " << (m.ok ? "  " : "! ") << m.name << " = " << std::setprecision(6) << m.value
       << (m.bound.empty() ? "" : "  (" + m.bound + ")") << "\n";
  if (!r.error.empty()) os << "       ! error: " << r.error << "\n";
}

}  // namespace mvosc::acceptance
