#include "mvosc/isochron.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace mvosc;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

struct Reduced {
  ReducedFlow flow{make_fhn_model()};
  LimitCycle cycle;
  FloquetData floquet;
  Reduced() {
    const CycleResult cr = find_cycle_reduced(v2(0.5, 0.1), flow);
    if (!cr.found) throw std::runtime_error(cr.message);
    cycle = cr.cycle;
    floquet = floquet_reduced(cycle, flow);
  }
  ReducedPhaseMap map() const { return make_phase_map(cycle, flow, floquet); }
  Vec stable_at(double u) const {
    const FloquetData fu = floquet_at(cycle, flow, u);
    return fu.eigenvectors.col(fu.center_index == 0 ? 1 : 0).real().normalized();
  }
};

const Reduced& reduced() {
  static const Reduced r;
  return r;
}

// small truncation keeps the monodromy cheap
struct Pde {
  SpectralSystem sys;
  LimitCycle cycle;
  FloquetData floquet;
  Pde() : sys(make_fhn_model(FhnParams{}, 0.2, 0.2, 0.1), [] {
      SolverConfig c;
      c.dt = 0.1;
      c.n_max = 8;
      return c;
    }()) {
    cycle = find_cycle_pde(sys, reduced().cycle).cycle;
    floquet = pde_monodromy(cycle, sys);
  }
  PdePhaseMap map() const { return make_phase_map(cycle, sys, floquet); }
};

const Pde& pde() {
  static const Pde p;
  return p;
}

}  // namespace

TEST(ReducedPhase, IdentityOnTheCycle) {
  const auto& r = reduced();
  const ReducedPhaseMap pm = r.map();
  for (int j = 0; j < 16; ++j) {
    const double u = (j + 0.37) * r.cycle.period / 16;
    EXPECT_LE(std::abs(pm.phase_difference(pm.phase(cycle_state(r.cycle, r.flow, u)), u)), r.cycle.spacing());
    EXPECT_TRUE(pm.convergence_rate(cycle_state(r.cycle, r.flow, u)).skipped);
  }
  const double th = pm.phase(r.cycle.samples[10]);
  EXPECT_GE(th, 0.0);
  EXPECT_LT(th, r.cycle.period);
}

TEST(ReducedPhase, FlowIdentity) {
  const auto& r = reduced();
  const ReducedPhaseMap pm = r.map();
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    const double u = unif(rng) * r.cycle.period, ang = 2 * kPi * unif(rng), rad = 0.3 * std::sqrt(unif(rng));
    const Vec x = cycle_state(r.cycle, r.flow, u) + rad * v2(std::cos(ang), std::sin(ang));
    const double th = pm.phase(x);
    for (double o : {0.05, 0.3, 0.55, 1.2, 2.7}) {
      const double s = o * r.cycle.period;
      worst = std::max(worst, std::abs(pm.phase_difference(pm.phase(r.flow.flow(x, s)), th + s)));
    }
  }
  EXPECT_LE(worst, 1e-4 * r.cycle.period);
}

TEST(ReducedPhase, UnstableFixedPointIsOutsideTheBasin) {
  const auto& r = reduced();
  const FixedPoint fp = find_fixed_point(r.flow, v2(-0.8, -0.47));
  try {
    r.map().phase(fp.z);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::outside_basin);
  }
}

TEST(ReducedPhase, HorizonBudget) {
  const auto& r = reduced();
  const ReducedPhaseMap pm = r.map();
  const double lt = r.floquet.rate * r.cycle.period;
  const double tol10 = pm.config().match_tol / 10;
  for (double d0 : {0.5, 2.0, 1e3}) {
    const int n = pm.horizon_for(d0);
    EXPECT_LE(std::exp(-lt * n) * d0, tol10 * (1 + 1e-12));
    EXPECT_GT(std::exp(-lt * (n - 1)) * d0, tol10);
  }
  EXPECT_EQ(pm.horizon_for(0.0), 0);
}

TEST(ReducedPhase, ConvergenceRateAlongStableDirection) {
  const auto& r = reduced();
  const ReducedPhaseMap pm = r.map();
  const double lambda = r.floquet.rate;
  for (int j = 0; j < 4; ++j) {
    const double u = j * r.cycle.period / 4;
    const Vec x = cycle_state(r.cycle, r.flow, u);
    const Vec vs = r.stable_at(u);
    const RateFit a = pm.convergence_rate(x + 1e-3 * vs);
    const RateFit b = pm.convergence_rate(x + 2e-3 * vs);
    ASSERT_FALSE(a.skipped);
    ASSERT_FALSE(b.skipped);
    EXPECT_NEAR(-a.rate / lambda, 1.0, 0.3);
    EXPECT_LE(a.rate, -0.5 * lambda);
    EXPECT_NEAR(b.rate / a.rate, 1.0, 0.2);
    EXPECT_NEAR((b.intercept - a.intercept) / std::log(2.0), 1.0, 0.2);
  }
}

TEST(ReducedPhase, GradientStructure) {
  const auto& r = reduced();
  const ReducedPhaseMap pm = r.map();
  for (int j = 0; j < 6; ++j) {
    const double u = j * r.cycle.period / 6;
    const Vec x = cycle_state(r.cycle, r.flow, u);
    const Vec f = r.flow.field(x);
    EXPECT_NEAR(pm.directional_derivative(x, f), 1.0, 1e-3);
    EXPECT_NEAR(pm.directional_derivative(x, r.stable_at(u) * f.norm()), 0.0, 1e-3);
    const PhaseGradient g = phase_gradient(pm, u);
    EXPECT_LE(g.mismatch, 1e-3);
  }
}

TEST(ReducedPhase, SecondDifferencesConverge) {
  const auto& r = reduced();
  const ReducedPhaseMap pm = r.map();
  const double u = 0.3 * r.cycle.period;
  const Vec x = cycle_state(r.cycle, r.flow, u);
  const Vec v = (r.stable_at(u) + r.flow.field(x).normalized()).normalized();
  auto d2 = [&](double h) {
    const double th = pm.phase(x);
    return (pm.phase_difference(pm.phase(x + h * v), th) + pm.phase_difference(pm.phase(x - h * v), th)) / (h * h);
  };
  const double a = d2(0.04), b = d2(0.02), c = d2(0.01);
  // Richardson: differences shrink by about 4 for a C^2 (in fact smooth) map
  EXPECT_GE(std::abs(a - b) / std::abs(b - c), 2.0);
}

TEST(ReducedPhase, IsochronGrid) {
  const auto& r = reduced();
  const ReducedPhaseMap pm = r.map();
  const FixedPoint fp = find_fixed_point(r.flow, v2(-0.8, -0.47));
  const IsochronGrid g = isochron_grid(pm, fp.z(0) - 1.0, fp.z(0) + 1.0, fp.z(1) - 1.0, fp.z(1) + 1.0, 5, 5);
  ASSERT_EQ(g.theta.rows(), 5);
  ASSERT_EQ(g.theta.cols(), 5);
  EXPECT_TRUE(std::isnan(g.theta(2, 2)));  // the fixed point itself
  int finite = 0;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j)
      if (std::isfinite(g.theta(j, i))) {
        ++finite;
        EXPECT_GE(g.theta(j, i), 0.0);
        EXPECT_LT(g.theta(j, i), r.cycle.period);
        EXPECT_NEAR(g.theta(j, i), pm.phase(v2(g.xs[i], g.ys[j])), 1e-12);
      }
  EXPECT_GE(finite, 20);
}

TEST(PdePhase, FlowIdentityAndGradient) {
  const auto& p = pde();
  const PdePhaseMap pm = p.map();
  const SpectralSystem& sys = p.sys;
  const double period = p.cycle.period;
  std::mt19937_64 rng(17);
  std::normal_distribution<double> n01;
  double worst = 0.0;
  for (int k = 0; k < 3; ++k) {
    Vec dv = Vec::Zero(sys.size());
    for (int i = 1; i < sys.size(); ++i) dv(i) = n01(rng);
    const Vec x = cycle_state(p.cycle, sys, (k + 0.4) * period / 3) + dv * (0.02 / sys.norm(dv));
    const double th = pm.phase(x);
    for (double o : {0.3, 1.2}) {
      const double s = o * period;
      worst = std::max(worst, std::abs(pm.phase_difference(pm.phase(sys.flow(x, s)), th + s)));
    }
  }
  EXPECT_LE(worst, 1e-2 * period);

  const Vec x0 = p.cycle.samples[0];
  Mat dirs(sys.size(), 2);
  dirs.col(0) = sys.vector_field(x0);
  dirs.col(1) = stable_direction(p.floquet, dirs.col(0), sys);
  const PhaseGradient g = phase_gradient(pm, p.floquet, 0.0, dirs);
  EXPECT_NEAR(g.finite_difference(0), 1.0, 1e-3);
  EXPECT_NEAR(g.finite_difference(1), 0.0, 1e-3);
  EXPECT_LE(g.mismatch, 5e-3);

  const RateFit fit = pm.convergence_rate(x0 + dirs.col(1) * (1e-3 / sys.norm(dirs.col(1))));
  ASSERT_FALSE(fit.skipped);
  EXPECT_NEAR(-fit.rate / p.floquet.rate, 1.0, 0.3);
}
