#include "mvosc/orbit.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace mvosc;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

const Vec kZ0 = v2(0.5, 0.1);

struct ReducedFixture {
  ReducedFlow flow{make_fhn_model()};
  LimitCycle cycle;
  FloquetData floquet;
  ReducedFixture() {
    const CycleResult cr = find_cycle_reduced(kZ0, flow);
    if (!cr.found) throw std::runtime_error("no reduced cycle: " + cr.message);
    cycle = cr.cycle;
    floquet = floquet_reduced(cycle, flow);
  }
};

const ReducedFixture& reduced() {
  static const ReducedFixture f;
  return f;
}

}  // namespace

TEST(IntegrateReduced, ZeroDriftIsConstant) {
  ModelSpec m = make_fhn_model();
  m.drift = DriftField::zero(2);
  const Trajectory tr = integrate_reduced(kZ0, 5.0, 0.1, m);
  ASSERT_EQ(tr.x.size(), 51u);
  for (const Vec& z : tr.x) EXPECT_EQ(z, kZ0);
  EXPECT_EQ(tr.time_scale, "slow");
}

TEST(IntegrateReduced, NoiselessConvergesToFixedPoint) {
  const ReducedFlow flow = ReducedFlow::fhn_closed(FhnParams{}, 0.0);
  const Trajectory tr = integrate_reduced(kZ0, 600.0, 0.01, flow);
  EXPECT_LE((tr.x.back() - v2(-1.0, -2.0 / 3.0)).norm(), 1e-6);
}

TEST(IntegrateReduced, FourthOrderUnderStepHalving) {
  const ReducedFlow flow(make_fhn_model());
  auto end = [&](double dt) { return integrate_reduced(kZ0, 4.0, dt, flow).x.back(); };
  const Vec a = end(0.2), b = end(0.1), c = end(0.05);
  const double order = std::log2((a - b).norm() / (b - c).norm());
  EXPECT_NEAR(order, 4.0, 0.2);
}

TEST(IntegrateReduced, FastTimeRecordsScaledDrift) {
  const ModelSpec m = make_fhn_model();
  const Trajectory slow = integrate_reduced(kZ0, 2.0, 0.01, m, true);
  const Trajectory fast = integrate_reduced(kZ0, 2.0 / m.delta, 0.01 / m.delta, m, false);
  EXPECT_EQ(fast.time_scale, "fast");
  EXPECT_LE((slow.x.back() - fast.x.back()).norm(), 1e-12);
}

TEST(FindCycleReduced, NoCycleWithoutNoise) {
  const ReducedFlow flow = ReducedFlow::fhn_closed(FhnParams{}, 0.0);
  const CycleResult cr = find_cycle_reduced(kZ0, flow);
  EXPECT_FALSE(cr.found);
  ASSERT_TRUE(cr.fixed_point.has_value());
  EXPECT_LE((cr.fixed_point->z - v2(-1.0, -2.0 / 3.0)).norm(), 1e-6);
  EXPECT_NEAR(cr.fixed_point->trace, -0.1, 1e-8);
  EXPECT_NEAR(cr.fixed_point->det, 0.1, 1e-8);
  EXPECT_TRUE(cr.fixed_point->stable);
}

TEST(FindCycleReduced, CycleAroundUnstableFixedPoint) {
  const auto& f = reduced();
  // oracle: z1^3 + 0.6 z1 + 1 = 0 by bisection, z2 = z1 + 1/3
  double lo = -1.0, hi = 0.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (mid * mid * mid + 0.6 * mid + 1.0 > 0.0 ? hi : lo) = mid;
  }
  const Vec expect = v2(lo, lo + 1.0 / 3.0);
  const FixedPoint fp = find_fixed_point(f.flow, v2(-0.8, -0.47));
  EXPECT_LE((fp.z - expect).norm(), 1e-10);
  EXPECT_NEAR(fp.z(0), -0.8032, 1e-3);
  EXPECT_NEAR(fp.z(1), -0.4698, 1e-3);
  EXPECT_NEAR(fp.trace, 1.0 - lo * lo - 0.2 - 0.1, 1e-10);
  EXPECT_NEAR(fp.trace, 0.0549, 1e-3);
  EXPECT_FALSE(fp.stable);
  EXPECT_EQ(f.cycle.size(), 256);
  EXPECT_GT(f.cycle.period, 0.0);
}

TEST(FindCycleReduced, SamplesFollowTheFlowAndClose) {
  const auto& f = reduced();
  const LimitCycle& c = f.cycle;
  double worst = 0.0;
  for (int j = 0; j < c.size(); ++j) {
    const Vec next = f.flow.flow(c.samples[j], c.spacing(), c.substeps);
    worst = std::max(worst, (next - c.samples[(j + 1) % c.size()]).norm());
  }
  EXPECT_LE(worst, 1e-8);
  EXPECT_LE((f.flow.flow(c.samples[0], c.period, c.size() * c.substeps) - c.samples[0]).norm(), 1e-8);
  // phase origin on the section with increasing z1
  EXPECT_LE(std::abs(c.section.value(c.samples[0])), 1e-8);
  EXPECT_GT(f.flow.field(c.samples[0])(0), 0.0);
}

TEST(FindCycleReduced, PeriodFromAutocorrelation) {
  const auto& f = reduced();
  const double dt = 0.05;
  const Trajectory tr = integrate_reduced(f.cycle.samples[0], 6.0 * f.cycle.period, dt, f.flow);
  std::vector<double> z1;
  for (const Vec& z : tr.x) z1.push_back(z(0));
  EXPECT_NEAR(period_from_autocorrelation(z1, dt) / f.cycle.period, 1.0, 1e-2);
}

TEST(PrincipalMatrix, IdentityCocycleAndLiouville) {
  const auto& f = reduced();
  const double t = f.cycle.period;
  EXPECT_EQ(principal_matrix(f.cycle, f.flow, 3.0, 0.0).pi, Mat::Identity(2, 2));
  const double u = 5.0, s = 7.3, r = 11.1;
  const Mat whole = principal_matrix(f.cycle, f.flow, u, s + r).pi;
  const Mat parts = principal_matrix(f.cycle, f.flow, u + s, r).pi * principal_matrix(f.cycle, f.flow, u, s).pi;
  EXPECT_LE((whole - parts).cwiseAbs().maxCoeff(), 1e-8);
  const PrincipalSolution ps = principal_matrix(f.cycle, f.flow, 0.0, t);
  EXPECT_LE(std::abs(ps.pi.determinant() - std::exp(ps.trace_integral)), 1e-6);
}

TEST(FloquetReduced, StructureAndProjections) {
  const FloquetData& fd = reduced().floquet;
  EXPECT_LE(std::abs(fd.multipliers(fd.center_index) - 1.0), 1e-6);
  EXPECT_LT(std::abs(fd.second_multiplier()), 1.0);
  EXPECT_LE((fd.pc + fd.ps - Mat::Identity(2, 2)).norm(), 1e-14);
  EXPECT_LE((fd.pc * fd.pc - fd.pc).norm(), 1e-8);
  EXPECT_LE((fd.ps * fd.ps - fd.ps).norm(), 1e-8);
  EXPECT_LE((fd.pc * fd.monodromy - fd.monodromy * fd.pc).norm(), 1e-8);
  EXPECT_LE(fd.tangent_angle, 1e-4);
  EXPECT_NEAR(fd.rate, -std::log(std::abs(fd.second_multiplier())) / fd.period, 1e-12);
  EXPECT_NEAR(fd.left.dot(fd.tangent), 1.0, 1e-12);
}

TEST(FloquetReduced, StableContractionWithFittedConstant) {
  const auto& f = reduced();
  const FloquetData& fd = f.floquet;
  ASSERT_GT(fd.C_alpha, 0.0);
  ASSERT_GT(fd.c_alpha, 0.0);
  for (int j = 0; j < 4; ++j) {
    const double u = j * f.cycle.period / 4;
    const FloquetData fu = floquet_at(f.cycle, f.flow, u);
    for (double t : {1.0, 5.0, 13.0, 30.0}) {
      const Mat pi = principal_matrix(f.cycle, f.flow, u, t).pi;
      Eigen::JacobiSVD<Mat> svd(pi * fu.ps);
      EXPECT_LE(svd.singularValues()(0), fd.C_alpha * std::exp(-fd.rate * t) * 1.05) << u << " " << t;
    }
  }
  EXPECT_NEAR(bates_tau(fd), std::log(8.0 * fd.C_alpha / fd.c_alpha) / fd.rate, 1e-12);
  EXPECT_LE(std::exp(-fd.rate * bates_tau(fd)), fd.c_alpha / (8 * fd.C_alpha) * (1 + 1e-12));
}

TEST(FindCyclePde, SmallTruncation) {
  const auto& f = reduced();
  SolverConfig scfg;
  scfg.dt = 0.1;
  scfg.n_max = 8;
  const double delta = 0.1;
  const SpectralSystem sys(make_fhn_model(FhnParams{}, 0.2, 0.2, delta), scfg);
  OrbitConfig ocfg;
  const PdeCycleResult pr = find_cycle_pde(sys, f.cycle, ocfg);
  const LimitCycle& c = pr.cycle;
  EXPECT_EQ(c.space, Space::pde);
  EXPECT_LE(c.periodicity_residual, 10 * ocfg.pde_tol);
  EXPECT_NEAR(c.period * delta / f.cycle.period, 1.0, 0.1);
  EXPECT_GE(pr.min_density, -1e-8);
  for (const Vec& u : c.samples) EXPECT_NEAR(sys.mass(u), 1.0, 1e-12);

  // sampled means lie within C delta of the reduced curve
  double far = 0.0;
  for (const Vec& u : c.samples) {
    double best = std::numeric_limits<double>::infinity();
    for (const Vec& z : f.cycle.samples) best = std::min(best, (u.tail(2) - z).norm());
    far = std::max(far, best);
  }
  EXPECT_LE(far / delta, 4.0);

  // autocorrelation of m_1 agrees with the section period
  std::vector<double> m1;
  const double dt = c.spacing() / c.substeps;
  sys.flow(c.samples[0], 5 * c.period, 5 * c.size() * c.substeps,
           [&](int, double, const Vec& u) { m1.push_back(u(u.size() - 2)); });
  EXPECT_NEAR(period_from_autocorrelation(m1, dt) / c.period, 1.0, 1e-2);

  const FloquetData fd = pde_monodromy(c, sys);
  EXPECT_LE(std::abs(fd.multipliers(fd.center_index) - 1.0), 1e-4);
  EXPECT_LE(fd.tangent_angle, 1e-2);
  for (int j = 0; j < fd.multipliers.size(); ++j)
    if (j != fd.center_index) EXPECT_LE(std::abs(fd.multipliers(j)), std::exp(-fd.rate * fd.period) * (1 + 1e-12));
  EXPECT_LT(std::exp(-fd.rate * fd.period), 1.0);
  EXPECT_LE(fd.commutation_residual, 1e-8);
  EXPECT_LE(fd.idempotence_residual, 1e-8);
}
