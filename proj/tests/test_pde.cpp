#include "mvosc/pde.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace mvosc;

namespace {

SpectralSystem make_system(double delta, int n_max, double dt = 0.05, double ratio1 = 0.2) {
  SolverConfig cfg;
  cfg.dt = dt;
  cfg.n_max = n_max;
  return SpectralSystem(make_fhn_model(FhnParams{}, ratio1, 0.2, delta), cfg);
}

// rho(m) plus a smooth mass-zero bump; amplitudes fall off with the degree
Vec random_state(const SpectralSystem& sys, std::mt19937_64& rng, double amp = 0.05) {
  std::normal_distribution<double> n01;
  Vec m(2);
  m << 0.8 * n01(rng), 0.5 * n01(rng);
  Vec u = sys.rho_state(m);
  for (int p = 1; p < sys.n_modes(); ++p)
    u(p) += amp * n01(rng) / (1.0 + total_degree(sys.indices()[p]));
  return u;
}

Vec random_tangent(const SpectralSystem& sys, std::mt19937_64& rng) {
  std::normal_distribution<double> n01;
  Vec v = Vec::Zero(sys.size());
  for (int p = 1; p < sys.n_modes(); ++p) v(p) = n01(rng) / (1.0 + total_degree(sys.indices()[p]));
  v.tail(2) << n01(rng), n01(rng);
  return v;
}

double rel(const Vec& a, const Vec& b) { return (a - b).norm() / std::max(b.norm(), 1e-300); }

}  // namespace

TEST(RhsG, GaussianAtOriginGivesEffectiveDrift) {
  const SpectralSystem sys = make_system(0.05, 10);
  const CenteredState s = sys.unpack(sys.rho_state(Vec::Zero(2)));
  const GRates g = rhs_G(s, sys);
  Vec z = Vec::Zero(2);
  EXPECT_NEAR((g.mean_rate - effective_drift_fhn_closed(z, FhnParams{}, 0.2)).norm(), 0.0, 1e-14);
  EXPECT_NEAR(g.mean_rate(1), 1.0 / 30.0, 1e-14);
}

TEST(RhsG, MeanRateMatchesEffectiveDriftAwayFromOrigin) {
  const SpectralSystem sys = make_system(0.05, 8);
  for (double x : {-1.5, 0.4})
    for (double y : {-0.6, 1.1}) {
      Vec m(2);
      m << x, y;
      const Vec g = sys.rhs_G(sys.rho_state(m));
      EXPECT_NEAR((g.tail(2) - effective_drift_fhn_closed(m, FhnParams{}, 0.2)).norm(), 0.0, 1e-13);
    }
}

TEST(RhsG, ZeroDriftAndZeroMass) {
  ModelSpec m = make_fhn_model();
  m.drift = DriftField::zero(2);
  SolverConfig cfg;
  cfg.n_max = 6;
  const SpectralSystem zero(m, cfg);
  std::mt19937_64 rng(1);
  EXPECT_EQ(zero.rhs_G(random_state(zero, rng)).norm(), 0.0);

  const SpectralSystem sys = make_system(0.05, 8);
  for (int k = 0; k < 5; ++k) EXPECT_EQ(sys.rhs_G(random_state(sys, rng))(0), 0.0);
}

TEST(Step, StationaryAndModeDecayWithoutCoupling) {
  const SpectralSystem sys = make_system(0.0, 8, 0.1);
  Vec m(2);
  m << 0.3, -0.2;
  const Vec rho = sys.rho_state(m);
  EXPECT_LE((sys.step(rho, 0.1) - rho).cwiseAbs().maxCoeff(), 1e-14);
  for (int p : {1, 4, 17, 40}) {
    Vec u = rho;
    u(p) = 0.3;
    const Vec out = sys.step(u, 0.1);
    EXPECT_NEAR(out(p), 0.3 * std::exp(-sys.eigenvalues()(p) * 0.1), 1e-12);
    EXPECT_NEAR(out(0), rho(0), 1e-15);
  }
}

TEST(Step, MassIsPreservedOverManySteps) {
  const SpectralSystem sys = make_system(0.05, 12, 1e-2);
  std::mt19937_64 rng(2);
  Vec u = random_state(sys, rng);
  const double m0 = sys.mass(u);
  EXPECT_NEAR(m0, 1.0, 1e-14);
  u = sys.flow(u, 100.0, 10000);
  EXPECT_LE(std::abs(sys.mass(u) - 1.0), 1e-12);
}

TEST(Step, SecondOrderUnderStepHalving) {
  const SpectralSystem sys = make_system(0.5, 8);
  std::mt19937_64 rng(3);
  const Vec u0 = random_state(sys, rng, 0.1);
  const double horizon = 4.0;
  const Vec a = sys.flow(u0, horizon, 20), b = sys.flow(u0, horizon, 40), c = sys.flow(u0, horizon, 80);
  const double order = std::log2(sys.norm(a - b) / sys.norm(b - c));
  EXPECT_GE(order, 1.8);
  EXPECT_LE(order, 2.2);
}

TEST(Step, BlowUpIsReported) {
  const SpectralSystem sys = make_system(0.05, 6);
  Vec u = sys.rho_state(Vec::Zero(2));
  u(3) = 1e13;
  try {
    sys.step(u, 0.05);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::instability);
  }
}

TEST(Flow, ZeroHorizonAndPartialStep) {
  const SpectralSystem sys = make_system(0.05, 6, 0.1);
  std::mt19937_64 rng(4);
  const Vec u = random_state(sys, rng);
  EXPECT_EQ(sys.flow(u, 0.0), u);
  const CenteredState s = sys.unpack(u);
  EXPECT_EQ(flow(s, 0.0, sys).m, s.m);
  EXPECT_EQ(sys.steps_for(1.0), 10);
  EXPECT_EQ(sys.steps_for(1.05), 11);
  int seen = 0;
  sys.flow(u, 0.35, 0, [&](int, double, const Vec&) { ++seen; });
  EXPECT_EQ(seen, 4);
}

TEST(Flow, UncoupledRelaxationToGaussian) {
  const SpectralSystem sys = make_system(0.0, 10, 0.1);
  std::mt19937_64 rng(5);
  const Vec u0 = random_state(sys, rng, 0.3);
  const double lambda = 0.99 * sys.model().k.min();
  const double d0 = sys.dual_norm_to_rho(u0);
  Vec u = u0;
  for (int k = 1; k <= 10; ++k) {
    u = sys.flow(u, 1.0);
    EXPECT_LE(sys.dual_norm_to_rho(u), d0 * std::exp(-lambda * k) * (1 + 1e-12));
  }
}

TEST(Flow, ModeDecayRatesAtSmallStep) {
  const SpectralSystem sys = make_system(0.0, 8, 1e-3);
  Vec u = sys.rho_state(Vec::Zero(2));
  for (int p = 1; p < sys.n_modes(); ++p) u(p) = 1e-2;
  const Vec out = sys.flow(u, 5.0);
  for (int p = 1; p < sys.n_modes(); ++p) {
    const double rate = -std::log(out(p) / u(p)) / 5.0;
    EXPECT_NEAR(rate / sys.eigenvalues()(p), 1.0, 1e-3) << p;
  }
}

TEST(LinearizeDG, ZeroTangentAndGaussianJacobian) {
  const SpectralSystem sys = make_system(0.05, 8);
  std::mt19937_64 rng(6);
  const Vec u = random_state(sys, rng);
  EXPECT_EQ(sys.linearize_DG(u, Vec(Vec::Zero(sys.size()))).norm(), 0.0);
  Vec m(2);
  m << -0.7, 0.4;
  Vec v = Vec::Zero(sys.size());
  v.tail(2) << 0.3, -1.2;
  const Vec dg = sys.linearize_DG(sys.rho_state(m), v);
  EXPECT_NEAR((dg.tail(2) - effective_jacobian_fhn_closed(m, FhnParams{}, 0.2) * v.tail(2)).norm(), 0.0, 1e-13);
}

TEST(LinearizeDG, CentralDifferencesOnRandomStates) {
  const SpectralSystem sys = make_system(0.05, 8);
  std::mt19937_64 rng(7);
  const double h = 1e-5;
  double worst = 0.0;
  for (int k = 0; k < 50; ++k) {
    const Vec u = random_state(sys, rng);
    const Vec v = random_tangent(sys, rng);
    const Vec fd = (sys.rhs_G(u + h * v) - sys.rhs_G(u - h * v)) / (2 * h);
    worst = std::max(worst, rel(sys.linearize_DG(u, v), fd));
  }
  EXPECT_LE(worst, 1e-6);
}

TEST(LinearizeDG, MassfulTangentIsRejected) {
  const SpectralSystem sys = make_system(0.05, 6);
  const CenteredState s = sys.unpack(sys.rho_state(Vec::Zero(2)));
  Vec v = Vec::Zero(sys.size());
  v(0) = 1.0;
  try {
    linearize_DG(s, sys.unpack_tangent(v), sys);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::contract_violation);
  }
}

TEST(SecondDG, CentralDifferencesOnRandomStates) {
  const SpectralSystem sys = make_system(0.05, 8);
  std::mt19937_64 rng(8);
  const double h = 1e-5;
  double worst = 0.0;
  for (int k = 0; k < 50; ++k) {
    const Vec u = random_state(sys, rng);
    const Vec v1 = random_tangent(sys, rng), v2 = random_tangent(sys, rng);
    const Vec fd = (sys.linearize_DG(u + h * v2, v1) - sys.linearize_DG(u - h * v2, v1)) / (2 * h);
    worst = std::max(worst, rel(sys.second_DG(u, v1, v2), fd));
  }
  EXPECT_LE(worst, 1e-4);
}

TEST(TangentFlow, UncoupledModesDecay) {
  const SpectralSystem sys = make_system(0.0, 6, 0.1);
  Vec v = Vec::Zero(sys.size());
  v(2) = 1.0;
  v(9) = -0.5;
  const Mat out = sys.tangent_flow(sys.rho_state(Vec::Zero(2)), Mat(v), 1.0);
  EXPECT_NEAR(out(2, 0), std::exp(-sys.eigenvalues()(2)), 1e-12);
  EXPECT_NEAR(out(9, 0), -0.5 * std::exp(-sys.eigenvalues()(9)), 1e-12);
}

TEST(TangentFlow, MatchesDifferencesOfFlowAndKeepsMassZero) {
  const SpectralSystem sys = make_system(0.5, 8, 0.05);
  std::mt19937_64 rng(9);
  const Vec u = random_state(sys, rng);
  const Vec v = random_tangent(sys, rng);
  const double h = 1e-5;
  const Vec fd = (sys.flow(u + h * v, 1.0) - sys.flow(u - h * v, 1.0)) / (2 * h);
  const Vec tf = sys.tangent_flow(u, Mat(v), 1.0).col(0);
  EXPECT_LE(rel(tf, fd), 1e-5);
  const Vec far = sys.tangent_flow(u, Mat(v), 20.0).col(0);
  EXPECT_LE(std::abs(sys.mass(far)), 1e-13);
}

TEST(SecondVariation, BilinearSymmetricAndConsistent) {
  const SpectralSystem sys = make_system(0.5, 6, 0.05);
  std::mt19937_64 rng(10);
  const Vec u = random_state(sys, rng);
  const Vec v1 = random_tangent(sys, rng), v2 = random_tangent(sys, rng);
  const double horizon = 1.0;
  EXPECT_EQ(sys.second_variation(u, Vec(Vec::Zero(sys.size())), v2, horizon).norm(), 0.0);
  const Vec a = sys.second_variation(u, v1, v2, horizon), b = sys.second_variation(u, v2, v1, horizon);
  EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 1e-12 * std::max(1.0, a.cwiseAbs().maxCoeff()));

  const double h = 1e-3;
  auto T = [&](const Vec& x) { return sys.flow(x, horizon); };
  const Vec fd = (T(u + h * (v1 + v2)) - T(u + h * (v1 - v2)) - T(u - h * (v1 - v2)) + T(u - h * (v1 + v2))) /
                 (4 * h * h);
  EXPECT_LE(rel(a, fd), 1e-4);
}

TEST(Lipschitz, FittedConstantIsStableUnderRefinement) {
  // sup over pairs with norm <= 2 of |G(u) - G(u')|_{-(r+1)} / |u - u'|_{-r}
  auto fit = [](int n_max) {
    const SpectralSystem sys = make_system(0.05, n_max);
    const Vec wr1 = sobolev_weights(sys.indices(), 1.0, sys.model().k.entries(), -(sys.config().r + 1));
    auto norm_r1 = [&](const Vec& g) {
      return std::sqrt((wr1.array() * g.head(sys.n_modes()).array().square()).sum() + g.tail(2).squaredNorm());
    };
    std::mt19937_64 rng(12);
    double worst = 0.0;
    for (int k = 0; k < 40; ++k) {
      const Vec a = random_state(sys, rng, 0.2);
      const Vec b = a + 0.05 * random_tangent(sys, rng);
      if (sys.norm(a) > 2.0 || sys.norm(b) > 2.0) continue;
      worst = std::max(worst, norm_r1(sys.rhs_G(a) - sys.rhs_G(b)) / sys.norm(a - b));
    }
    return worst;
  };
  const double l8 = fit(8), l12 = fit(12);
  EXPECT_GT(l8, 0.0);
  EXPECT_LE(std::max(l8, l12) / std::min(l8, l12), 1.5);
  const double frozen = 2.0;  // fitted: 1.48 at N = 8, 1.77 at N = 12
  EXPECT_LE(l12, frozen);
}

TEST(CenteredState, PackUnpackRoundTrip) {
  const SpectralSystem sys = make_system(0.05, 6);
  std::mt19937_64 rng(13);
  const Vec u = random_state(sys, rng);
  const CenteredState s = sys.unpack(u, 2.5);
  EXPECT_EQ(s.t, 2.5);
  EXPECT_EQ(sys.pack(s), u);
  EXPECT_EQ(s.p.side, Side::distribution);
  const CenteredState s2 = step(s, sys);
  EXPECT_NEAR(s2.t, 2.5 + sys.config().dt, 1e-15);
}
