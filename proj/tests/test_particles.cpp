#include "mvosc/particles.hpp"
#include "mvosc/pde.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace mvosc;

namespace {

// sigma and K must stay strictly positive; 1e-300 is far below the
// resolution of O(1) positions, so it acts as an exact zero here.
constexpr double kTiny = 1e-300;

ModelSpec model_1d(double k, double sigma, double delta, DriftField f) {
  ModelSpec m;
  m.d = 1;
  m.k = DiagonalMatrix(Vec::Constant(1, k));
  m.sigma = DiagonalMatrix(Vec::Constant(1, sigma));
  m.delta = delta;
  m.drift = std::move(f);
  return m;
}

Mat column(std::initializer_list<double> v) {
  Mat m(v.size(), 1);
  int i = 0;
  for (double x : v) m(i++, 0) = x;
  return m;
}

}  // namespace

TEST(Philox, KnownAnswerVectors) {
  using P = Philox4x32;
  EXPECT_EQ(P::generate({0, 0, 0, 0}, {0, 0}), (P::Counter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
  EXPECT_EQ(P::generate({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}),
            (P::Counter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
  EXPECT_EQ(P::generate({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}),
            (P::Counter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(Philox, GaussianPairMoments) {
  double s1 = 0, s2 = 0, s12 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const auto g = gaussian_pair(42, 3, i, 0);
    s1 += g[0];
    s2 += g[0] * g[0];
    s12 += g[0] * g[1];
  }
  EXPECT_LE(std::abs(s1 / n), 5.0 / std::sqrt(n));
  EXPECT_NEAR(s2 / n, 1.0, 5.0 * std::sqrt(2.0 / n));
  EXPECT_LE(std::abs(s12 / n), 5.0 / std::sqrt(n));
}

TEST(EmStep, PureContractionToTheMean) {
  const ModelSpec m = model_1d(1.0, kTiny, 0.0, DriftField::zero(1));
  Ensemble e = make_ensemble(column({1.0, -1.0}));
  em_step(e, m, 0.1);
  EXPECT_DOUBLE_EQ(e.at(0, 0), 0.9);
  EXPECT_DOUBLE_EQ(e.at(1, 0), -0.9);
  EXPECT_DOUBLE_EQ(e.t, 0.1);
  EXPECT_EQ(e.counter, 1u);
}

TEST(EmStep, DecoupledExplicitEuler) {
  const DriftField f = DriftField::custom(1, [](std::span<const double> x, std::span<double> out) {
    out[0] = -x[0] * x[0] * x[0];
  });
  const ModelSpec m = model_1d(kTiny, kTiny, 1.0, f);
  Ensemble e = make_ensemble(column({0.5, 2.0, -1.0}));
  em_step(e, m, 0.01);
  EXPECT_DOUBLE_EQ(e.at(0, 0), 0.5 - 0.01 * 0.125);
  EXPECT_DOUBLE_EQ(e.at(1, 0), 2.0 - 0.01 * 8.0);
  EXPECT_DOUBLE_EQ(e.at(2, 0), -1.0 + 0.01);
}

TEST(EmStep, SingleParticleFeelsNoInteraction) {
  // with N = 1 the particle is its own mean; compare against a K = 0 run with the same noise
  const ModelSpec coupled = make_fhn_model(FhnParams{}, 0.2, 0.2, 0.05, Vec::Constant(2, 3.0));
  ModelSpec loose = coupled;
  loose.k = DiagonalMatrix(Vec::Constant(2, kTiny));
  loose.sigma = coupled.sigma;
  Mat x0(1, 2);
  x0 << 0.4, -0.3;
  Ensemble a = make_ensemble(x0, 9), b = make_ensemble(x0, 9);
  for (int s = 0; s < 50; ++s) {
    em_step(a, coupled, 0.01);
    em_step(b, loose, 0.01);
  }
  EXPECT_EQ(a.x, b.x);
}

TEST(EmStep, BlowUpNamesTheParticle) {
  const ModelSpec m = model_1d(1.0, 1.0, 0.0, DriftField::zero(1));
  Ensemble e = make_ensemble(column({0.0, 2e8, 0.0}));
  try {
    em_step(e, m, 0.01);
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.kind(), ErrorKind::instability);
    EXPECT_NE(std::string(err.what()).find("particle 1"), std::string::npos);
  }
  EXPECT_THROW(em_step(e, m, 0.0), Error);
}

TEST(EmpiricalMean, SmallCasesAndCltBand) {
  EXPECT_EQ(empirical_mean(make_ensemble(column({3.5, -3.5})))(0), 0.0);
  EXPECT_EQ(empirical_mean(make_ensemble(column({1.25})))(0), 1.25);
  const ModelSpec m = model_1d(1.0, 1.0, 0.0, DriftField::zero(1));
  const int n = 1000000;
  const Ensemble e = sample_reference(m, n, 17, Vec::Zero(1));
  EXPECT_LE(std::abs(empirical_mean(e)(0)), 5.0 / std::sqrt(n));
  EXPECT_NEAR(empirical_variance(e)(0), 1.0, 5.0 * std::sqrt(2.0 / n));
}

TEST(Center, ExactIdempotentSubtraction) {
  const Ensemble c = center(make_ensemble(column({2.0, 4.0})));
  EXPECT_EQ(c.at(0, 0), -1.0);
  EXPECT_EQ(c.at(1, 0), 1.0);
  EXPECT_EQ(center(c).x, c.x);
  const ModelSpec m = make_fhn_model();
  Vec mean(2);
  mean << 0.7, -1.9;
  const Ensemble r = center(sample_reference(m, 5000, 3, mean));
  EXPECT_LE(empirical_mean(r).cwiseAbs().maxCoeff(), 1e-13);
  const Ensemble rr = center(r);
  EXPECT_LE(empirical_mean(rr).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(EmpiricalSpectral, SingleParticleAtOrigin) {
  const ModelSpec m = model_1d(1.0, 1.0, 0.0, DriftField::zero(1));
  const SpectralCoeffs c = empirical_spectral(make_ensemble(column({0.0})), 1.0, 4, m);
  const double h0 = std::pow(2.0 * kPi, -0.25);
  EXPECT_NEAR(c.coeffs(0), h0, 1e-15);
  EXPECT_EQ(c.coeffs(1), 0.0);
  EXPECT_NEAR(c.coeffs(2), -h0 / std::sqrt(2.0), 1e-15);
  EXPECT_EQ(c.side, Side::distribution);
}

TEST(EmpiricalSpectral, GaussianSampleMatchesQuadrature) {
  // the exact projection of rho is (2 pi)^{-1/4} on l = 0 and zero elsewhere
  const ModelSpec m = model_1d(1.0, 1.0, 0.0, DriftField::zero(1));
  const Ensemble e = sample_reference(m, 1000000, 23, Vec::Zero(1));
  const SpectralCoeffs c = empirical_spectral(e, 1.0, 4, m);
  EXPECT_NEAR(c.coeffs(0), std::pow(2.0 * kPi, -0.25), 1e-14);
  for (int l = 1; l <= 4; ++l) EXPECT_LE(std::abs(c.coeffs(l)), 1e-3) << l;
}

TEST(Simulate, DeterministicForFixedSeed) {
  const ModelSpec m = make_fhn_model();
  SimConfig cfg;
  cfg.horizon = 2.0;
  cfg.stride = 50;
  Vec z0(2);
  z0 << 0.5, 0.1;
  Ensemble a = sample_reference(m, 3000, 5, z0), b = sample_reference(m, 3000, 5, z0);
  const auto ra = simulate(a, m, cfg);
  const auto rb = simulate(b, m, cfg);
  EXPECT_EQ(a.x, b.x);
  ASSERT_EQ(ra.size(), 5u);
  EXPECT_EQ(ra.back().mean, rb.back().mean);
  EXPECT_NEAR(ra.back().t, 2.0, 1e-12);
  Ensemble c = sample_reference(m, 3000, 6, z0);
  simulate(c, m, cfg);
  EXPECT_NE(a.x, c.x);
}

TEST(Simulate, UncoupledVarianceEquilibrates) {
  ModelSpec m = make_fhn_model(FhnParams{}, 0.2, 0.5, 0.0, Vec::Ones(2));
  const int n = 20000;
  Ensemble e = make_ensemble(n, 2, 31);  // all particles start at the origin
  SimConfig cfg;
  cfg.horizon = 10.0;
  cfg.h = 0.005;
  cfg.stride = 100000;
  const auto rec = simulate(e, m, cfg);
  const Vec v = rec.back().variance;
  // Euler-Maruyama's stationary variance is sigma^2/(k (1 - k h / 2))
  for (int c = 0; c < 2; ++c) {
    const double target = m.ratio(c) / (1.0 - 0.5 * m.k[c] * cfg.h);
    EXPECT_NEAR(v(c), target, 5.0 * target * std::sqrt(2.0 / n)) << c;
  }
}

namespace {

struct ChaosRun {
  double mean_error[3];
};

// 8-seed RMS distance between the empirical mean and the PDE mean at T = 20
ChaosRun chaos_study(double h) {
  const ModelSpec m = make_fhn_model();
  Vec z0(2);
  z0 << 0.5, 0.1;
  SolverConfig scfg;
  scfg.dt = 0.05;
  scfg.n_max = 16;
  const SpectralSystem sys(m, scfg);
  const Vec pde = sys.flow(sys.rho_state(z0), 20.0).tail(2);
  ChaosRun out{};
  const int ns[3] = {1000, 4000, 16000};
  for (int j = 0; j < 3; ++j) {
    double acc = 0.0;
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
      Ensemble e = sample_reference(m, ns[j], seed, z0);
      SimConfig cfg;
      cfg.horizon = 20.0;
      cfg.h = h;
      cfg.stride = 100000;
      const auto rec = simulate(e, m, cfg);
      acc += (rec.back().mean - pde).squaredNorm();
    }
    out.mean_error[j] = std::sqrt(acc / 8);
  }
  return out;
}

double loglog_slope(const double* err) {
  const double x[3] = {std::log(1000.0), std::log(4000.0), std::log(16000.0)};
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int j = 0; j < 3; ++j) {
    const double y = std::log(err[j]);
    sx += x[j];
    sy += y;
    sxx += x[j] * x[j];
    sxy += x[j] * y;
  }
  return (3 * sxy - sx * sy) / (3 * sxx - sx * sx);
}

}  // namespace

TEST(Simulate, PropagationOfChaosShadow) {
  const ChaosRun r = chaos_study(0.01);
  const double slope = loglog_slope(r.mean_error);
  EXPECT_GE(slope, -0.65);
  EXPECT_LE(slope, -0.35);
}

TEST(Simulate, WeakEulerBiasBelowNoise) {
  const ModelSpec m = make_fhn_model();
  Vec z0(2);
  z0 << 0.5, 0.1;
  const int n = 16000;
  Vec acc[2] = {Vec::Zero(2), Vec::Zero(2)};
  double var[2] = {0.0, 0.0};
  const double hs[2] = {0.01, 0.005};
  for (int j = 0; j < 2; ++j)
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
      Ensemble e = sample_reference(m, n, 100 * j + seed, z0);
      SimConfig cfg;
      cfg.horizon = 20.0;
      cfg.h = hs[j];
      cfg.stride = 100000;
      const Vec mean = simulate(e, m, cfg).back().mean;
      acc[j] += mean;
      var[j] += mean.squaredNorm();
    }
  // standard error of the 8-seed average, per estimate
  double se2 = 0.0;
  for (int j = 0; j < 2; ++j) {
    const Vec avg = acc[j] / 8;
    se2 += std::max(var[j] / 8 - avg.squaredNorm(), 0.0) / 7;
  }
  EXPECT_LE((acc[0] / 8 - acc[1] / 8).norm(), 3.0 * std::sqrt(se2));
}
