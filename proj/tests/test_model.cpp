#include "mvosc/model.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace mvosc;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

ModelSpec with_drift(DriftField f, Vec k, Vec sigma) {
  ModelSpec m;
  m.d = static_cast<int>(k.size());
  m.k = DiagonalMatrix(k);
  m.sigma = DiagonalMatrix(sigma);
  m.drift = std::move(f);
  m.validate();
  return m;
}

}  // namespace

TEST(FhnDrift, DefaultParametersAtOrigin) {
  const Vec f = fhn_drift(v2(0, 0), FhnParams{});
  EXPECT_DOUBLE_EQ(f(0), 0.0);
  EXPECT_NEAR(f(1), 1.0 / 30.0, 1e-16);
}

TEST(FhnDrift, DefaultParametersAtOneOne) {
  const Vec f = fhn_drift(v2(1, 1), FhnParams{});
  EXPECT_NEAR(f(0), -1.0 / 3.0, 1e-15);
  EXPECT_NEAR(f(1), 1.0 / 30.0, 1e-15);
}

TEST(FhnDrift, ZeroOffset) {
  const Vec f = fhn_drift(v2(0, 0), FhnParams{0.0, 0.0, 1.0});
  EXPECT_EQ(f(0), 0.0);
  EXPECT_EQ(f(1), 0.0);
}

TEST(FhnDrift, ZeroTimeScaleIsRejected) {
  try {
    fhn_drift(v2(0, 0), FhnParams{1.0 / 3.0, 1.0, 0.0});
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::invalid_parameter);
  }
}

TEST(CutoffDrift, ProfileEndpointsAndSmoothness) {
  EXPECT_EQ(cutoff_profile(0.3), 1.0);
  EXPECT_EQ(cutoff_profile(1.0), 1.0);
  EXPECT_EQ(cutoff_profile(2.0), 0.0);
  EXPECT_EQ(cutoff_profile(7.0), 0.0);
  // quintic 1 - s^3 (10 - 15 s + 6 s^2) at s = 1/2
  EXPECT_DOUBLE_EQ(cutoff_profile(1.5), 0.5);
  for (double t = 1.0; t < 2.0; t += 0.01) EXPECT_GE(cutoff_profile(t), cutoff_profile(t + 0.01));
  const double h = 1e-6;
  for (double t : {1.25, 1.5, 1.8})
    EXPECT_NEAR(cutoff_profile_derivative(t), (cutoff_profile(t + h) - cutoff_profile(t - h)) / (2 * h), 1e-8);
  EXPECT_EQ(cutoff_profile_derivative(1.0), 0.0);
  EXPECT_EQ(cutoff_profile_derivative(2.0), 0.0);
}

TEST(CutoffDrift, InsideOutsideAndTransition) {
  const double eps = 0.25;
  const DriftField f = DriftField::fhn(FhnParams{});
  const DriftField g = cutoff_drift(f, eps);
  EXPECT_TRUE(g.bounded_with_derivatives());
  const Vec dir = v2(0.6, 0.8);
  const Vec inside = (0.5 / eps) * dir;
  EXPECT_EQ(g(inside), f(inside));
  const Vec outside = (3.0 / eps) * dir;
  EXPECT_EQ(g(outside), Vec::Zero(2));
  const Vec mid = (1.5 / eps) * dir;
  const Vec expect = f(mid) * cutoff_profile(1.5);
  EXPECT_NEAR((g(mid) - expect).norm(), 0.0, 1e-14);
  EXPECT_GT(cutoff_profile(1.5), 0.0);
  EXPECT_LT(cutoff_profile(1.5), 1.0);
}

TEST(CutoffDrift, ExactAtSampledRadii) {
  const double eps = 0.5;
  const DriftField f = DriftField::fhn(FhnParams{});
  const DriftField g = cutoff_drift(f, eps);
  for (int k = 0; k < 24; ++k) {
    const double ang = 2.0 * kPi * k / 24;
    const Vec u = v2(std::cos(ang), std::sin(ang));
    for (double r : {0.0, 0.3, 0.99, 1.0})
      EXPECT_EQ(g((r / eps) * u), f((r / eps) * u)) << "r=" << r;
    for (double r : {2.000001, 2.5, 10.0}) EXPECT_EQ(g((r / eps) * u), Vec::Zero(2)) << "r=" << r;
  }
}

TEST(CutoffDrift, RejectsNonPositiveEpsilon) {
  EXPECT_THROW(cutoff_drift(DriftField::fhn(FhnParams{}), 0.0), Error);
  EXPECT_THROW(cutoff_drift(DriftField::fhn(FhnParams{}), -1.0), Error);
}

TEST(CutoffDrift, JacobianMatchesFiniteDifferences) {
  const DriftField g = cutoff_drift(DriftField::fhn(FhnParams{}), 0.4);
  const Vec x = v2(2.1, -2.6);  // inside the transition annulus
  const Mat j = g.jacobian(x);
  const double h = 1e-6;
  for (int c = 0; c < 2; ++c) {
    Vec e = Vec::Zero(2);
    e(c) = h;
    const Vec col = (g(x + e) - g(x - e)) / (2 * h);
    EXPECT_NEAR((j.col(c) - col).norm(), 0.0, 1e-7);
  }
}

TEST(CustomDrift, FiniteDifferenceJacobianFallback) {
  const DriftField f = DriftField::custom(2, [](std::span<const double> x, std::span<double> out) {
    out[0] = std::sin(x[0]) * x[1];
    out[1] = x[0] * x[0];
  });
  EXPECT_FALSE(f.has_analytic_jacobian());
  const Vec x = v2(0.7, -1.3);
  Mat expect(2, 2);
  expect << std::cos(0.7) * -1.3, std::sin(0.7), 2 * 0.7, 0.0;
  EXPECT_NEAR((f.jacobian(x) - expect).norm(), 0.0, 1e-8);
}

TEST(GaussianReference, OneDimensionalNormalization) {
  ModelSpec m = with_drift(DriftField::zero(1), Vec::Ones(1), Vec::Ones(1));
  const GaussianRef g = gaussian_ref(m);
  EXPECT_DOUBLE_EQ(g.variance(0), 1.0);
  EXPECT_NEAR(g.normalization, 2.5066283, 1e-7);
}

TEST(GaussianReference, VarianceIsSigmaSquaredOverK) {
  ModelSpec m = with_drift(DriftField::zero(2), v2(1, 2), v2(1, 1));
  const GaussianRef g = gaussian_ref(m);
  EXPECT_EQ(g.variance(0), 1.0);
  EXPECT_EQ(g.variance(1), 0.5);
  ModelSpec unit = with_drift(DriftField::zero(2), v2(4, 9), v2(2, 3));
  EXPECT_EQ(gaussian_ref(unit).variance, Vec::Ones(2));
}

TEST(GaussianReference, DensityIntegratesToOne) {
  ModelSpec m = with_drift(DriftField::zero(2), v2(1.0, 2.5), v2(0.7, 1.3));
  const GaussianRef g = gaussian_ref(m);
  const TensorRule rule = make_tensor_rule(g.variance.cwiseSqrt().cwiseInverse(), 20);
  // the rule already carries the Gaussian factor, so integrate rho / weight
  const double total = integrate(rule, [&](const Vec&) { return 1.0 / g.normalization; });
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(EffectiveDrift, OriginMatchesClosedForm) {
  for (int order : {2, 3, 8, 20}) {
    const Vec e = effective_drift(v2(0, 0), make_fhn_model(FhnParams{}, 0.2, 0.7), order);
    EXPECT_NEAR(e(0), 0.0, 1e-15);
    EXPECT_NEAR(e(1), 1.0 / 30.0, 1e-15);
  }
}

TEST(EffectiveDrift, ZeroAndLinearDrifts) {
  const ModelSpec zero = with_drift(DriftField::zero(2), Vec::Ones(2), v2(0.5, 0.5));
  EXPECT_EQ(effective_drift(v2(1.2, -0.4), zero), Vec::Zero(2));
  Mat a(2, 2);
  a << 1.0, -2.0, 0.5, 3.0;
  const ModelSpec lin = with_drift(DriftField::linear(a), Vec::Ones(2), v2(0.8, 0.3));
  const Vec z = v2(0.3, -1.1);
  for (int order : {1, 2, 5}) {
    EXPECT_NEAR((effective_drift(z, lin, order) - a * z).norm(), 0.0, 1e-14);
    EXPECT_NEAR((effective_jacobian(z, lin, order) - a).norm(), 0.0, 1e-14);
  }
}

TEST(EffectiveDrift, ClosedFormValues) {
  const Vec e = effective_drift_fhn_closed(v2(1, 0), FhnParams{}, 0.2);
  EXPECT_NEAR(e(0), 0.8 - 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(e(1), (1.0 + 1.0 / 3.0) / 10.0, 1e-15);
  EXPECT_NEAR(e(0), 0.4666667, 1e-7);
  EXPECT_NEAR(e(1), 0.1333333, 1e-7);
  for (double x : {-2.0, -0.3, 0.9})
    for (double y : {-1.0, 0.4}) EXPECT_EQ(effective_drift_fhn_closed(v2(x, y), FhnParams{}, 0.0), fhn_drift(v2(x, y), FhnParams{}));
}

TEST(EffectiveDrift, GridAgreementForVariedParameters) {
  // any (a, b, c) and diagonal (K, sigma): only sigma_1^2/k_1 enters
  const FhnParams p{0.7, 0.4, 3.0};
  Vec k = v2(1.5, 0.6);
  const ModelSpec m = make_fhn_model(p, 0.35, 0.9, 0.05, k);
  const EffectiveField ef(m, 2);
  double worst = 0.0;
  for (int i = 0; i <= 100; ++i)
    for (int j = 0; j <= 100; ++j) {
      const Vec z = v2(-3.0 + 0.06 * i, -3.0 + 0.06 * j);
      worst = std::max(worst, (ef.drift(z) - effective_drift_fhn_closed(z, p, m.ratio(0))).cwiseAbs().maxCoeff());
    }
  EXPECT_LE(worst, 1e-10);
}

TEST(EffectiveJacobian, ClosedFormAndQuadrature) {
  Mat expect(2, 2);
  expect << 0.8, -1.0, 0.1, -0.1;
  EXPECT_NEAR((effective_jacobian_fhn_closed(v2(0, 0), FhnParams{}, 0.2) - expect).norm(), 0.0, 1e-15);
  const ModelSpec m = make_fhn_model();
  const Vec z = v2(-0.8, -0.47);
  for (int order : {3, 8, 20})
    EXPECT_LE((effective_jacobian(z, m, order) - effective_jacobian_fhn_closed(z, FhnParams{}, 0.2)).cwiseAbs().maxCoeff(),
              1e-10);
}

TEST(EffectiveJacobian, MatchesDifferencesOfDrift) {
  const ModelSpec m = make_fhn_model(FhnParams{}, 0.2, 0.2);
  const EffectiveField ef(m);
  const double h = 1e-5;
  for (const Vec& z : {v2(0.3, 0.2), v2(-1.7, 0.9), v2(2.2, -2.0)}) {
    const Mat j = ef.jacobian(z);
    for (int c = 0; c < 2; ++c) {
      Vec e = Vec::Zero(2);
      e(c) = h;
      EXPECT_LE(((ef.drift(z + e) - ef.drift(z - e)) / (2 * h) - j.col(c)).cwiseAbs().maxCoeff(), 1e-6);
    }
  }
}

TEST(EffectiveDrift, ExplosiveDriftIsReported) {
  const DriftField boom = DriftField::custom(1, [](std::span<const double> x, std::span<double> out) {
    out[0] = std::exp(x[0] * x[0] * 1e3);
  });
  const ModelSpec m = with_drift(boom, Vec::Ones(1), Vec::Ones(1));
  try {
    effective_drift(Vec::Zero(1), m, 20);
    FAIL() << "expected an overflow error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::numerical);
  }
}

TEST(ModelSpec, Validation) {
  ModelSpec m = make_fhn_model();
  m.delta = -1.0;
  EXPECT_THROW(m.validate(), Error);
  EXPECT_THROW(make_fhn_model(FhnParams{}, 0.0), Error);
  EXPECT_THROW(DiagonalMatrix(v2(1.0, 0.0)), Error);
}
