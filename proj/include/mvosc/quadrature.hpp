#pragma once

// Gauss–Hermite rules for Gaussian-weighted integrals on R^d.

#include "mvosc/core.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>

namespace mvosc {

/// One-dimensional rule for the weight exp(-y^2/2). Weights sum to sqrt(2*pi).
struct GaussHermite1D {
  Vec nodes;
  Vec weights;
};

/// Golub–Welsch: eigen-decomposition of the Jacobi matrix of the
/// probabilists' Hermite recurrence y He_n = He_{n+1} + n He_{n-1}.
inline GaussHermite1D make_gauss_hermite(int order) {
  require(order >= 1, ErrorKind::invalid_parameter, "quadrature order must be >= 1");
  GaussHermite1D rule;
  if (order == 1) {
    rule.nodes = Vec::Zero(1);
    rule.weights = Vec::Constant(1, std::sqrt(2.0 * kPi));
    return rule;
  }
  Vec diag = Vec::Zero(order);
  Vec sub(order - 1);
  for (int k = 1; k < order; ++k) sub(k - 1) = std::sqrt(static_cast<double>(k));
  Eigen::SelfAdjointEigenSolver<Mat> es;
  es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  require(es.info() == Eigen::Success, ErrorKind::numerical, "Golub-Welsch eigensolver failed");
  rule.nodes = es.eigenvalues();
  rule.weights.resize(order);
  const double mass = std::sqrt(2.0 * kPi);
  for (int j = 0; j < order; ++j) {
    const double v0 = es.eigenvectors()(0, j);
    rule.weights(j) = mass * v0 * v0;
  }
  // symmetrize: nodes come in +- pairs
  for (int j = 0; j < order / 2; ++j) {
    const int k = order - 1 - j;
    const double y = 0.5 * (rule.nodes(k) - rule.nodes(j));
    const double w = 0.5 * (rule.weights(k) + rule.weights(j));
    rule.nodes(j) = -y;
    rule.nodes(k) = y;
    rule.weights(j) = w;
    rule.weights(k) = w;
  }
  if (order % 2 == 1) rule.nodes(order / 2) = 0.0;
  return rule;
}

/// Process-wide cache; rules are immutable once built.
inline const GaussHermite1D& gauss_hermite(int order) {
  static std::mutex mutex;
  static std::map<int, std::unique_ptr<GaussHermite1D>> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto& slot = cache[order];
  if (!slot) slot = std::make_unique<GaussHermite1D>(make_gauss_hermite(order));
  return *slot;
}

/// Tensor rule approximating  int g(x) exp(-sum_i scale_i^2 x_i^2 / 2) dx.
/// Row j of `nodes` is the j-th node; coordinate i is y / scale_i.
struct TensorRule {
  Mat nodes;    // n_nodes x d
  Vec weights;  // n_nodes

  int dim() const { return static_cast<int>(nodes.cols()); }
  int size() const { return static_cast<int>(nodes.rows()); }
  double total_weight() const { return weights.sum(); }
};

inline TensorRule make_tensor_rule(const Vec& scale, int order) {
  const auto& r1 = gauss_hermite(order);
  const int d = static_cast<int>(scale.size());
  long n = 1;
  for (int i = 0; i < d; ++i) n *= order;
  TensorRule rule;
  rule.nodes.resize(n, d);
  rule.weights.resize(n);
  std::vector<int> digit(d, 0);
  for (long j = 0; j < n; ++j) {
    double w = 1.0;
    // last coordinate fastest
    long rem = j;
    for (int i = d - 1; i >= 0; --i) {
      digit[i] = static_cast<int>(rem % order);
      rem /= order;
    }
    for (int i = 0; i < d; ++i) {
      rule.nodes(j, i) = r1.nodes(digit[i]) / scale(i);
      w *= r1.weights(digit[i]) / scale(i);
    }
    rule.weights(j) = w;
  }
  return rule;
}

/// Weighted sum over the rule; a non-finite sample is an error naming the node.
template <typename G>
double integrate(const TensorRule& rule, const G& g) {
  double acc = 0.0;
  for (int j = 0; j < rule.size(); ++j) {
    const Vec x = rule.nodes.row(j).transpose();
    const double v = g(x);
    if (!std::isfinite(v)) {
      std::ostringstream os;
      os << "non-finite integrand at quadrature node " << j << " x=(";
      for (int i = 0; i < x.size(); ++i) os << (i ? "," : "") << x(i);
      os << ")";
      fail(ErrorKind::numerical, os.str());
    }
    acc += rule.weights(j) * v;
  }
  return acc;
}

}  // namespace mvosc
