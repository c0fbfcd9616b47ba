#pragma once

// Mean-field model family: local drift, interaction and noise matrices,
// the Gaussian reference profile and the Gaussian-smoothed drift that
// drives the slow mean dynamics.

#include "mvosc/core.hpp"
#include "mvosc/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace mvosc {

/// Diagonal matrix with strictly positive entries (K or sigma).
class DiagonalMatrix {
 public:
  DiagonalMatrix() = default;
  explicit DiagonalMatrix(Vec entries) : entries_(std::move(entries)) {
    require(entries_.size() >= 1, ErrorKind::invalid_parameter, "diagonal matrix must be non-empty");
    for (int i = 0; i < entries_.size(); ++i)
      require(std::isfinite(entries_(i)) && entries_(i) > 0.0, ErrorKind::invalid_parameter,
              "diagonal entries must be finite and strictly positive");
  }
  static DiagonalMatrix constant(int d, double v) { return DiagonalMatrix(Vec::Constant(d, v)); }

  int size() const { return static_cast<int>(entries_.size()); }
  double operator[](int i) const { return entries_(i); }
  const Vec& entries() const { return entries_; }
  double trace() const { return entries_.sum(); }
  double min() const { return entries_.minCoeff(); }
  double max() const { return entries_.maxCoeff(); }

 private:
  Vec entries_;
};

struct FhnParams {
  double a = 1.0 / 3.0;
  double b = 1.0;
  double c = 10.0;
};

/// x -> (x1 - x1^3/3 - x2, (x1 + a - b x2)/c).
inline Vec fhn_drift(const Vec& x, const FhnParams& p) {
  require(p.c != 0.0, ErrorKind::invalid_parameter, "FitzHugh-Nagumo parameter c must be nonzero");
  require(x.size() == 2, ErrorKind::invalid_parameter, "FitzHugh-Nagumo drift is two-dimensional");
  Vec out(2);
  out(0) = x(0) - x(0) * x(0) * x(0) / 3.0 - x(1);
  out(1) = (x(0) + p.a - p.b * x(1)) / p.c;
  return out;
}

/// Smooth non-increasing bump: 1 on [0,1], 0 on [2,inf), quintic in between
/// with vanishing first and second derivatives at both junctions.
inline double cutoff_profile(double t) {
  if (t <= 1.0) return 1.0;
  if (t >= 2.0) return 0.0;
  const double s = t - 1.0;
  return 1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
}

inline double cutoff_profile_derivative(double t) {
  if (t <= 1.0 || t >= 2.0) return 0.0;
  const double s = t - 1.0;
  return -30.0 * s * s * (1.0 - s) * (1.0 - s);
}

/// Local drift F: R^d -> R^d. Evaluation works on raw spans so the particle
/// and quadrature kernels can call it without allocating.
class DriftField {
 public:
  enum class Kind { fhn, cutoff, custom };

  using Eval = std::function<void(std::span<const double>, std::span<double>)>;
  /// Jacobian written row-major: J[r * d + c] = dF_r / dx_c.
  using JacobianEval = std::function<void(std::span<const double>, std::span<double>)>;

  static DriftField fhn(const FhnParams& p) {
    require(p.c != 0.0, ErrorKind::invalid_parameter, "FitzHugh-Nagumo parameter c must be nonzero");
    DriftField f;
    f.kind_ = Kind::fhn;
    f.dim_ = 2;
    f.fhn_ = p;
    return f;
  }

  /// Custom drift; a missing Jacobian selects central finite differences.
  static DriftField custom(int dim, Eval eval, JacobianEval jacobian = {}, bool bounded = false,
                           std::string name = "custom") {
    require(dim >= 1, ErrorKind::invalid_parameter, "drift dimension must be >= 1");
    require(static_cast<bool>(eval), ErrorKind::invalid_parameter, "custom drift needs an evaluator");
    DriftField f;
    f.kind_ = Kind::custom;
    f.dim_ = dim;
    f.eval_ = std::move(eval);
    f.jac_ = std::move(jacobian);
    f.bounded_ = bounded;
    f.name_ = std::move(name);
    return f;
  }

  static DriftField zero(int dim) {
    return custom(
        dim, [](std::span<const double>, std::span<double> out) { std::fill(out.begin(), out.end(), 0.0); },
        [](std::span<const double>, std::span<double> j) { std::fill(j.begin(), j.end(), 0.0); }, true,
        "zero");
  }

  static DriftField linear(const Mat& a) {
    require(a.rows() == a.cols(), ErrorKind::invalid_parameter, "linear drift needs a square matrix");
    const int d = static_cast<int>(a.rows());
    return custom(
        d,
        [a, d](std::span<const double> x, std::span<double> out) {
          for (int r = 0; r < d; ++r) {
            double s = 0.0;
            for (int c = 0; c < d; ++c) s += a(r, c) * x[c];
            out[r] = s;
          }
        },
        [a, d](std::span<const double>, std::span<double> j) {
          for (int r = 0; r < d; ++r)
            for (int c = 0; c < d; ++c) j[r * d + c] = a(r, c);
        },
        false, "linear");
  }

  Kind kind() const { return kind_; }
  int dim() const { return dim_; }
  bool bounded_with_derivatives() const { return bounded_; }
  bool has_analytic_jacobian() const { return kind_ != Kind::custom || static_cast<bool>(jac_); }
  const FhnParams& fhn_params() const { return fhn_; }
  double cutoff_epsilon() const { return eps_; }
  const DriftField* inner() const { return inner_.get(); }

  std::string name() const {
    switch (kind_) {
      case Kind::fhn: return "fhn";
      case Kind::cutoff: return "cutoff_" + inner_->name();
      case Kind::custom: return name_;
    }
    return name_;
  }

  void eval(std::span<const double> x, std::span<double> out) const {
    switch (kind_) {
      case Kind::fhn: {
        const double x0 = x[0], x1 = x[1];
        out[0] = x0 - x0 * x0 * x0 / 3.0 - x1;
        out[1] = (x0 + fhn_.a - fhn_.b * x1) / fhn_.c;
        return;
      }
      case Kind::cutoff: {
        const double psi = cutoff_profile(eps_ * norm(x));
        if (psi == 0.0) {
          std::fill(out.begin(), out.end(), 0.0);
          return;
        }
        inner_->eval(x, out);
        if (psi != 1.0)
          for (auto& v : out) v *= psi;
        return;
      }
      case Kind::custom:
        eval_(x, out);
        return;
    }
  }

  void jacobian(std::span<const double> x, std::span<double> j) const {
    const int d = dim_;
    switch (kind_) {
      case Kind::fhn: {
        j[0] = 1.0 - x[0] * x[0];
        j[1] = -1.0;
        j[2] = 1.0 / fhn_.c;
        j[3] = -fhn_.b / fhn_.c;
        return;
      }
      case Kind::cutoff: {
        const double r = norm(x);
        const double psi = cutoff_profile(eps_ * r);
        if (psi == 0.0) {
          std::fill(j.begin(), j.end(), 0.0);
          return;
        }
        inner_->jacobian(x, j);
        for (auto& v : j) v *= psi;
        const double dpsi = cutoff_profile_derivative(eps_ * r);
        if (dpsi != 0.0 && r > 0.0) {
          std::vector<double> f(d);
          inner_->eval(x, f);
          for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) j[a * d + b] += f[a] * dpsi * eps_ * x[b] / r;
        }
        return;
      }
      case Kind::custom:
        if (jac_) {
          jac_(x, j);
        } else {
          finite_difference_jacobian(x, j);
        }
        return;
    }
  }

  /// Second derivative D^2F(x)[n1, n2].
  void second_derivative(std::span<const double> x, std::span<const double> n1, std::span<const double> n2,
                         std::span<double> out) const {
    const int d = dim_;
    if (kind_ == Kind::fhn) {
      out[0] = -2.0 * x[0] * n1[0] * n2[0];
      out[1] = 0.0;
      return;
    }
    // central differences of the Jacobian along n2
    double nn = 0.0, xn = 0.0;
    for (int i = 0; i < d; ++i) {
      nn = std::max(nn, std::abs(n2[i]));
      xn = std::max(xn, std::abs(x[i]));
    }
    std::fill(out.begin(), out.end(), 0.0);
    if (nn == 0.0) return;
    const double h = std::cbrt(std::numeric_limits<double>::epsilon()) * (1.0 + xn) / nn;
    std::vector<double> xp(d), xm(d), jp(d * d), jm(d * d);
    for (int i = 0; i < d; ++i) {
      xp[i] = x[i] + h * n2[i];
      xm[i] = x[i] - h * n2[i];
    }
    jacobian(xp, jp);
    jacobian(xm, jm);
    for (int a = 0; a < d; ++a) {
      double s = 0.0;
      for (int b = 0; b < d; ++b) s += (jp[a * d + b] - jm[a * d + b]) * n1[b];
      out[a] = s / (2.0 * h);
    }
  }

  Vec operator()(const Vec& x) const {
    Vec out(dim_);
    eval(std::span<const double>(x.data(), x.size()), std::span<double>(out.data(), out.size()));
    return out;
  }

  Mat jacobian(const Vec& x) const {
    std::vector<double> j(dim_ * dim_);
    jacobian(std::span<const double>(x.data(), x.size()), j);
    Mat out(dim_, dim_);
    for (int a = 0; a < dim_; ++a)
      for (int b = 0; b < dim_; ++b) out(a, b) = j[a * dim_ + b];
    return out;
  }

  friend DriftField cutoff_drift(const DriftField& f, double epsilon);

 private:
  static double norm(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::sqrt(s);
  }

  // h = cbrt(eps) * (1 + |x_c|) per coordinate
  void finite_difference_jacobian(std::span<const double> x, std::span<double> j) const {
    const int d = dim_;
    std::vector<double> xp(x.begin(), x.end()), fp(d), fm(d);
    const double base = std::cbrt(std::numeric_limits<double>::epsilon());
    for (int c = 0; c < d; ++c) {
      const double h = base * (1.0 + std::abs(x[c]));
      xp[c] = x[c] + h;
      eval_(xp, fp);
      xp[c] = x[c] - h;
      eval_(xp, fm);
      xp[c] = x[c];
      for (int r = 0; r < d; ++r) j[r * d + c] = (fp[r] - fm[r]) / (2.0 * h);
    }
  }

  Kind kind_ = Kind::custom;
  int dim_ = 0;
  FhnParams fhn_{};
  double eps_ = 0.0;
  std::shared_ptr<const DriftField> inner_;
  Eval eval_;
  JacobianEval jac_;
  bool bounded_ = false;
  std::string name_ = "custom";
};

/// x -> F(x) psi(eps |x|). The result is bounded with bounded derivatives.
inline DriftField cutoff_drift(const DriftField& f, double epsilon) {
  require(epsilon > 0.0 && std::isfinite(epsilon), ErrorKind::invalid_parameter, "cutoff epsilon must be > 0");
  DriftField out;
  out.kind_ = DriftField::Kind::cutoff;
  out.dim_ = f.dim();
  out.eps_ = epsilon;
  out.inner_ = std::make_shared<const DriftField>(f);
  out.bounded_ = true;
  return out;
}

struct ModelSpec {
  int d = 2;
  DiagonalMatrix k;
  DiagonalMatrix sigma;
  double delta = 0.05;
  DriftField drift;

  void validate() const {
    require(d >= 1, ErrorKind::invalid_parameter, "dimension d must be >= 1");
    require(k.size() == d && sigma.size() == d, ErrorKind::invalid_parameter,
            "K and sigma must have d diagonal entries");
    require(std::isfinite(delta) && delta >= 0.0, ErrorKind::invalid_parameter, "delta must be >= 0");
    require(drift.dim() == d, ErrorKind::invalid_parameter, "drift dimension must equal d");
  }

  /// sigma_i^2 / k_i
  double ratio(int i) const { return sigma[i] * sigma[i] / k[i]; }
};

/// FitzHugh–Nagumo model with noise-to-interaction ratios sigma_i^2/k_i.
inline ModelSpec make_fhn_model(const FhnParams& p = {}, double ratio1 = 0.2, double ratio2 = 0.2,
                                double delta = 0.05, Vec k = Vec::Ones(2)) {
  require(ratio1 > 0.0 && ratio2 > 0.0, ErrorKind::invalid_parameter,
          "noise ratios must be > 0 (use effective_drift_fhn_closed for ratio 0)");
  ModelSpec m;
  m.d = 2;
  m.k = DiagonalMatrix(k);
  Vec s(2);
  s << std::sqrt(ratio1 * k(0)), std::sqrt(ratio2 * k(1));
  m.sigma = DiagonalMatrix(s);
  m.delta = delta;
  m.drift = DriftField::fhn(p);
  m.validate();
  return m;
}

struct GaussianRef {
  Vec variance;
  double normalization = 1.0;

  double density(const Vec& x) const {
    double q = 0.0;
    for (int i = 0; i < x.size(); ++i) q += x(i) * x(i) / variance(i);
    return std::exp(-0.5 * q) / normalization;
  }
};

inline GaussianRef gaussian_ref(const ModelSpec& model) {
  model.validate();
  GaussianRef g;
  g.variance.resize(model.d);
  g.normalization = 1.0;
  for (int i = 0; i < model.d; ++i) {
    g.variance(i) = model.sigma[i] * model.sigma[i] / model.k[i];
    g.normalization *= std::sqrt(2.0 * kPi * g.variance(i));
  }
  return g;
}

inline constexpr int kDefaultEffectiveQuadOrder = 20;

/// Gaussian-smoothed drift z -> <F_z, rho> and its Jacobian, evaluated with a
/// tensorized Gauss–Hermite rule adapted to rho. The node table is built once.
class EffectiveField {
 public:
  EffectiveField(const ModelSpec& model, int quad_order = kDefaultEffectiveQuadOrder) : drift_(model.drift) {
    model.validate();
    require(quad_order >= 1, ErrorKind::invalid_parameter, "quad_order must be >= 1");
    const GaussianRef g = gaussian_ref(model);
    Vec scale = g.variance.cwiseSqrt().cwiseInverse();
    rule_ = make_tensor_rule(scale, quad_order);
    rule_.weights /= g.normalization;
    d_ = model.d;
  }

  int dim() const { return d_; }

  Vec drift(const Vec& z) const {
    Vec acc = Vec::Zero(d_);
    std::vector<double> x(d_), f(d_);
    for (int j = 0; j < rule_.size(); ++j) {
      for (int i = 0; i < d_; ++i) x[i] = rule_.nodes(j, i) + z(i);
      drift_.eval(x, f);
      for (int i = 0; i < d_; ++i) acc(i) += rule_.weights(j) * f[i];
    }
    check_finite(acc, z, "effective drift");
    return acc;
  }

  Mat jacobian(const Vec& z) const {
    Mat acc = Mat::Zero(d_, d_);
    std::vector<double> x(d_), jac(d_ * d_);
    for (int j = 0; j < rule_.size(); ++j) {
      for (int i = 0; i < d_; ++i) x[i] = rule_.nodes(j, i) + z(i);
      drift_.jacobian(x, jac);
      for (int a = 0; a < d_; ++a)
        for (int b = 0; b < d_; ++b) acc(a, b) += rule_.weights(j) * jac[a * d_ + b];
    }
    check_finite(acc.reshaped(), z, "effective Jacobian");
    return acc;
  }

 private:
  static void check_finite(const auto& v, const Vec& z, const char* what) {
    if (!v.allFinite()) {
      std::ostringstream os;
      os << what << " overflowed (NaN/Inf) at z=(" << z.transpose() << ")";
      fail(ErrorKind::numerical, os.str());
    }
  }

  DriftField drift_;
  TensorRule rule_;
  int d_ = 0;
};

inline Vec effective_drift(const Vec& z, const ModelSpec& model, int quad_order = kDefaultEffectiveQuadOrder) {
  return EffectiveField(model, quad_order).drift(z);
}

inline Mat effective_jacobian(const Vec& z, const ModelSpec& model, int quad_order = kDefaultEffectiveQuadOrder) {
  return EffectiveField(model, quad_order).jacobian(z);
}

/// Closed form of <F_z, rho> for the FitzHugh–Nagumo drift; ratio1 = sigma_1^2/k_1.
inline Vec effective_drift_fhn_closed(const Vec& z, const FhnParams& p, double ratio1) {
  require(p.c != 0.0, ErrorKind::invalid_parameter, "FitzHugh-Nagumo parameter c must be nonzero");
  Vec out(2);
  out(0) = (1.0 - ratio1) * z(0) - z(0) * z(0) * z(0) / 3.0 - z(1);
  out(1) = (z(0) + p.a - p.b * z(1)) / p.c;
  return out;
}

inline Mat effective_jacobian_fhn_closed(const Vec& z, const FhnParams& p, double ratio1) {
  Mat j(2, 2);
  j << (1.0 - ratio1) - z(0) * z(0), -1.0, 1.0 / p.c, -p.b / p.c;
  return j;
}

}  // namespace mvosc
