#pragma once

// Weighted Hermite-spectral calculus: the orthonormal basis psi_{l,theta} of
// L^2(w_theta), truncated H^r_theta / H^{-r}_theta norms, derivative shifts,
// the Ornstein–Uhlenbeck generator seen across two weights, and its semigroup.
//
// Coefficient vectors are indexed by multi-indices l in N^d with |l| <= N_max
// in graded order: total degree ascending, then l lexicographically descending.

#include "mvosc/core.hpp"
#include "mvosc/model.hpp"
#include "mvosc/quadrature.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <memory>
#include <ostream>
#include <sstream>
#include <unordered_map>
#include <vector>

namespace mvosc {

/// Renormalized Hermite polynomial h_n, orthonormal for exp(-x^2/2)dx.
/// Uses x h_{n-1} = sqrt(n) h_n + sqrt(n-1) h_{n-2}.
inline double hermite_eval(int n, double x) {
  require(n >= 0, ErrorKind::invalid_parameter, "Hermite degree must be >= 0");
  const double h0 = std::pow(2.0 * kPi, -0.25);
  if (n == 0) return h0;
  double prev = h0, cur = x * h0;
  for (int j = 2; j <= n; ++j) {
    const double next = (x * cur - std::sqrt(j - 1.0) * prev) / std::sqrt(static_cast<double>(j));
    prev = cur;
    cur = next;
  }
  return cur;
}

/// h_0(x), ..., h_nmax(x) into out[0..nmax].
inline void hermite_all(int nmax, double x, double* out) {
  out[0] = std::pow(2.0 * kPi, -0.25);
  if (nmax >= 1) out[1] = x * out[0];
  for (int j = 2; j <= nmax; ++j)
    out[j] = (x * out[j - 1] - std::sqrt(j - 1.0) * out[j - 2]) / std::sqrt(static_cast<double>(j));
}

using MultiIndex = std::vector<int>;

inline int total_degree(const MultiIndex& l) {
  int s = 0;
  for (int v : l) s += v;
  return s;
}

/// All multi-indices with |l| <= n_max, in graded order.
class MultiIndexSet {
 public:
  MultiIndexSet(int d, int n_max) : d_(d), n_max_(n_max) {
    require(d >= 1, ErrorKind::invalid_parameter, "dimension must be >= 1");
    require(n_max >= 0, ErrorKind::invalid_parameter, "truncation degree must be >= 0");
    MultiIndex l(d, 0);
    for (int deg = 0; deg <= n_max; ++deg) emit(0, deg, l);
    for (int p = 0; p < size(); ++p) lookup_.emplace(key(list_[p]), p);
  }

  int dim() const { return d_; }
  int n_max() const { return n_max_; }
  int size() const { return static_cast<int>(list_.size()); }
  const MultiIndex& operator[](int p) const { return list_[p]; }

  /// Position of l, or -1 when l has a negative entry or exceeds the truncation.
  int find(const MultiIndex& l) const {
    int deg = 0;
    for (int v : l) {
      if (v < 0) return -1;
      deg += v;
    }
    if (deg > n_max_) return -1;
    auto it = lookup_.find(key(l));
    return it == lookup_.end() ? -1 : it->second;
  }

  /// Position of l + shift * e_i, or -1.
  int shifted(int p, int i, int shift) const {
    MultiIndex l = list_[p];
    l[i] += shift;
    return find(l);
  }

 private:
  void emit(int i, int remaining, MultiIndex& l) {
    if (i == d_ - 1) {
      l[i] = remaining;
      list_.push_back(l);
      return;
    }
    for (int v = remaining; v >= 0; --v) {
      l[i] = v;
      emit(i + 1, remaining - v, l);
    }
  }

  std::uint64_t key(const MultiIndex& l) const {
    std::uint64_t k = 0;
    for (int v : l) k = k * static_cast<std::uint64_t>(n_max_ + 1) + static_cast<std::uint64_t>(v);
    return k;
  }

  int d_;
  int n_max_;
  std::vector<MultiIndex> list_;
  std::unordered_map<std::uint64_t, int> lookup_;
};

/// binomial(n_max + d, d)
inline long multi_index_count(int d, int n_max) {
  long r = 1;
  for (int j = 1; j <= d; ++j) r = r * (n_max + j) / j;
  return r;
}

inline std::shared_ptr<const MultiIndexSet> make_index_set(int d, int n_max) {
  return std::make_shared<const MultiIndexSet>(d, n_max);
}

/// Per-coordinate argument scale sqrt(theta k_i / sigma_i^2) of psi_{l,theta}.
inline Vec basis_scales(double theta, const ModelSpec& model) {
  Vec s(model.d);
  for (int i = 0; i < model.d; ++i) s(i) = std::sqrt(theta * model.k[i]) / model.sigma[i];
  return s;
}

/// psi_{l,theta}(x) = prod_i h_{l_i}(sqrt(theta k_i/sigma_i^2) x_i)
inline double basis_eval(const MultiIndex& l, double theta, const ModelSpec& model, const Vec& x) {
  require(static_cast<int>(l.size()) == model.d && x.size() == model.d, ErrorKind::invalid_parameter,
          "multi-index and point must have dimension d");
  double v = 1.0;
  for (int i = 0; i < model.d; ++i) {
    require(l[i] >= 0, ErrorKind::invalid_parameter, "multi-index entries must be >= 0");
    v *= hermite_eval(l[i], std::sqrt(theta * model.k[i]) / model.sigma[i] * x(i));
  }
  return v;
}

/// lambda_l = theta sum_i k_i l_i
inline double ou_eigenvalue(const MultiIndex& l, double theta, const DiagonalMatrix& k) {
  double s = 0.0;
  for (std::size_t i = 0; i < l.size(); ++i) s += k[static_cast<int>(i)] * l[i];
  return theta * s;
}

/// Values of every basis function at every point: rows = modes, cols = points.
inline Mat basis_table(const MultiIndexSet& idx, const Vec& scales, const Mat& points) {
  const int d = idx.dim(), n = idx.n_max();
  const long np = points.rows();
  Mat table(idx.size(), np);
  std::vector<double> h(static_cast<std::size_t>(d) * (n + 1));
  for (long j = 0; j < np; ++j) {
    for (int i = 0; i < d; ++i) hermite_all(n, scales(i) * points(j, i), &h[static_cast<std::size_t>(i) * (n + 1)]);
    for (int p = 0; p < idx.size(); ++p) {
      double v = 1.0;
      for (int i = 0; i < d; ++i) v *= h[static_cast<std::size_t>(i) * (n + 1) + idx[p][i]];
      table(p, j) = v;
    }
  }
  return table;
}

enum class Side { function, distribution };

/// Truncated coefficient vector in the basis psi_{l,theta}.
/// Function side: f = sum_l f_l psi_l. Distribution side: c_l = <u, psi_l>
/// under the flat pairing, equivalently u = sum_l c_l psi_l w_theta.
struct SpectralCoeffs {
  double theta = 1.0;
  Side side = Side::function;
  std::shared_ptr<const MultiIndexSet> indices;
  Vec coeffs;
  Vec k;
  Vec sigma;
  bool top_degree_incomplete = false;

  static SpectralCoeffs zeros(double theta, Side side, std::shared_ptr<const MultiIndexSet> indices,
                              const ModelSpec& model) {
    require(theta > 0.0, ErrorKind::invalid_parameter, "theta must be > 0");
    require(indices && indices->dim() == model.d, ErrorKind::invalid_parameter, "index set dimension mismatch");
    SpectralCoeffs c;
    c.theta = theta;
    c.side = side;
    c.indices = std::move(indices);
    c.coeffs = Vec::Zero(c.indices->size());
    c.k = model.k.entries();
    c.sigma = model.sigma.entries();
    return c;
  }

  int trunc() const { return indices->n_max(); }
  int dim() const { return indices->dim(); }
  int size() const { return static_cast<int>(coeffs.size()); }

  double eigenvalue(int p) const {
    double s = 0.0;
    for (int i = 0; i < dim(); ++i) s += k(i) * (*indices)[p][i];
    return theta * s;
  }
  double a_theta() const { return theta * k.sum(); }
};

struct SobolevParams {
  double r = 0.0;
  double theta = 1.0;
  double a_theta = 0.0;

  static SobolevParams make(double r, double theta, const DiagonalMatrix& k) {
    require(r >= 0.0, ErrorKind::invalid_parameter, "Sobolev order r must be >= 0");
    require(theta > 0.0, ErrorKind::invalid_parameter, "theta must be > 0");
    return SobolevParams{r, theta, theta * k.trace()};
  }
};

/// Diagonal weights (a_theta + lambda_l)^power over an index set.
inline Vec sobolev_weights(const MultiIndexSet& idx, double theta, const Vec& k, double power) {
  const double a = theta * k.sum();
  Vec w(idx.size());
  for (int p = 0; p < idx.size(); ++p) {
    double lam = 0.0;
    for (int i = 0; i < idx.dim(); ++i) lam += k(i) * idx[p][i];
    w(p) = std::pow(a + theta * lam, power);
  }
  return w;
}

/// Function side: sqrt(sum (a+lambda_l)^r f_l^2); distribution side uses the
/// exponent -r (dual norm on the same truncation).
inline double sobolev_norm(const SpectralCoeffs& c, const SobolevParams& params) {
  require(c.theta == params.theta, ErrorKind::invalid_parameter, "theta mismatch between coefficients and norm");
  const double power = c.side == Side::function ? params.r : -params.r;
  const Vec w = sobolev_weights(*c.indices, c.theta, c.k, power);
  return std::sqrt((w.array() * c.coeffs.array().square()).sum());
}

/// Coefficients of d/dx_i f, using d/dx_i psi_l = sqrt(l_i theta k_i/sigma_i^2) psi_{l - e_i}.
inline SpectralCoeffs derivative_shift(const SpectralCoeffs& c, int i) {
  require(c.side == Side::function, ErrorKind::contract_violation, "derivative_shift needs function-side coefficients");
  require(i >= 0 && i < c.dim(), ErrorKind::invalid_parameter, "coordinate out of range");
  SpectralCoeffs out = c;
  out.coeffs.setZero();
  const double s2 = c.theta * c.k(i) / (c.sigma(i) * c.sigma(i));
  const auto& idx = *c.indices;
  for (int p = 0; p < idx.size(); ++p) {
    const int up = idx.shifted(p, i, +1);
    if (up < 0) continue;
    out.coeffs(p) = std::sqrt((idx[p][i] + 1) * s2) * c.coeffs(up);
  }
  // the top-degree shell would need modes beyond the truncation
  out.top_degree_incomplete = true;
  return out;
}

/// Constants of  C1 (|u|_r^2 + sum_i |d_i u|_r^2) <= |u|_{r+1}^2 <= C2 (...).
struct NormEquivalence {
  double lower = 0.0;
  double upper = 0.0;
};

inline NormEquivalence norm_equivalence_constants(double theta, double r, const ModelSpec& model) {
  const double a = theta * model.k.trace();
  const double smin2 = model.sigma.min() * model.sigma.min();
  const double smax2 = model.sigma.max() * model.sigma.max();
  NormEquivalence c;
  c.lower = std::min(smin2, a);
  c.upper = std::max(smax2 * std::pow((a + theta * model.k.max()) / a, r), a);
  return c;
}

/// Matrix of L*_{theta'} on the basis psi_{l,theta}: entry (m, l) is the
/// coefficient of psi_m in L*_{theta'} psi_l. Nonzero only on the diagonal,
/// -lambda_{theta',l}, and at m = l - 2 e_i, -(theta'-theta) k_i sqrt(l_i(l_i-1)).
/// Graded order makes it upper triangular; the transpose drives distributions.
struct GeneratorMatrix {
  double theta = 1.0;
  double theta_prime = 1.0;
  int trunc = 0;
  std::shared_ptr<const MultiIndexSet> indices;
  Mat matrix;

  bool matched() const { return theta == theta_prime; }
};

inline GeneratorMatrix cross_weight_generator(double theta, double theta_prime, int trunc, const ModelSpec& model) {
  require(theta > 0.0, ErrorKind::invalid_parameter, "theta must be > 0");
  require(theta <= theta_prime, ErrorKind::invalid_parameter,
          "unsupported regime: the cross-weight generator needs theta <= theta'");
  GeneratorMatrix g;
  g.theta = theta;
  g.theta_prime = theta_prime;
  g.trunc = trunc;
  g.indices = make_index_set(model.d, trunc);
  const auto& idx = *g.indices;
  g.matrix = Mat::Zero(idx.size(), idx.size());
  for (int p = 0; p < idx.size(); ++p) {
    g.matrix(p, p) = -ou_eigenvalue(idx[p], theta_prime, model.k);
    if (theta_prime == theta) continue;
    for (int i = 0; i < model.d; ++i) {
      const int li = idx[p][i];
      if (li < 2) continue;
      const int low = idx.shifted(p, i, -2);
      g.matrix(low, p) = -(theta_prime - theta) * model.k[i] * std::sqrt(static_cast<double>(li) * (li - 1));
    }
  }
  return g;
}

/// Eigenvalues of the truncated generator. The matrix is checked to be exactly
/// triangular, so the spectrum is its diagonal.
inline Vec generator_eigenvalues(const GeneratorMatrix& g) {
  const long n = g.matrix.rows();
  for (long r = 0; r < n; ++r)
    for (long c = 0; c < r; ++c)
      require(g.matrix(r, c) == 0.0, ErrorKind::numerical, "generator matrix is not upper triangular");
  return g.matrix.diagonal();
}

/// e^{tL} on distributions (e^{tL*} on functions). Matched weights scale each
/// mode by exp(-lambda_l t); otherwise a dense scaling-and-squaring Padé
/// exponential is used.
inline SpectralCoeffs semigroup_apply(const SpectralCoeffs& c, double t, const GeneratorMatrix& g) {
  require(t >= 0.0, ErrorKind::invalid_parameter, "semigroup time must be >= 0");
  require(c.theta == g.theta && c.trunc() == g.trunc, ErrorKind::invalid_parameter,
          "coefficients and generator must share theta and truncation");
  SpectralCoeffs out = c;
  if (t == 0.0) return out;
  if (g.matched()) {
    for (int p = 0; p < c.size(); ++p) out.coeffs(p) = std::exp(g.matrix(p, p) * t) * c.coeffs(p);
    return out;
  }
  const Mat a = c.side == Side::distribution ? Mat(t * g.matrix.transpose()) : Mat(t * g.matrix);
  const Mat e = a.exp();
  out.coeffs = e * c.coeffs;
  return out;
}

/// Gauss–Hermite integration against w_theta (or its normalized version).
template <typename G>
double gh_quadrature(const G& g, double theta, const ModelSpec& model, int order, bool normalized = false) {
  require(order >= 1, ErrorKind::invalid_parameter, "quadrature order must be >= 1");
  const TensorRule rule = make_tensor_rule(basis_scales(theta, model), order);
  const double v = integrate(rule, g);
  return normalized ? v / rule.total_weight() : v;
}

/// CSV layout: a '#' header with theta, N_max, side, K, sigma; a column line;
/// one row per multi-index with l_1..l_d, re, im (always 0).
inline void write_coeffs_csv(std::ostream& os, const SpectralCoeffs& c) {
  const int d = c.dim();
  os << "# theta=" << std::setprecision(17) << c.theta << " n_max=" << c.trunc()
     << " side=" << (c.side == Side::function ? "function" : "distribution") << " K=";
  for (int i = 0; i < d; ++i) os << (i ? ";" : "") << c.k(i);
  os << " sigma=";
  for (int i = 0; i < d; ++i) os << (i ? ";" : "") << c.sigma(i);
  os << "\n";
  for (int i = 0; i < d; ++i) os << "l_" << (i + 1) << ",";
  os << "re,im\n";
  os << std::scientific << std::setprecision(11);
  for (int p = 0; p < c.size(); ++p) {
    for (int i = 0; i < d; ++i) os << (*c.indices)[p][i] << ",";
    os << c.coeffs(p) << "," << 0.0 << "\n";
  }
}

inline SpectralCoeffs read_coeffs_csv(std::istream& is) {
  std::string header;
  std::getline(is, header);
  require(header.rfind("#", 0) == 0, ErrorKind::io, "coefficient CSV must start with a '#' header");
  auto field = [&](const std::string& name) {
    const auto pos = header.find(name + "=");
    require(pos != std::string::npos, ErrorKind::io, "missing header field " + name);
    const auto start = pos + name.size() + 1;
    return header.substr(start, header.find(' ', start) - start);
  };
  auto split = [](const std::string& s, char sep) {
    std::vector<double> v;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, sep)) v.push_back(std::stod(tok));
    return v;
  };
  SpectralCoeffs c;
  c.theta = std::stod(field("theta"));
  const int n_max = std::stoi(field("n_max"));
  c.side = field("side") == "function" ? Side::function : Side::distribution;
  const auto kv = split(field("K"), ';');
  const auto sv = split(field("sigma"), ';');
  const int d = static_cast<int>(kv.size());
  require(d >= 1 && static_cast<int>(sv.size()) == d, ErrorKind::io, "malformed K/sigma header");
  c.k = Eigen::Map<const Vec>(kv.data(), d);
  c.sigma = Eigen::Map<const Vec>(sv.data(), d);
  c.indices = make_index_set(d, n_max);
  c.coeffs = Vec::Zero(c.indices->size());
  std::string line;
  std::getline(is, line);  // column names
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto v = split(line, ',');
    require(static_cast<int>(v.size()) == d + 2, ErrorKind::io, "malformed coefficient row: " + line);
    MultiIndex l(d);
    for (int i = 0; i < d; ++i) l[i] = static_cast<int>(v[i]);
    const int p = c.indices->find(l);
    require(p >= 0, ErrorKind::io, "multi-index outside truncation in row: " + line);
    c.coeffs(p) = v[d];
  }
  return c;
}

}  // namespace mvosc
