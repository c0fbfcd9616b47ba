#pragma once

// Hermite–Galerkin solver for the centered system
//   d/dt p = L p + delta G1(p, m),   d/dt m = delta G2(p, m),
//   G1 = -div(p (F_m - <F_m, p>)),   G2 = <F_m, p>,   F_m(x) = F(x + m),
// where L is the Ornstein–Uhlenbeck operator div(sigma^2 grad .) + div(K x .).
//
// The density is expanded as p = sum_l c_l psi_{l,1} w_1, so L is diagonal
// with eigenvalues -lambda_l and rho is the pure l = 0 mode. All pairings with
// the nonlinearity are evaluated by Gauss–Hermite quadrature against w_1.
//
// The state is packed as u = [c_0 .. c_{n-1}, m_1 .. m_d]. Time stepping is the
// second-order exponential Runge–Kutta scheme (ETD2RK): the stiff diagonal part
// is integrated exactly and the nonlinearity through phi_1 and phi_2. Tangent
// and second-variation flows are the exact derivatives of the same discrete map.

#include "mvosc/core.hpp"
#include "mvosc/hermite.hpp"
#include "mvosc/model.hpp"
#include "mvosc/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <sstream>
#include <vector>

namespace mvosc {

struct SolverConfig {
  double dt = 0.05;
  int n_max = 16;
  int quad_order = 0;  // 0: max(ceil(1.5 n_max), n_max + 2)
  double theta = 1.0;
  double r = 2.0;      // order of the dual norm used for distances
};

struct CenteredState {
  SpectralCoeffs p;  // distribution side
  Vec m;
  double t = 0.0;
};

struct TangentState {
  SpectralCoeffs eta;  // distribution side, mass zero
  Vec n;
};

inline constexpr double kInstabilityThreshold = 1e12;

namespace detail {

// phi_1(z) = (e^z - 1)/z, phi_2(z) = (e^z - 1 - z)/z^2
inline double phi1(double z) { return z == 0.0 ? 1.0 : std::expm1(z) / z; }

inline double phi2(double z) {
  if (std::abs(z) < 0.1) {
    double term = 0.5, sum = 0.5;
    for (int k = 3; k < 16; ++k) {
      term *= z / k;
      sum += term;
    }
    return sum;
  }
  return (std::expm1(z) - z) / (z * z);
}

}  // namespace detail

class SpectralSystem {
 public:
  SpectralSystem(ModelSpec model, SolverConfig cfg) : model_(std::move(model)), cfg_(cfg) {
    model_.validate();
    require(cfg_.dt > 0.0, ErrorKind::invalid_parameter, "solver dt must be > 0");
    require(cfg_.n_max >= 1, ErrorKind::invalid_parameter, "solver n_max must be >= 1");
    require(cfg_.theta == 1.0, ErrorKind::invalid_parameter,
            "time stepping uses theta = 1; theta < 1 is available for norms only");
    require(cfg_.r >= 0.0, ErrorKind::invalid_parameter, "solver r must be >= 0");
    d_ = model_.d;
    idx_ = make_index_set(d_, cfg_.n_max);
    nm_ = idx_->size();
    quad_order_ = cfg_.quad_order > 0
                      ? cfg_.quad_order
                      : std::max(static_cast<int>(std::ceil(1.5 * cfg_.n_max)), cfg_.n_max + 2);
    scales_ = basis_scales(1.0, model_);
    rule_ = make_tensor_rule(scales_, quad_order_);
    nq_ = rule_.size();
    basis_ = basis_table(*idx_, scales_, rule_.nodes);
    grad_.assign(d_, Mat::Zero(nm_, nq_));
    for (int p = 0; p < nm_; ++p)
      for (int i = 0; i < d_; ++i) {
        const int li = (*idx_)[p][i];
        if (li == 0) continue;
        const int low = idx_->shifted(p, i, -1);
        grad_[i].row(p) = std::sqrt(li * scales_(i) * scales_(i)) * basis_.row(low);
      }
    lambda_.resize(nm_);
    for (int p = 0; p < nm_; ++p) lambda_(p) = ou_eigenvalue((*idx_)[p], 1.0, model_.k);
    mass_factor_ = 1.0;
    for (int i = 0; i < d_; ++i) mass_factor_ *= std::pow(2.0 * kPi, 0.25) / scales_(i);
    dual_weights_ = sobolev_weights(*idx_, 1.0, model_.k.entries(), -cfg_.r);
  }

  const ModelSpec& model() const { return model_; }
  const SolverConfig& config() const { return cfg_; }
  double delta() const { return model_.delta; }
  int dim() const { return d_; }
  int n_modes() const { return nm_; }
  int size() const { return nm_ + d_; }
  int quad_order() const { return quad_order_; }
  const MultiIndexSet& indices() const { return *idx_; }
  std::shared_ptr<const MultiIndexSet> index_ptr() const { return idx_; }
  const Vec& eigenvalues() const { return lambda_; }
  const TensorRule& rule() const { return rule_; }

  /// Coefficient of rho on the constant mode.
  double rho_coefficient() const { return 1.0 / mass_factor_; }
  double mass(const Vec& u) const { return u(0) * mass_factor_; }

  Vec rho_state(const Vec& m) const {
    Vec u = Vec::Zero(size());
    u(0) = rho_coefficient();
    u.tail(d_) = m;
    return u;
  }

  /// sqrt(sum (a + lambda_l)^(-r) c_l^2 + |m|^2)
  double norm(const Vec& u) const {
    return std::sqrt((dual_weights_.array() * u.head(nm_).array().square()).sum() + u.tail(d_).squaredNorm());
  }
  double p_norm(const Vec& c) const {
    return std::sqrt((dual_weights_.array() * c.head(nm_).array().square()).sum());
  }
  double distance(const Vec& a, const Vec& b) const { return norm(a - b); }
  double inner(const Vec& a, const Vec& b) const {
    return (dual_weights_.array() * a.head(nm_).array() * b.head(nm_).array()).sum() +
           a.tail(d_).dot(b.tail(d_));
  }
  /// Diagonal of the weighting that turns the state norm into a Euclidean norm.
  Vec norm_scaling() const {
    Vec w(size());
    w.head(nm_) = dual_weights_.cwiseSqrt();
    w.tail(d_).setOnes();
    return w;
  }
  double dual_norm_to_rho(const Vec& u) const {
    Vec c = u.head(nm_);
    c(0) -= rho_coefficient();
    return p_norm(c);
  }

  /// Density values p(x_j) at the quadrature nodes.
  Vec density_at_nodes(const Vec& u) const {
    Vec vals = basis_.transpose() * u.head(nm_);
    for (int j = 0; j < nq_; ++j) {
      double q = 0.0;
      for (int i = 0; i < d_; ++i) q += scales_(i) * scales_(i) * rule_.nodes(j, i) * rule_.nodes(j, i);
      vals(j) *= std::exp(-0.5 * q);
    }
    return vals;
  }

  /// G(u) = (G1 coefficients, G2), without the factor delta.
  Vec rhs_G(const Vec& u) const {
    const Eval ev = evaluate(u);
    Vec out(size());
    out.head(nm_).setZero();
    for (int a = 0; a < d_; ++a) {
      Vec g = rule_.weights.array() * ev.pv.array() * (ev.f.col(a).array() - ev.fbar(a));
      out.head(nm_).noalias() += grad_[a] * g;
    }
    out.tail(d_) = ev.fbar;
    return out;
  }

  /// DG(u)[V] applied column-wise to a batch of tangents (size() x k).
  Mat linearize_DG(const Vec& u, const Mat& v) const {
    const Eval ev = evaluate(u, true);
    const long k = v.cols();
    const Mat ph = basis_.transpose() * v.topRows(nm_);  // nq x k
    const Vec wp = rule_.weights.cwiseProduct(ev.pv);
    Mat a1(d_, k), a2(d_, k);
    std::vector<Mat> jn(d_);
    for (int a = 0; a < d_; ++a) {
      a1.row(a) = (rule_.weights.cwiseProduct(ev.f.col(a))).transpose() * ph;
      jn[a] = Mat::Zero(nq_, k);
      for (int b = 0; b < d_; ++b) jn[a].noalias() += ev.jac[a * d_ + b] * v.row(nm_ + b);
      a2.row(a) = wp.transpose() * jn[a];
    }
    Mat out(size(), k);
    out.topRows(nm_).setZero();
    for (int a = 0; a < d_; ++a) {
      const Eigen::RowVectorXd shift = a1.row(a) + a2.row(a);
      Mat g = (ph.array().colwise() * (ev.f.col(a).array() - ev.fbar(a))).matrix();
      g.array() += (jn[a].rowwise() - shift).array().colwise() * ev.pv.array();
      g.array().colwise() *= rule_.weights.array();
      out.topRows(nm_).noalias() += grad_[a] * g;
    }
    out.bottomRows(d_) = a1 + a2;
    return out;
  }

  Vec linearize_DG(const Vec& u, const Vec& v) const { return linearize_DG(u, Mat(v)).col(0); }

  /// D^2G(u)[v1, v2].
  Vec second_DG(const Vec& u, const Vec& v1, const Vec& v2) const {
    const Eval ev = evaluate(u, true);
    const Vec ph1 = basis_.transpose() * v1.head(nm_);
    const Vec ph2 = basis_.transpose() * v2.head(nm_);
    const Vec n1 = v1.tail(d_), n2 = v2.tail(d_);
    // DF_m[n] and D^2F_m[n1, n2] at the nodes
    Mat dfn1(nq_, d_), dfn2(nq_, d_), d2f(nq_, d_);
    dfn1.setZero();
    dfn2.setZero();
    std::vector<double> x(d_), out(d_);
    for (int j = 0; j < nq_; ++j) {
      for (int a = 0; a < d_; ++a)
        for (int b = 0; b < d_; ++b) {
          dfn1(j, a) += ev.jac[a * d_ + b](j) * n1(b);
          dfn2(j, a) += ev.jac[a * d_ + b](j) * n2(b);
        }
      for (int i = 0; i < d_; ++i) x[i] = rule_.nodes(j, i) + u(nm_ + i);
      model_.drift.second_derivative(x, std::span<const double>(n1.data(), d_),
                                     std::span<const double>(n2.data(), d_), out);
      for (int a = 0; a < d_; ++a) d2f(j, a) = out[a];
    }
    const Vec& w = rule_.weights;
    auto pair = [&](const Vec& dens, const Mat& field) -> Vec {
      return field.transpose() * w.cwiseProduct(dens);
    };
    const Vec f_eta1 = pair(ph1, ev.f), f_eta2 = pair(ph2, ev.f);
    const Vec dfn1_p = pair(ev.pv, dfn1), dfn2_p = pair(ev.pv, dfn2);
    const Vec dfn1_eta2 = pair(ph2, dfn1), dfn2_eta1 = pair(ph1, dfn2);
    const Vec d2f_p = pair(ev.pv, d2f);
    Vec res(size());
    res.head(nm_).setZero();
    for (int a = 0; a < d_; ++a) {
      Vec g = ph1.array() * (dfn2.col(a).array() - f_eta2(a) - dfn2_p(a));
      g.array() += ph2.array() * (dfn1.col(a).array() - f_eta1(a) - dfn1_p(a));
      g.array() += ev.pv.array() * (d2f.col(a).array() - dfn1_eta2(a) - dfn2_eta1(a) - d2f_p(a));
      res.head(nm_).noalias() += grad_[a] * w.cwiseProduct(g);
    }
    res.tail(d_) = dfn1_eta2 + dfn2_eta1 + d2f_p;
    return res;
  }

  /// Full vector field L u + delta G(u).
  Vec vector_field(const Vec& u) const {
    Vec v = model_.delta * rhs_G(u);
    v.head(nm_).array() -= lambda_.array() * u.head(nm_).array();
    return v;
  }

  /// One ETD2RK step of size h.
  Vec step(const Vec& u, double h) const {
    const Coeffs& c = coeffs(h);
    const double dl = model_.delta;
    const Vec nu = dl * rhs_G(u);
    const Vec a = c.e.cwiseProduct(u) + c.p1.cwiseProduct(nu);
    const Vec na = dl * rhs_G(a);
    Vec out = a + c.p2.cwiseProduct(na - nu);
    check(out);
    return out;
  }

  /// Advances the state and a batch of tangents together.
  void step_tangent(Vec& u, Mat& v, double h) const {
    const Coeffs& c = coeffs(h);
    const double dl = model_.delta;
    const Vec nu = dl * rhs_G(u);
    const Vec a = c.e.cwiseProduct(u) + c.p1.cwiseProduct(nu);
    const Mat dnu = dl * linearize_DG(u, v);
    const Mat va = (v.array().colwise() * c.e.array() + dnu.array().colwise() * c.p1.array()).matrix();
    const Vec na = dl * rhs_G(a);
    const Mat dna = dl * linearize_DG(a, va);
    v = va + ((dna - dnu).array().colwise() * c.p2.array()).matrix();
    u = a + c.p2.cwiseProduct(na - nu);
    check(u);
  }

  /// Advances the state, two tangents and the second variation xi.
  void step_second(Vec& u, Vec& v1, Vec& v2, Vec& xi, double h) const {
    const Coeffs& c = coeffs(h);
    const double dl = model_.delta;
    const Vec nu = dl * rhs_G(u);
    const Vec a = c.e.cwiseProduct(u) + c.p1.cwiseProduct(nu);
    Mat vv(size(), 2);
    vv << v1, v2;
    const Mat dnu = dl * linearize_DG(u, vv);
    const Mat va = (vv.array().colwise() * c.e.array() + dnu.array().colwise() * c.p1.array()).matrix();
    const Vec sxu = dl * (linearize_DG(u, xi) + second_DG(u, v1, v2));
    const Vec xa = c.e.cwiseProduct(xi) + c.p1.cwiseProduct(sxu);
    const Vec na = dl * rhs_G(a);
    const Mat dna = dl * linearize_DG(a, va);
    const Vec sxa = dl * (linearize_DG(a, xa) + second_DG(a, va.col(0), va.col(1)));
    xi = xa + c.p2.cwiseProduct(sxa - sxu);
    const Mat vn = va + ((dna - dnu).array().colwise() * c.p2.array()).matrix();
    v1 = vn.col(0);
    v2 = vn.col(1);
    u = a + c.p2.cwiseProduct(na - nu);
    check(u);
  }

  /// Number of uniform substeps used to cover a horizon T.
  int steps_for(double horizon) const {
    return std::max(1, static_cast<int>(std::ceil(horizon / cfg_.dt - 1e-9)));
  }

  /// Flow over `horizon` with n uniform steps (n = steps_for(horizon) when 0).
  /// The observer sees (step index, time, state) after every step.
  Vec flow(Vec u, double horizon, int n = 0,
           const std::function<void(int, double, const Vec&)>& observer = {}) const {
    require(horizon >= 0.0, ErrorKind::invalid_parameter, "flow horizon must be >= 0");
    if (horizon == 0.0) return u;
    if (n <= 0) n = steps_for(horizon);
    const double h = horizon / n;
    for (int s = 0; s < n; ++s) {
      u = step(u, h);
      if (observer) observer(s + 1, h * (s + 1), u);
    }
    return u;
  }

  Mat tangent_flow(Vec u, Mat v, double horizon, int n = 0, Vec* final_state = nullptr) const {
    require(horizon >= 0.0, ErrorKind::invalid_parameter, "flow horizon must be >= 0");
    if (n <= 0) n = steps_for(horizon);
    if (horizon > 0.0) {
      const double h = horizon / n;
      for (int s = 0; s < n; ++s) step_tangent(u, v, h);
    }
    if (final_state) *final_state = u;
    return v;
  }

  Vec second_variation(Vec u, Vec v1, Vec v2, double horizon, int n = 0) const {
    require(horizon >= 0.0, ErrorKind::invalid_parameter, "flow horizon must be >= 0");
    Vec xi = Vec::Zero(size());
    if (horizon == 0.0) return xi;
    if (n <= 0) n = steps_for(horizon);
    const double h = horizon / n;
    for (int s = 0; s < n; ++s) step_second(u, v1, v2, xi, h);
    return xi;
  }

  CenteredState unpack(const Vec& u, double t = 0.0) const {
    CenteredState s;
    s.p = SpectralCoeffs::zeros(1.0, Side::distribution, idx_, model_);
    s.p.coeffs = u.head(nm_);
    s.m = u.tail(d_);
    s.t = t;
    return s;
  }

  Vec pack(const CenteredState& s) const {
    require(s.p.indices && s.p.indices->n_max() == cfg_.n_max && s.p.dim() == d_ && s.m.size() == d_,
            ErrorKind::invalid_parameter, "state truncation or dimension does not match the solver");
    require(s.p.theta == 1.0 && s.p.side == Side::distribution, ErrorKind::invalid_parameter,
            "solver states are distribution-side coefficients with theta = 1");
    Vec u(size());
    u << s.p.coeffs, s.m;
    return u;
  }

  Vec pack(const TangentState& t) const {
    require(t.eta.indices && t.eta.indices->n_max() == cfg_.n_max && t.n.size() == d_,
            ErrorKind::invalid_parameter, "tangent truncation or dimension does not match the solver");
    Vec v(size());
    v << t.eta.coeffs, t.n;
    return v;
  }

  TangentState unpack_tangent(const Vec& v) const {
    TangentState t;
    t.eta = SpectralCoeffs::zeros(1.0, Side::distribution, idx_, model_);
    t.eta.coeffs = v.head(nm_);
    t.n = v.tail(d_);
    return t;
  }

  void require_mass_zero(const Vec& v) const {
    const double scale = std::max(1.0, v.head(nm_).cwiseAbs().maxCoeff());
    require(std::abs(v(0)) <= 1e-12 * scale, ErrorKind::contract_violation,
            "tangent directions must carry zero mass");
  }

 private:
  struct Eval {
    Vec pv;                // sum_l c_l psi_l at the nodes
    Mat f;                 // F(x_j + m), nq x d
    Vec fbar;              // <F_m, p>
    std::vector<Vec> jac;  // DF entries (row-major) at the nodes
  };

  Eval evaluate(const Vec& u, bool with_jacobian = false) const {
    Eval ev;
    ev.pv = basis_.transpose() * u.head(nm_);
    ev.f.resize(nq_, d_);
    if (with_jacobian) ev.jac.assign(d_ * d_, Vec(nq_));
    std::vector<double> x(d_), f(d_), j(d_ * d_);
    for (int q = 0; q < nq_; ++q) {
      for (int i = 0; i < d_; ++i) x[i] = rule_.nodes(q, i) + u(nm_ + i);
      model_.drift.eval(x, f);
      for (int i = 0; i < d_; ++i) ev.f(q, i) = f[i];
      if (with_jacobian) {
        model_.drift.jacobian(x, j);
        for (int e = 0; e < d_ * d_; ++e) ev.jac[e](q) = j[e];
      }
    }
    if (!ev.f.allFinite())
      fail(ErrorKind::numerical, "drift evaluation produced non-finite values at the quadrature nodes");
    ev.fbar = ev.f.transpose() * rule_.weights.cwiseProduct(ev.pv);
    return ev;
  }

  struct Coeffs {
    double h = -1.0;
    Vec e, p1, p2;
  };

  const Coeffs& coeffs(double h) const {
    if (cache_.h == h) return cache_;
    cache_.h = h;
    cache_.e.resize(size());
    cache_.p1.resize(size());
    cache_.p2.resize(size());
    for (int p = 0; p < nm_; ++p) {
      const double z = -lambda_(p) * h;
      cache_.e(p) = std::exp(z);
      cache_.p1(p) = h * detail::phi1(z);
      cache_.p2(p) = h * detail::phi2(z);
    }
    for (int i = 0; i < d_; ++i) {
      cache_.e(nm_ + i) = 1.0;
      cache_.p1(nm_ + i) = h;
      cache_.p2(nm_ + i) = 0.5 * h;
    }
    return cache_;
  }

  void check(const Vec& u) const {
    const double mx = u.cwiseAbs().maxCoeff();
    if (!(mx <= kInstabilityThreshold)) {
      std::ostringstream os;
      os << "state magnitude " << mx << " exceeds " << kInstabilityThreshold << "; reduce dt (currently "
         << cfg_.dt << ")";
      fail(ErrorKind::instability, os.str());
    }
  }

  ModelSpec model_;
  SolverConfig cfg_;
  int d_ = 0;
  std::shared_ptr<const MultiIndexSet> idx_;
  int nm_ = 0;
  int quad_order_ = 0;
  int nq_ = 0;
  Vec scales_;
  TensorRule rule_;
  Mat basis_;
  std::vector<Mat> grad_;
  Vec lambda_;
  double mass_factor_ = 1.0;
  Vec dual_weights_;
  mutable Coeffs cache_;
};

struct GRates {
  SpectralCoeffs coeff_rate;
  Vec mean_rate;
};

/// G(state) split into coefficient and mean parts (no delta factor).
inline GRates rhs_G(const CenteredState& state, const SpectralSystem& sys) {
  const Vec g = sys.rhs_G(sys.pack(state));
  GRates out{sys.unpack(g).p, g.tail(sys.dim())};
  return out;
}

inline TangentState linearize_DG(const CenteredState& state, const TangentState& tangent, const SpectralSystem& sys) {
  const Vec v = sys.pack(tangent);
  sys.require_mass_zero(v);
  return sys.unpack_tangent(sys.linearize_DG(sys.pack(state), v));
}

inline CenteredState step(const CenteredState& state, const SpectralSystem& sys) {
  return sys.unpack(sys.step(sys.pack(state), sys.config().dt), state.t + sys.config().dt);
}

inline CenteredState flow(const CenteredState& state, double horizon, const SpectralSystem& sys) {
  return sys.unpack(sys.flow(sys.pack(state), horizon), state.t + horizon);
}

inline TangentState tangent_flow(const CenteredState& state0, const TangentState& tangent0, double horizon,
                                 const SpectralSystem& sys) {
  const Vec v = sys.pack(tangent0);
  sys.require_mass_zero(v);
  return sys.unpack_tangent(sys.tangent_flow(sys.pack(state0), Mat(v), horizon).col(0));
}

inline TangentState second_variation(const CenteredState& state0, const TangentState& t1, const TangentState& t2,
                                     double horizon, const SpectralSystem& sys) {
  const Vec v1 = sys.pack(t1), v2 = sys.pack(t2);
  sys.require_mass_zero(v1);
  sys.require_mass_zero(v2);
  return sys.unpack_tangent(sys.second_variation(sys.pack(state0), v1, v2, horizon));
}

}  // namespace mvosc
