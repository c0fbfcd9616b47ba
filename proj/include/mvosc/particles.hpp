#pragma once

// Euler–Maruyama simulation of the N-particle mean-field system
//   dX_i = (delta F(X_i) - K (X_i - m_N)) dt + sqrt(2) sigma dB_i.

#include "mvosc/core.hpp"
#include "mvosc/hermite.hpp"
#include "mvosc/model.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#ifdef MVOSC_HAVE_OPENMP
#include <omp.h>
#endif

namespace mvosc {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter generate(Counter ctr, Key key) {
    constexpr std::uint32_t m0 = 0xD2511F53u, m1 = 0xCD9E8D57u;
    constexpr std::uint32_t w0 = 0x9E3779B9u, w1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = static_cast<std::uint64_t>(m0) * ctr[0];
      const std::uint64_t p1 = static_cast<std::uint64_t>(m1) * ctr[2];
      ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
      key[0] += w0;
      key[1] += w1;
    }
    return ctr;
  }

  static constexpr const char* name() { return "philox4x32-10"; }
};

/// Two independent standard normals for (stream, particle, block), by Box–Muller.
inline std::array<double, 2> gaussian_pair(std::uint64_t seed, std::uint64_t step, std::uint64_t particle,
                                           std::uint32_t block) {
  const Philox4x32::Counter ctr = {static_cast<std::uint32_t>(particle), static_cast<std::uint32_t>(particle >> 32),
                                   static_cast<std::uint32_t>(step), block ^ static_cast<std::uint32_t>(step >> 32) << 16};
  const Philox4x32::Key key = {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  const auto r = Philox4x32::generate(ctr, key);
  // 53-bit uniforms; u1 in (0, 1]
  const std::uint64_t a = (static_cast<std::uint64_t>(r[0]) << 21) ^ (r[1] >> 11);
  const std::uint64_t b = (static_cast<std::uint64_t>(r[2]) << 21) ^ (r[3] >> 11);
  const double u1 = (static_cast<double>(a & ((1ull << 53) - 1)) + 1.0) * 0x1.0p-53;
  const double u2 = static_cast<double>(b & ((1ull << 53) - 1)) * 0x1.0p-53;
  const double rad = std::sqrt(-2.0 * std::log(u1));
  return {rad * std::cos(2.0 * kPi * u2), rad * std::sin(2.0 * kPi * u2)};
}

inline constexpr const char* kGaussianMethod = "box-muller";
inline constexpr double kBlowUpThreshold = 1e8;

struct Ensemble {
  int n = 0;
  int d = 0;
  std::vector<double> x;  // row-major n x d
  double t = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t counter = 0;  // steps drawn so far

  double& at(int i, int k) { return x[static_cast<std::size_t>(i) * d + k]; }
  double at(int i, int k) const { return x[static_cast<std::size_t>(i) * d + k]; }
  Vec row(int i) const { return Eigen::Map<const Vec>(&x[static_cast<std::size_t>(i) * d], d); }
  std::string rng_name() const { return std::string(Philox4x32::name()) + "/" + kGaussianMethod; }
};

struct SimConfig {
  int n = 1000;
  double h = 0.01;
  std::uint64_t seed = 1;
  double horizon = 20.0;
  int stride = 1;   // record every stride steps
  int threads = 0;  // 0: library default
};

namespace detail {
// Initial draws live in their own counter domain so they never collide with steps.
inline constexpr std::uint32_t kInitBlock = 0x80000000u;

inline void set_threads(int threads) {
#ifdef MVOSC_HAVE_OPENMP
  if (threads > 0) omp_set_num_threads(threads);
#else
  (void)threads;
#endif
}
}  // namespace detail

inline Ensemble make_ensemble(int n, int d, std::uint64_t seed) {
  require(n >= 1, ErrorKind::invalid_parameter, "ensemble size N must be >= 1");
  require(d >= 1, ErrorKind::invalid_parameter, "dimension must be >= 1");
  Ensemble e;
  e.n = n;
  e.d = d;
  e.seed = seed;
  e.x.assign(static_cast<std::size_t>(n) * d, 0.0);
  return e;
}

inline Ensemble make_ensemble(const Mat& positions, std::uint64_t seed = 0) {
  Ensemble e = make_ensemble(static_cast<int>(positions.rows()), static_cast<int>(positions.cols()), seed);
  for (int i = 0; i < e.n; ++i)
    for (int k = 0; k < e.d; ++k) e.at(i, k) = positions(i, k);
  return e;
}

/// N i.i.d. draws from rho shifted by `mean`.
inline Ensemble sample_reference(const ModelSpec& model, int n, std::uint64_t seed, const Vec& mean) {
  model.validate();
  require(mean.size() == model.d, ErrorKind::invalid_parameter, "initial mean has wrong dimension");
  Ensemble e = make_ensemble(n, model.d, seed);
  const Vec sd = gaussian_ref(model).variance.cwiseSqrt();
  for (int i = 0; i < n; ++i)
    for (int b = 0; 2 * b < model.d; ++b) {
      const auto g = gaussian_pair(seed, 0, static_cast<std::uint64_t>(i), detail::kInitBlock | b);
      for (int k = 2 * b; k < std::min(2 * b + 2, model.d); ++k) e.at(i, k) = mean(k) + sd(k) * g[k - 2 * b];
    }
  return e;
}

inline Vec empirical_mean(const Ensemble& e) {
  require(e.n >= 1, ErrorKind::invalid_parameter, "empty ensemble");
  Vec m(e.d);
  for (int k = 0; k < e.d; ++k)
    m(k) = pairwise_sum(0, static_cast<std::size_t>(e.n), [&](std::size_t i) { return e.at(static_cast<int>(i), k); }) /
           e.n;
  return m;
}

/// Per-coordinate variance about the empirical mean.
inline Vec empirical_variance(const Ensemble& e) {
  const Vec m = empirical_mean(e);
  Vec v(e.d);
  for (int k = 0; k < e.d; ++k)
    v(k) = pairwise_sum(0, static_cast<std::size_t>(e.n), [&](std::size_t i) {
             const double y = e.at(static_cast<int>(i), k) - m(k);
             return y * y;
           }) /
           e.n;
  return v;
}

inline Ensemble center(const Ensemble& e) {
  Ensemble out = e;
  const Vec m = empirical_mean(e);
  for (int i = 0; i < e.n; ++i)
    for (int k = 0; k < e.d; ++k) out.at(i, k) -= m(k);
  return out;
}

/// One Euler–Maruyama step; the interaction uses the pre-step mean.
inline void em_step(Ensemble& e, const ModelSpec& model, double h) {
  require(h > 0.0, ErrorKind::invalid_parameter, "step size h must be > 0");
  require(e.d == model.d, ErrorKind::invalid_parameter, "ensemble and model dimensions differ");
  const int d = e.d;
  const Vec m = empirical_mean(e);
  const Vec& k = model.k.entries();
  Vec amp(d);
  for (int c = 0; c < d; ++c) amp(c) = std::sqrt(2.0 * h) * model.sigma.entries()(c);
  const double delta = model.delta;
  const std::uint64_t step = e.counter + 1;
  const std::uint64_t seed = e.seed;
  long bad = -1;
#ifdef MVOSC_HAVE_OPENMP
#pragma omp parallel
#endif
  {
    std::vector<double> f(d, 0.0);
    long bad_local = -1;
#ifdef MVOSC_HAVE_OPENMP
#pragma omp for schedule(static)
#endif
    for (int i = 0; i < e.n; ++i) {
      double* xi = &e.x[static_cast<std::size_t>(i) * d];
      if (delta != 0.0) model.drift.eval(std::span<const double>(xi, d), f);
      for (int b = 0; 2 * b < d; ++b) {
        const auto g = gaussian_pair(seed, step, static_cast<std::uint64_t>(i), static_cast<std::uint32_t>(b));
        for (int c = 2 * b; c < std::min(2 * b + 2, d); ++c) {
          const double drift = (delta != 0.0 ? delta * f[c] : 0.0) - k(c) * (xi[c] - m(c));
          xi[c] += h * drift + amp(c) * g[c - 2 * b];
        }
      }
      for (int c = 0; c < d; ++c)
        if (!(std::abs(xi[c]) <= kBlowUpThreshold) && (bad_local < 0 || i < bad_local)) bad_local = i;
    }
    if (bad_local >= 0) {
#ifdef MVOSC_HAVE_OPENMP
#pragma omp critical
#endif
      if (bad < 0 || bad_local < bad) bad = bad_local;
    }
  }
  e.counter = step;
  e.t += h;
  if (bad >= 0) {
    std::ostringstream os;
    os << "particle " << bad << " left |x| <= " << kBlowUpThreshold << " at t=" << e.t << "; reduce h";
    fail(ErrorKind::instability, os.str());
  }
}

/// c_l = (1/N) sum_i psi_{l,theta}(Y_i): the empirical measure on the distribution side.
inline SpectralCoeffs empirical_spectral(const Ensemble& centered, double theta, int n_max, const ModelSpec& model) {
  require(centered.d == model.d, ErrorKind::invalid_parameter, "ensemble and model dimensions differ");
  auto idx = make_index_set(model.d, n_max);
  SpectralCoeffs c = SpectralCoeffs::zeros(theta, Side::distribution, idx, model);
  const Vec s = basis_scales(theta, model);
  // fixed chunks summed in order, then a pairwise tree over chunk totals
  constexpr int chunk = 1024;
  const int nchunks = (centered.n + chunk - 1) / chunk;
  Mat partial = Mat::Zero(idx->size(), nchunks);
  std::vector<double> h((n_max + 1) * model.d);
  for (int i = 0; i < centered.n; ++i) {
    for (int k = 0; k < model.d; ++k) hermite_all(n_max, s(k) * centered.at(i, k), &h[k * (n_max + 1)]);
    for (int p = 0; p < idx->size(); ++p) {
      double v = 1.0;
      for (int k = 0; k < model.d; ++k) v *= h[k * (n_max + 1) + (*idx)[p][k]];
      partial(p, i / chunk) += v;
    }
  }
  for (int p = 0; p < idx->size(); ++p)
    c.coeffs(p) = pairwise_sum(0, static_cast<std::size_t>(nchunks),
                               [&](std::size_t j) { return partial(p, static_cast<long>(j)); }) /
                  centered.n;
  return c;
}

struct ParticleRecord {
  double t;
  Vec mean;
  Vec variance;
};

/// Runs the ensemble to cfg.horizon (uniform steps of size horizon / ceil(horizon / h)),
/// recording the mean and variance every cfg.stride steps, including t = 0.
inline std::vector<ParticleRecord> simulate(Ensemble& e, const ModelSpec& model, const SimConfig& cfg,
                                            const std::function<void(const Ensemble&)>& observer = {}) {
  require(cfg.h > 0.0, ErrorKind::invalid_parameter, "particles h must be > 0");
  require(cfg.horizon >= 0.0, ErrorKind::invalid_parameter, "particles horizon must be >= 0");
  require(cfg.stride >= 1, ErrorKind::invalid_parameter, "particles stride must be >= 1");
  detail::set_threads(cfg.threads);
  std::vector<ParticleRecord> out;
  auto record = [&] {
    out.push_back({e.t, empirical_mean(e), empirical_variance(e)});
    if (observer) observer(e);
  };
  record();
  const int steps = cfg.horizon > 0.0 ? static_cast<int>(std::ceil(cfg.horizon / cfg.h - 1e-9)) : 0;
  const double h = steps > 0 ? cfg.horizon / steps : cfg.h;
  const double t0 = e.t;
  for (int s = 1; s <= steps; ++s) {
    em_step(e, model, h);
    e.t = t0 + s * h;
    if (s % cfg.stride == 0 || s == steps) record();
  }
  return out;
}

}  // namespace mvosc
