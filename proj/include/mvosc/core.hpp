#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace mvosc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class ErrorKind {
  invalid_parameter,
  contract_violation,
  config,
  numerical,
  instability,
  outside_basin,
  cycle_quality,
  convergence,
  io,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_parameter: return "invalid parameter";
    case ErrorKind::contract_violation: return "contract violation";
    case ErrorKind::config: return "configuration error";
    case ErrorKind::numerical: return "numerical failure";
    case ErrorKind::instability: return "instability";
    case ErrorKind::outside_basin: return "outside basin";
    case ErrorKind::cycle_quality: return "cycle quality";
    case ErrorKind::convergence: return "convergence failure";
    case ErrorKind::io: return "i/o error";
  }
  return "error";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  /// True for errors caused by bad input rather than by the numerics.
  bool is_validation() const noexcept {
    return kind_ == ErrorKind::invalid_parameter || kind_ == ErrorKind::config ||
           kind_ == ErrorKind::contract_violation || kind_ == ErrorKind::io;
  }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

/// Pairwise summation over a fixed binary tree; the result depends only on
/// the input order.
template <typename Get>
double pairwise_sum(std::size_t begin, std::size_t end, const Get& get) {
  const std::size_t n = end - begin;
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = begin; i < end; ++i) s += get(i);
    return s;
  }
  const std::size_t mid = begin + n / 2;
  return pairwise_sum(begin, mid, get) + pairwise_sum(mid, end, get);
}

inline constexpr double kPi = 3.14159265358979323846264338327950288;

}  // namespace mvosc
