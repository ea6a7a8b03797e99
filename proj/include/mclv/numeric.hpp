#pragma once

#include <cmath>
#include <concepts>
#include <limits>

#include <Eigen/Core>

namespace mclv {

/// log(1 + e^x); above the cutoff the correction term is below 1e-13.
template <std::floating_point Scalar>
Scalar softplus(Scalar x) {
  constexpr Scalar kCutoff = Scalar(30);
  if (x > kCutoff) return x;
  return std::log1p(std::exp(x));
}

template <std::floating_point Scalar>
Scalar sigmoid(Scalar x) {
  if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-x));
  const Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

template <typename Derived>
auto softplus(const Eigen::ArrayBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  return x.unaryExpr([](Scalar s) { return softplus(s); });
}

template <typename Derived>
auto sigmoid(const Eigen::ArrayBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  return x.unaryExpr([](Scalar s) { return sigmoid(s); });
}

template <typename Derived>
typename Derived::Scalar log_sum_exp(const Eigen::DenseBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  if (x.size() == 0) return -std::numeric_limits<Scalar>::infinity();
  const Scalar m = x.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((x.derived().array() - m).exp().sum());
}

/// Streaming log-sum-exp with a running maximum; the sum is rescaled
/// whenever the maximum grows, so any number of terms can be folded in.
template <typename Scalar = double>
class LogSumExpAccumulator {
 public:
  void add(Scalar log_term) {
    if (log_term == -std::numeric_limits<Scalar>::infinity()) return;
    if (log_term <= max_) {
      sum_ += std::exp(log_term - max_);
    } else {
      sum_ = sum_ * std::exp(max_ - log_term) + Scalar(1);
      max_ = log_term;
    }
  }

  template <typename Derived>
  void add_all(const Eigen::DenseBase<Derived>& terms) {
    if (terms.size() == 0) return;
    const Scalar m = terms.maxCoeff();
    if (m == -std::numeric_limits<Scalar>::infinity()) return;
    const Scalar block = m + std::log((terms.derived().array() - m).exp().sum());
    add(block);
  }

  Scalar value() const {
    if (sum_ == Scalar(0)) return -std::numeric_limits<Scalar>::infinity();
    return max_ + std::log(sum_);
  }

 private:
  Scalar max_ = -std::numeric_limits<Scalar>::infinity();
  Scalar sum_ = Scalar(0);
};

}  // namespace mclv
