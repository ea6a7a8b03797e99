#pragma once

#include <cstddef>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

#include "mclv/bit_vector.hpp"
#include "mclv/numeric.hpp"

namespace mclv {

using Rng = std::mt19937_64;

/// Binary RBM parameters: weights (n_visible x n_hidden), visible bias b and
/// hidden bias a, with energy E(v, h) = -v'Wh - b'v - a'h.
template <typename Scalar>
struct RbmParams {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Matrix weights;
  Vector visible_bias;
  Vector hidden_bias;

  RbmParams() = default;

  RbmParams(Matrix w, Vector b, Vector a)
      : weights(std::move(w)), visible_bias(std::move(b)), hidden_bias(std::move(a)) {
    if (weights.rows() < 1 || weights.cols() < 1) {
      throw std::invalid_argument("RbmParams: need at least one visible and one hidden unit");
    }
    if (visible_bias.size() != weights.rows() || hidden_bias.size() != weights.cols()) {
      throw std::invalid_argument("RbmParams: bias lengths do not match the weight matrix");
    }
    if (!all_finite()) throw std::invalid_argument("RbmParams: non-finite entry");
  }

  static RbmParams zeros(Eigen::Index n_visible, Eigen::Index n_hidden) {
    return RbmParams(Matrix::Zero(n_visible, n_hidden), Vector::Zero(n_visible), Vector::Zero(n_hidden));
  }

  Eigen::Index n_visible() const { return weights.rows(); }
  Eigen::Index n_hidden() const { return weights.cols(); }
  Eigen::Index n_params() const { return weights.size() + visible_bias.size() + hidden_bias.size(); }

  bool all_finite() const {
    return weights.allFinite() && visible_bias.allFinite() && hidden_bias.allFinite();
  }

  template <typename Other>
  RbmParams<Other> cast() const {
    RbmParams<Other> out;
    out.weights = weights.template cast<Other>();
    out.visible_bias = visible_bias.template cast<Other>();
    out.hidden_bias = hidden_bias.template cast<Other>();
    return out;
  }
};

using Rbm = RbmParams<double>;

struct JointState {
  BitVector visible;
  BitVector hidden;

  friend bool operator==(const JointState&, const JointState&) = default;
};

enum class GibbsScan {
  AlternatingVH,  ///< v ~ p(v|h), then h ~ p(h|v) with the new v.
  RandomScan,     ///< Resample one uniformly chosen unit; reversible.
};

namespace detail {

inline void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

template <typename Scalar>
void check_visible(const BitVector& v, const RbmParams<Scalar>& params) {
  require(static_cast<Eigen::Index>(v.size()) == params.n_visible(), "visible length does not match params");
}

template <typename Scalar>
void check_hidden(const BitVector& h, const RbmParams<Scalar>& params) {
  require(static_cast<Eigen::Index>(h.size()) == params.n_hidden(), "hidden length does not match params");
}

// b + W h restricted to the active hidden bits.
template <typename Scalar>
typename RbmParams<Scalar>::Vector visible_activation(const BitVector& h, const RbmParams<Scalar>& params) {
  typename RbmParams<Scalar>::Vector act = params.visible_bias;
  for (Eigen::Index j = 0; j < params.n_hidden(); ++j) {
    if (h.get(static_cast<std::size_t>(j))) act += params.weights.col(j);
  }
  return act;
}

// a + W' v.
template <typename Scalar>
typename RbmParams<Scalar>::Vector hidden_activation(const BitVector& v, const RbmParams<Scalar>& params) {
  return params.hidden_bias + params.weights.transpose() * v.to_dense<Scalar>();
}

template <typename Scalar>
Scalar visible_unit_activation(std::size_t i, const BitVector& h, const RbmParams<Scalar>& params) {
  Scalar act = params.visible_bias(static_cast<Eigen::Index>(i));
  for (Eigen::Index j = 0; j < params.n_hidden(); ++j) {
    if (h.get(static_cast<std::size_t>(j))) act += params.weights(static_cast<Eigen::Index>(i), j);
  }
  return act;
}

template <typename Scalar>
Scalar hidden_unit_activation(std::size_t j, const BitVector& v, const RbmParams<Scalar>& params) {
  Scalar act = params.hidden_bias(static_cast<Eigen::Index>(j));
  for (Eigen::Index i = 0; i < params.n_visible(); ++i) {
    if (v.get(static_cast<std::size_t>(i))) act += params.weights(i, static_cast<Eigen::Index>(j));
  }
  return act;
}

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

}  // namespace detail

template <typename Scalar>
Scalar energy(const JointState& x, const RbmParams<Scalar>& params) {
  detail::check_visible(x.visible, params);
  detail::check_hidden(x.hidden, params);
  const auto v = x.visible.to_dense<Scalar>();
  const auto h = x.hidden.to_dense<Scalar>();
  return -v.dot(params.weights * h) - params.visible_bias.dot(v) - params.hidden_bias.dot(h);
}

/// p(h_j = 1 | v) = sigmoid(a_j + (v'W)_j).
template <typename Scalar>
typename RbmParams<Scalar>::Vector hidden_conditional(const BitVector& v, const RbmParams<Scalar>& params) {
  detail::check_visible(v, params);
  return sigmoid(detail::hidden_activation(v, params).array()).matrix();
}

/// p(v_i = 1 | h) = sigmoid(b_i + (Wh)_i).
template <typename Scalar>
typename RbmParams<Scalar>::Vector visible_conditional(const BitVector& h, const RbmParams<Scalar>& params) {
  detail::check_hidden(h, params);
  return sigmoid(detail::visible_activation(h, params).array()).matrix();
}

/// F_H(h) with exp(-F_H(h)) = sum_v exp(-E(v, h)).
template <typename Scalar>
Scalar hidden_free_energy(const BitVector& h, const RbmParams<Scalar>& params) {
  detail::check_hidden(h, params);
  const Scalar linear = params.hidden_bias.dot(h.to_dense<Scalar>());
  return -linear - softplus(detail::visible_activation(h, params).array()).sum();
}

/// F_V(v) with exp(-F_V(v)) = sum_h exp(-E(v, h)).
template <typename Scalar>
Scalar visible_free_energy(const BitVector& v, const RbmParams<Scalar>& params) {
  detail::check_visible(v, params);
  const Scalar linear = params.visible_bias.dot(v.to_dense<Scalar>());
  return -linear - softplus(detail::hidden_activation(v, params).array()).sum();
}

template <typename Derived>
BitVector sample_bernoulli(const Eigen::MatrixBase<Derived>& probs, Rng& rng) {
  BitVector out(static_cast<std::size_t>(probs.size()));
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    if (detail::uniform01(rng) < static_cast<double>(probs(i))) out.set(static_cast<std::size_t>(i), true);
  }
  return out;
}

/// One transition of the Gibbs chain, updating `x` in place.
template <typename Scalar>
void gibbs_update(JointState& x, const RbmParams<Scalar>& params, GibbsScan scan, Rng& rng) {
  detail::check_visible(x.visible, params);
  detail::check_hidden(x.hidden, params);
  if (scan == GibbsScan::AlternatingVH) {
    x.visible = sample_bernoulli(visible_conditional(x.hidden, params), rng);
    x.hidden = sample_bernoulli(hidden_conditional(x.visible, params), rng);
    return;
  }
  const auto n_v = static_cast<std::size_t>(params.n_visible());
  const auto n_units = n_v + static_cast<std::size_t>(params.n_hidden());
  const std::size_t unit = std::uniform_int_distribution<std::size_t>(0, n_units - 1)(rng);
  if (unit < n_v) {
    const Scalar p = sigmoid(detail::visible_unit_activation(unit, x.hidden, params));
    x.visible.set(unit, detail::uniform01(rng) < static_cast<double>(p));
  } else {
    const std::size_t j = unit - n_v;
    const Scalar p = sigmoid(detail::hidden_unit_activation(j, x.visible, params));
    x.hidden.set(j, detail::uniform01(rng) < static_cast<double>(p));
  }
}

template <typename Scalar>
JointState gibbs_step(JointState x, const RbmParams<Scalar>& params, GibbsScan scan, Rng& rng) {
  gibbs_update(x, params, scan, rng);
  return x;
}

/// Joint state whose bits are the low bits of `code`: visible first, then hidden.
inline JointState state_from_code(std::uint64_t code, std::size_t n_visible, std::size_t n_hidden) {
  return {BitVector::from_code(code, n_visible), BitVector::from_code(code >> n_visible, n_hidden)};
}

inline std::uint64_t state_code(const JointState& x) {
  return x.visible.code() | (x.hidden.code() << x.visible.size());
}

inline const char* to_string(GibbsScan scan) {
  return scan == GibbsScan::AlternatingVH ? "alternating" : "random";
}

}  // namespace mclv
