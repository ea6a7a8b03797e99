#pragma once

#include <cstddef>

#include <Eigen/Core>

#include "mclv/rbm.hpp"

namespace mclv {

/// Ascent direction of the average log-likelihood, shaped like the params.
struct GradientEstimate {
  Eigen::MatrixXd d_weights;
  Eigen::VectorXd d_visible_bias;
  Eigen::VectorXd d_hidden_bias;
  /// Mean length of completed tours (1 for estimators without tours).
  double xi_hat = 1.0;
  double completed_fraction = 1.0;
  std::size_t completed_tours = 0;
  bool normalized = false;

  static GradientEstimate zeros(Eigen::Index n_visible, Eigen::Index n_hidden) {
    GradientEstimate g;
    g.d_weights = Eigen::MatrixXd::Zero(n_visible, n_hidden);
    g.d_visible_bias = Eigen::VectorXd::Zero(n_visible);
    g.d_hidden_bias = Eigen::VectorXd::Zero(n_hidden);
    return g;
  }

  bool all_finite() const {
    return d_weights.allFinite() && d_visible_bias.allFinite() && d_hidden_bias.allFinite();
  }
};

/// Parameter vector layout shared by gradients and per-state statistics:
/// weights in column-major order, then visible bias, then hidden bias.
inline Eigen::VectorXd flatten(const Eigen::MatrixXd& w, const Eigen::VectorXd& b, const Eigen::VectorXd& a) {
  Eigen::VectorXd out(w.size() + b.size() + a.size());
  out << Eigen::Map<const Eigen::VectorXd>(w.data(), w.size()), b, a;
  return out;
}

inline Eigen::VectorXd flatten(const GradientEstimate& g) {
  return flatten(g.d_weights, g.d_visible_bias, g.d_hidden_bias);
}

inline Eigen::VectorXd flatten(const Rbm& params) {
  return flatten(params.weights, params.visible_bias, params.hidden_bias);
}

inline Rbm unflatten_params(const Eigen::VectorXd& flat, Eigen::Index n_visible, Eigen::Index n_hidden) {
  Rbm out;
  out.weights = Eigen::Map<const Eigen::MatrixXd>(flat.data(), n_visible, n_hidden);
  out.visible_bias = flat.segment(n_visible * n_hidden, n_visible);
  out.hidden_bias = flat.segment(n_visible * n_hidden + n_visible, n_hidden);
  return out;
}

inline double cosine_similarity(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  const double denom = x.norm() * y.norm();
  return denom > 0.0 ? x.dot(y) / denom : 0.0;
}

/// params += step * g
inline void apply_update(Rbm& params, const GradientEstimate& g, double step) {
  params.weights.noalias() += step * g.d_weights;
  params.visible_bias.noalias() += step * g.d_visible_bias;
  params.hidden_bias.noalias() += step * g.d_hidden_bias;
}

}  // namespace mclv
