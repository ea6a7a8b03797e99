#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "mclv/rbm.hpp"

namespace mclv::testing {

inline Rbm small_model(std::size_t n_visible, std::size_t n_hidden, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  Rbm p = Rbm::zeros(static_cast<Eigen::Index>(n_visible), static_cast<Eigen::Index>(n_hidden));
  for (Eigen::Index j = 0; j < p.weights.cols(); ++j) {
    for (Eigen::Index i = 0; i < p.weights.rows(); ++i) p.weights(i, j) = normal(rng);
  }
  for (Eigen::Index i = 0; i < p.visible_bias.size(); ++i) p.visible_bias(i) = normal(rng);
  for (Eigen::Index j = 0; j < p.hidden_bias.size(); ++j) p.hidden_bias(j) = normal(rng);
  return p;
}

/// log Z by summing exp(-E) over every joint state, with no free energies.
inline double brute_log_z(const Rbm& p) {
  const auto n_v = static_cast<std::size_t>(p.n_visible());
  const auto n_h = static_cast<std::size_t>(p.n_hidden());
  const std::uint64_t n = std::uint64_t{1} << (n_v + n_h);
  double m = -INFINITY;
  std::vector<double> logs(n);
  for (std::uint64_t c = 0; c < n; ++c) {
    logs[c] = -energy(state_from_code(c, n_v, n_h), p);
    m = std::max(m, logs[c]);
  }
  double s = 0.0;
  for (double l : logs) s += std::exp(l - m);
  return m + std::log(s);
}

/// p(x) for every joint code from raw energies.
inline std::vector<double> brute_joint(const Rbm& p) {
  const auto n_v = static_cast<std::size_t>(p.n_visible());
  const auto n_h = static_cast<std::size_t>(p.n_hidden());
  const double log_z = brute_log_z(p);
  std::vector<double> out(std::size_t{1} << (n_v + n_h));
  for (std::uint64_t c = 0; c < out.size(); ++c) out[c] = std::exp(-energy(state_from_code(c, n_v, n_h), p) - log_z);
  return out;
}

inline std::vector<BitVector> all_states(std::size_t bits) {
  std::vector<BitVector> out;
  for (std::uint64_t c = 0; c < (std::uint64_t{1} << bits); ++c) out.push_back(BitVector::from_code(c, bits));
  return out;
}

}  // namespace mclv::testing
