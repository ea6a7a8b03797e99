#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mclv/rbm.hpp"
#include "mclv/stopping_set.hpp"

namespace mclv {

/// Weights, visible and hidden biases drawn from N(0, scale^2).
Rbm random_model(std::size_t n_visible, std::size_t n_hidden, double scale, Rng& rng);

/// A random non-empty proper subset of the hidden states; each state is kept
/// with probability `keep`. Requires n_hidden <= 20.
StoppingSet random_stopping_set(const Rbm& params, double keep, Rng& rng);

struct PropertyResult {
  std::uint64_t seed = 0;
  std::string property;
  double value = 0.0;
  double tolerance = 0.0;
  bool passed = true;
  /// Informational rows (spectral gaps) always pass.
  bool informational = false;
};

struct VerifyOptions {
  std::size_t n_visible = 4;
  std::size_t n_hidden = 3;
  double weight_scale = 1.0;
  double keep = 0.4;
  bool inject_fault = false;
};

/// Exact-oracle property suite on one random tiny model: detailed balance of
/// the random-scan kernel, stationarity of both kernels, the collapsed
/// chain's stationary law, the return-time mean, the survival tail slope and
/// a finite-difference gradient check.
std::vector<PropertyResult> verify_model(std::uint64_t seed, const VerifyOptions& options = {});

}  // namespace mclv
