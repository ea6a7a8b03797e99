#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "mclv/gradient.hpp"
#include "mclv/rbm.hpp"
#include "mclv/stopping_set.hpp"
#include "mclv/tour.hpp"

namespace mclv {

class NoCompletedTours : public std::runtime_error {
 public:
  NoCompletedTours() : std::runtime_error("no completed tours") {}
};

/// Tour estimate of F(W, f) = sum_x f(x) exp(-E(x)). The estimate is kept as
/// Z_S times a per-unit-mass mean so it never has to be exponentiated.
struct FHatResult {
  /// (sum over completed tours of stat_sum) / completed_tours = F_hat / Z_S.
  Eigen::VectorXd mean_stat;
  /// Standard error of mean_stat from tour-to-tour variation.
  Eigen::VectorXd std_error;
  double log_z_s = 0.0;
  std::size_t completed_tours = 0;
  /// Truncation bias bound on mean_stat, B * (1 + sum_{k>=K} p(xi > k)),
  /// with the survival tail beyond K extrapolated geometrically.
  std::optional<double> bias_bound;

  Eigen::VectorXd value() const { return std::exp(log_z_s) * mean_stat; }
  /// log of each entry; only meaningful for non-negative statistics.
  Eigen::VectorXd log_value() const { return (mean_stat.array().log() + log_z_s).matrix(); }
};

/// F_hat from completed tours; truncated and capped tours are ignored.
/// Throws NoCompletedTours.
FHatResult f_hat(const std::vector<TourRecord>& records, const StoppingSet& stopping,
                 std::size_t stat_index = 0, std::optional<double> sup_norm = std::nullopt);

/// LVS-K: positive phase scaled by the mean tour length minus the summed
/// energy gradients of every state of every completed tour, over the number
/// of completed tours. With `normalize` the result is divided by the mean
/// tour length. When no tour completes, returns zeros with completed_tours 0.
GradientEstimate lvs_gradient(const std::vector<BitVector>& batch, const Rbm& params, const StoppingSet& stopping,
                              const TourConfig& config, std::size_t tours, Rng& rng, bool normalize = true,
                              std::size_t threads = 1);

/// Final state of k alternating Gibbs steps from `start`.
JointState cd_negative_sample(const JointState& start, const Rbm& params, std::size_t k, Rng& rng);

/// CD-K: chains start at (v_n, h_n ~ p(h|v_n)); negative statistics from the
/// last state, Rao-Blackwellized over its hidden layer.
GradientEstimate cd_gradient(const std::vector<BitVector>& batch, const Rbm& params, std::size_t k, Rng& rng);

struct PersistentChains {
  std::vector<JointState> states;
  bool initialized() const { return !states.empty(); }
};

/// PCD-K. Uninitialized chains start from the batch exactly as CD-K does.
GradientEstimate pcd_gradient(const std::vector<BitVector>& batch, const Rbm& params, std::size_t k,
                              PersistentChains& chains, Rng& rng);

struct InspectionParadoxReport {
  /// plain[k] = fraction of tours of length k.
  std::vector<double> plain;
  /// length_biased[k] = fraction of time steps spent in tours of length k.
  std::vector<double> length_biased;
  double plain_mean = 0.0;
  double length_biased_mean = 0.0;
  std::size_t tours = 0;
};

/// Length-biased view of a tour-length sample: a fixed time point lands in a
/// tour of length k with probability k p(xi = k) / E[xi].
InspectionParadoxReport inspection_paradox_from_lengths(const std::vector<std::size_t>& lengths);

/// Runs dynamic tours and reports both distributions of their lengths.
InspectionParadoxReport inspection_paradox_report(const Rbm& params, const StoppingSet& stopping,
                                                  std::size_t tours, Rng& rng,
                                                  const TourConfig& config = TourConfig::dynamic());

}  // namespace mclv
