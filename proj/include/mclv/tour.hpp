#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "mclv/rbm.hpp"
#include "mclv/stopping_set.hpp"

namespace mclv {

struct TourConfig {
  /// Maximum tour length K; empty means grow K until the tour returns.
  std::optional<std::size_t> k_max = 1;
  /// Hard cap for dynamic tours; capped tours never enter an estimator.
  std::size_t k_dyn_cap = 1'000'000;
  GibbsScan scan = GibbsScan::AlternatingVH;

  static TourConfig fixed(std::size_t k, GibbsScan scan = GibbsScan::AlternatingVH);
  static TourConfig dynamic(std::size_t cap = 1'000'000, GibbsScan scan = GibbsScan::AlternatingVH);

  bool is_dynamic() const { return !k_max.has_value(); }
  /// Number of steps after which the tour is cut off.
  std::size_t step_limit() const { return k_max.value_or(k_dyn_cap); }
};

enum class StatisticKind { UnitF1, EnergyGradient, Custom };

/// Per-state statistic f summed along each tour.
struct StatisticSpec {
  StatisticKind kind = StatisticKind::Custom;
  Eigen::Index dimension = 0;
  /// B >= sup_x ||f(x)||_1
  double sup_norm = 0.0;
  std::function<void(const JointState&, Eigen::Ref<Eigen::VectorXd>)> accumulate;

  /// f(x) = 1
  static StatisticSpec unit();
  /// f(x) = dE/dW = (-v h', -v, -h) in the flatten() layout.
  static StatisticSpec energy_gradient(Eigen::Index n_visible, Eigen::Index n_hidden);
  static StatisticSpec custom(Eigen::Index dimension, std::function<Eigen::VectorXd(const JointState&)> f,
                              double sup_norm);
};

struct TourRecord {
  /// xi: states X(1..xi) visited before re-entering the set (or being cut off).
  std::size_t length = 0;
  /// The S-stopped flag.
  bool completed = false;
  /// Dynamic tour that hit k_dyn_cap.
  bool capped = false;
  /// sum_{t=1}^{length} f(X(t)) for each registered statistic.
  std::vector<Eigen::VectorXd> stat_sums;
  /// X(length + 1): the state that re-entered the set, or the state after the
  /// final step of a cut-off tour.
  JointState exit_state;
  /// Exit hidden state equals the start hidden state.
  bool returned_to_start = false;
  /// Index of the start hidden state inside the stopping set.
  std::size_t start_index = 0;
  std::optional<int> start_label;
};

/// One tour from a start drawn with probability exp(-E)/Z_S.
TourRecord run_tour(const Rbm& params, const StoppingSet& stopping, const TourConfig& config,
                    const std::vector<StatisticSpec>& stats, Rng& rng);

/// One tour from a given start state. The start's hidden part is not checked
/// against the set and never triggers stopping.
TourRecord run_tour_from(const JointState& start, const Rbm& params, const StoppingSet& stopping,
                         const TourConfig& config, const std::vector<StatisticSpec>& stats, Rng& rng);

struct TailSummary {
  std::size_t tours = 0;
  std::size_t completed = 0;
  std::size_t truncated = 0;
  std::size_t capped = 0;
  /// completed_by_length[k] = |C_k|; index 0 unused.
  std::vector<std::size_t> completed_by_length;
  /// survival[k] = fraction of tours known to have xi > k.
  std::vector<double> survival;
  /// Mean length of completed tours; NaN when none completed.
  double xi_hat = 0.0;

  double completed_fraction() const { return tours ? static_cast<double>(completed) / tours : 0.0; }
};

TailSummary summarize(const std::vector<TourRecord>& records);

struct BatchResult {
  std::vector<TourRecord> records;
  TailSummary tail;
  bool stale_stopping_set = false;
};

/// R independent tours. Tour r uses its own stream seeded from one draw of
/// `rng` and r, so results do not depend on `threads`.
BatchResult run_batch(const Rbm& params, const StoppingSet& stopping, const TourConfig& config,
                      const std::vector<StatisticSpec>& stats, std::size_t tours, Rng& rng,
                      std::size_t threads = 1);

struct TailFit {
  double alpha = 0.0;
  double slope = 0.0;
  std::size_t k_lo = 0;
  std::size_t k_hi = 0;
};

/// Least-squares slope of log p(xi > k) over k = k_lo.. the last k with at
/// least 30 tours beyond it; alpha = exp(slope) clamped into (0, 1). Needs
/// 100 completed tours of length >= 2.
std::optional<TailFit> fit_geometric_tail(const std::vector<TourRecord>& records, std::size_t k_lo = 1);
std::optional<TailFit> fit_geometric_tail(const TailSummary& tail, std::size_t k_lo = 1);

/// Label each record with labels[source example of its start state].
void assign_start_labels(std::vector<TourRecord>& records, const StoppingSet& stopping,
                         const std::vector<int>& labels);

/// CSV with header `k,count,p_gt_k`; count = |C_k|.
void write_ccdf_csv(std::ostream& out, const TailSummary& tail);

}  // namespace mclv
