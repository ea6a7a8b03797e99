#pragma once

// Brute-force ground truth for small models. Everything here enumerates
// states, so the cost is exponential in the model size; each entry point
// checks an explicit budget and throws BudgetExceeded past it.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "mclv/gradient.hpp"
#include "mclv/rbm.hpp"
#include "mclv/stopping_set.hpp"

namespace mclv {

class BudgetExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Largest side that may be enumerated for log Z, log-likelihood and gradient.
inline constexpr Eigen::Index kMaxEnumeratedUnits = 25;
/// Largest n_visible + n_hidden for dense transition matrices.
inline constexpr Eigen::Index kMaxChainUnits = 14;

/// log Z by marginalizing the larger layer analytically and enumerating
/// the smaller one.
double exact_log_partition(const Rbm& params);
/// log Z = logsumexp_h(-F_H(h)); requires n_hidden <= kMaxEnumeratedUnits.
double log_partition_over_hidden(const Rbm& params);
/// log Z = logsumexp_v(-F_V(v)); requires n_visible <= kMaxEnumeratedUnits.
double log_partition_over_visible(const Rbm& params);

/// Mean of log p(v_n) over `data`. `log_z` skips the partition computation.
double exact_log_likelihood(const Rbm& params, const std::vector<BitVector>& data,
                            std::optional<double> log_z = std::nullopt);

/// Exact ascent direction of the mean log-likelihood.
GradientEstimate exact_gradient(const Rbm& params, const std::vector<BitVector>& data);

struct ExactSummary {
  double log_z = 0.0;
  double log_likelihood = 0.0;
  GradientEstimate gradient;
};

ExactSummary exact_summary(const Rbm& params, const std::vector<BitVector>& data);

// ---------------------------------------------------------------------------
// Dense chains over the joint state space. States are indexed by
// state_code(): visible bits low, hidden bits high.

/// p(x; W) for every joint-state code.
Eigen::VectorXd joint_distribution(const Rbm& params);

/// Row-stochastic transition matrix of one Gibbs step.
Eigen::MatrixXd transition_matrix(const Rbm& params, GibbsScan scan);

/// Membership of each joint-state code in the stopping set.
std::vector<bool> stopping_mask(const Rbm& params, const StoppingSet& stopping);

struct CollapsedChainOptions {
  /// Test hook: exit the super-state with uniform weights over its members
  /// instead of exp(-E(y))/Z_S, which breaks the stationary identity.
  bool inject_uniform_exit_fault = false;
  /// Skip the power iteration for the spectral gap (reported as NaN).
  bool skip_spectral_gap = false;
  std::size_t power_iteration_cap = 1'000'000;
  double power_iteration_tolerance = 1e-12;
};

/// Transition matrix of the chain with the stopping set merged into one
/// state (index 0); `outside_codes[i]` is the joint code of index i + 1.
struct CollapsedChain {
  Eigen::MatrixXd transition;
  std::vector<std::uint64_t> outside_codes;
  /// exp(-E(y)) / Z_S for each member code, in code order.
  std::vector<std::pair<std::uint64_t, double>> start_distribution;
};

CollapsedChain collapsed_transition(const Rbm& params, const StoppingSet& stopping, GibbsScan scan,
                                    const CollapsedChainOptions& options = {});

struct ChainDiagnostics {
  /// Stationary distribution of the collapsed chain, super-state first.
  Eigen::VectorXd stationary;
  /// 1 - |second eigenvalue| of the collapsed chain.
  double spectral_gap = 1.0;
  /// survival[k] = p(xi > k); survival[0] = 1.
  std::vector<double> survival;
  /// Geometric extrapolation of sum_{k > survival.size()-1} p(xi > k).
  double tail_mass = 0.0;
  /// Perron root of the transition matrix restricted to states outside the set.
  double restricted_spectral_radius = 0.0;
  /// min over states outside the set of the one-step probability into it.
  double min_one_step_into_set = 1.0;
  /// Indices of the collapsed transition matrix, for reference.
  std::vector<std::uint64_t> outside_codes;
  /// E[xi] = 1 + mu (I - Q)^{-1} 1, solved directly.
  double expected_length = 1.0;

  double mean_tour_length() const { return expected_length; }
  /// sum_k survival[k] + tail_mass; agrees with expected_length up to the
  /// truncation of the survival curve.
  double survival_sum() const;
};

/// Exact diagnostics of the collapsed chain. The survival curve is run to
/// ceil(50 * Z / Z_S) steps. Requires n_visible + n_hidden <= kMaxChainUnits
/// and a non-empty set; a set covering every hidden state yields the
/// degenerate chain with survival {1, 0}.
ChainDiagnostics collapsed_chain(const Rbm& params, const StoppingSet& stopping, GibbsScan scan,
                                 const CollapsedChainOptions& options = {});

/// E[xi] for tours started from exp(-E)/Z_S.
double exact_mean_tour_length(const Rbm& params, const StoppingSet& stopping, GibbsScan scan);

/// Stationary row vector of a row-stochastic matrix (direct LU solve).
Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& transition);

/// 1 - |lambda_2| by power iteration on the deflated matrix P - 1 pi'.
double spectral_gap(const Eigen::MatrixXd& transition, const Eigen::VectorXd& stationary,
                    std::size_t max_iterations = 1'000'000, double tolerance = 1e-12);

/// Spectral radius of a non-negative matrix by power iteration.
double perron_root(const Eigen::MatrixXd& matrix, std::size_t max_iterations = 1'000'000,
                   double tolerance = 1e-13);

/// E[sum_{t<=xi} f(X(t)) ; xi <= k_max] and p(xi <= k_max) for tours started
/// from exp(-E)/Z_S, computed by forward/backward recursions on the chain.
/// `statistic_table` has one row per joint-state code.
struct TruncatedTourExpectation {
  Eigen::VectorXd completed_sum;
  double completed_probability = 0.0;
};

TruncatedTourExpectation exact_truncated_tour_expectation(const Rbm& params, const StoppingSet& stopping,
                                                          GibbsScan scan, std::size_t k_max,
                                                          const Eigen::MatrixXd& statistic_table);

/// sum_x f(x) p(x) / p(S): the value F / Z_S that tour estimators target.
Eigen::VectorXd exact_normalized_target(const Rbm& params, const StoppingSet& stopping,
                                        const Eigen::MatrixXd& statistic_table);

/// B * (E[xi] - sum_{k=1}^{K-1} p(xi > k)) from an exact survival curve.
double truncation_bias_bound(double sup_norm, const std::vector<double>& survival, double tail_mass,
                             std::size_t k_max);
/// Same bound with E[xi] taken from the direct solve.
double truncation_bias_bound(double sup_norm, const ChainDiagnostics& chain, std::size_t k_max);

}  // namespace mclv
