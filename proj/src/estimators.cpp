#include "mclv/estimators.hpp"

#include <cmath>
#include <limits>

#include "mclv/data_io.hpp"
#include "mclv/numeric.hpp"

namespace mclv {

namespace {

struct PositivePhase {
  Eigen::MatrixXd weights;
  Eigen::VectorXd visible;
  Eigen::VectorXd hidden;
};

// Batch means of v_n E[h | v_n]', v_n and E[h | v_n].
PositivePhase positive_phase(const std::vector<BitVector>& batch, const Rbm& params) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  for (const auto& v : batch) detail::check_visible(v, params);
  const Eigen::MatrixXd v = to_matrix(batch);
  Eigen::MatrixXd act = params.weights.transpose() * v;
  act.colwise() += params.hidden_bias;
  const Eigen::MatrixXd hp = sigmoid(act.array()).matrix();
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  return {inv_n * v * hp.transpose(), inv_n * v.rowwise().sum(), inv_n * hp.rowwise().sum()};
}

// The same statistics with the last chain states in place of the data.
PositivePhase chain_phase(const std::vector<JointState>& states, const Rbm& params) {
  std::vector<BitVector> visible;
  visible.reserve(states.size());
  for (const auto& s : states) visible.push_back(s.visible);
  return positive_phase(visible, params);
}

GradientEstimate difference(const PositivePhase& pos, const PositivePhase& neg) {
  GradientEstimate g;
  g.d_weights = pos.weights - neg.weights;
  g.d_visible_bias = pos.visible - neg.visible;
  g.d_hidden_bias = pos.hidden - neg.hidden;
  g.normalized = true;
  return g;
}

}  // namespace

FHatResult f_hat(const std::vector<TourRecord>& records, const StoppingSet& stopping, std::size_t stat_index,
                 std::optional<double> sup_norm) {
  FHatResult out;
  out.log_z_s = stopping.log_z_s();
  Eigen::VectorXd sum;
  Eigen::VectorXd sum_sq;
  std::size_t completed = 0;
  for (const auto& r : records) {
    if (!r.completed) continue;
    const Eigen::VectorXd& s = r.stat_sums.at(stat_index);
    if (completed == 0) {
      sum = Eigen::VectorXd::Zero(s.size());
      sum_sq = Eigen::VectorXd::Zero(s.size());
    }
    sum += s;
    sum_sq += s.cwiseAbs2();
    ++completed;
  }
  if (completed == 0) throw NoCompletedTours();
  const double c = static_cast<double>(completed);
  out.completed_tours = completed;
  out.mean_stat = sum / c;
  if (completed > 1) {
    const Eigen::VectorXd var = ((sum_sq - c * out.mean_stat.cwiseAbs2()) / (c - 1.0)).cwiseMax(0.0);
    out.std_error = (var / c).cwiseSqrt();
  } else {
    out.std_error = Eigen::VectorXd::Constant(out.mean_stat.size(), std::numeric_limits<double>::infinity());
  }

  if (sup_norm) {
    const TailSummary tail = summarize(records);
    std::size_t k_cut = 0;
    for (const auto& r : records) {
      if (!r.completed && !r.capped) k_cut = std::max(k_cut, r.length);
    }
    double beyond = 0.0;
    if (k_cut > 0 && k_cut < tail.survival.size()) {
      double ratio = 0.0;
      if (const auto fit = fit_geometric_tail(tail)) {
        ratio = fit->alpha;
      } else if (tail.survival[k_cut - 1] > 0.0) {
        ratio = tail.survival[k_cut] / tail.survival[k_cut - 1];
      }
      beyond = ratio < 1.0 ? tail.survival[k_cut] / (1.0 - ratio) : std::numeric_limits<double>::infinity();
    }
    out.bias_bound = *sup_norm * (1.0 + beyond);
  }
  return out;
}

GradientEstimate lvs_gradient(const std::vector<BitVector>& batch, const Rbm& params, const StoppingSet& stopping,
                              const TourConfig& config, std::size_t tours, Rng& rng, bool normalize,
                              std::size_t threads) {
  const PositivePhase pos = positive_phase(batch, params);
  const Eigen::Index n_v = params.n_visible();
  const Eigen::Index n_h = params.n_hidden();
  const std::vector<StatisticSpec> stats{StatisticSpec::energy_gradient(n_v, n_h)};
  const BatchResult result = run_batch(params, stopping, config, stats, tours, rng, threads);

  GradientEstimate g = GradientEstimate::zeros(n_v, n_h);
  g.normalized = normalize;
  g.completed_tours = result.tail.completed;
  g.completed_fraction = result.tail.completed_fraction();
  if (result.tail.completed == 0) {
    g.xi_hat = std::numeric_limits<double>::quiet_NaN();
    return g;
  }

  // Sum of dE/dW = -(v h', v, h) over every state of every completed tour.
  Eigen::VectorXd energy_grad_sum = Eigen::VectorXd::Zero(stats[0].dimension);
  double length_sum = 0.0;
  for (const auto& r : result.records) {
    if (!r.completed) continue;
    energy_grad_sum += r.stat_sums[0];
    length_sum += static_cast<double>(r.length);
  }
  const double completed = static_cast<double>(result.tail.completed);
  g.xi_hat = length_sum / completed;

  const double pos_scale = normalize ? 1.0 : g.xi_hat;
  const double neg_scale = normalize ? 1.0 / length_sum : 1.0 / completed;
  const Rbm neg = unflatten_params(energy_grad_sum, n_v, n_h);
  g.d_weights = pos_scale * pos.weights + neg_scale * neg.weights;
  g.d_visible_bias = pos_scale * pos.visible + neg_scale * neg.visible_bias;
  g.d_hidden_bias = pos_scale * pos.hidden + neg_scale * neg.hidden_bias;
  return g;
}

JointState cd_negative_sample(const JointState& start, const Rbm& params, std::size_t k, Rng& rng) {
  JointState x = start;
  for (std::size_t step = 0; step < k; ++step) gibbs_update(x, params, GibbsScan::AlternatingVH, rng);
  return x;
}

GradientEstimate cd_gradient(const std::vector<BitVector>& batch, const Rbm& params, std::size_t k, Rng& rng) {
  if (k == 0) throw std::invalid_argument("cd_gradient: K must be positive");
  const PositivePhase pos = positive_phase(batch, params);
  std::vector<JointState> finals;
  finals.reserve(batch.size());
  for (const auto& v : batch) {
    JointState start{v, sample_bernoulli(hidden_conditional(v, params), rng)};
    finals.push_back(cd_negative_sample(start, params, k, rng));
  }
  GradientEstimate g = difference(pos, chain_phase(finals, params));
  g.completed_tours = batch.size();
  return g;
}

GradientEstimate pcd_gradient(const std::vector<BitVector>& batch, const Rbm& params, std::size_t k,
                              PersistentChains& chains, Rng& rng) {
  if (k == 0) throw std::invalid_argument("pcd_gradient: K must be positive");
  const PositivePhase pos = positive_phase(batch, params);
  if (!chains.initialized()) {
    chains.states.reserve(batch.size());
    for (const auto& v : batch) {
      JointState start{v, sample_bernoulli(hidden_conditional(v, params), rng)};
      chains.states.push_back(cd_negative_sample(start, params, k, rng));
    }
  } else {
    for (auto& state : chains.states) state = cd_negative_sample(state, params, k, rng);
  }
  GradientEstimate g = difference(pos, chain_phase(chains.states, params));
  g.completed_tours = chains.states.size();
  return g;
}

InspectionParadoxReport inspection_paradox_from_lengths(const std::vector<std::size_t>& lengths) {
  InspectionParadoxReport rep;
  rep.tours = lengths.size();
  if (lengths.empty()) return rep;
  std::size_t max_len = 0;
  double total = 0.0;
  double total_sq = 0.0;
  for (auto l : lengths) {
    max_len = std::max(max_len, l);
    total += static_cast<double>(l);
    total_sq += static_cast<double>(l) * static_cast<double>(l);
  }
  rep.plain.assign(max_len + 1, 0.0);
  rep.length_biased.assign(max_len + 1, 0.0);
  for (auto l : lengths) {
    rep.plain[l] += 1.0 / static_cast<double>(lengths.size());
    rep.length_biased[l] += static_cast<double>(l) / total;
  }
  rep.plain_mean = total / static_cast<double>(lengths.size());
  rep.length_biased_mean = total_sq / total;
  return rep;
}

InspectionParadoxReport inspection_paradox_report(const Rbm& params, const StoppingSet& stopping, std::size_t tours,
                                                  Rng& rng, const TourConfig& config) {
  const BatchResult result = run_batch(params, stopping, config, {}, tours, rng);
  std::vector<std::size_t> lengths;
  lengths.reserve(result.records.size());
  for (const auto& r : result.records) {
    if (r.completed) lengths.push_back(r.length);
  }
  return inspection_paradox_from_lengths(lengths);
}

}  // namespace mclv
