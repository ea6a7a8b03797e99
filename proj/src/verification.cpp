#include "mclv/verification.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "mclv/exact_oracle.hpp"

namespace mclv {

Rbm random_model(std::size_t n_visible, std::size_t n_hidden, double scale, Rng& rng) {
  std::normal_distribution<double> normal(0.0, scale);
  Rbm params = Rbm::zeros(static_cast<Eigen::Index>(n_visible), static_cast<Eigen::Index>(n_hidden));
  for (Eigen::Index j = 0; j < params.weights.cols(); ++j) {
    for (Eigen::Index i = 0; i < params.weights.rows(); ++i) params.weights(i, j) = normal(rng);
  }
  for (Eigen::Index i = 0; i < params.visible_bias.size(); ++i) params.visible_bias(i) = normal(rng);
  for (Eigen::Index j = 0; j < params.hidden_bias.size(); ++j) params.hidden_bias(j) = normal(rng);
  return params;
}

StoppingSet random_stopping_set(const Rbm& params, double keep, Rng& rng) {
  const auto n_h = static_cast<std::size_t>(params.n_hidden());
  if (n_h > 20) throw std::invalid_argument("random_stopping_set: too many hidden units");
  const std::uint64_t count = std::uint64_t{1} << n_h;
  std::bernoulli_distribution take(keep);
  std::vector<BitVector> states;
  for (std::uint64_t c = 0; c < count; ++c) {
    if (take(rng)) states.push_back(BitVector::from_code(c, n_h));
  }
  if (states.empty()) {
    states.push_back(BitVector::from_code(std::uniform_int_distribution<std::uint64_t>(0, count - 1)(rng), n_h));
  }
  if (states.size() == count && count > 1) states.erase(states.begin() + static_cast<std::ptrdiff_t>(rng() % count));
  return StoppingSet::from_hidden_states(states, params);
}

namespace {

double detailed_balance_error(const Eigen::MatrixXd& p, const Eigen::VectorXd& pi) {
  const Eigen::MatrixXd flow = pi.asDiagonal() * p;
  return (flow - flow.transpose()).cwiseAbs().maxCoeff();
}

double stationarity_error(const Eigen::MatrixXd& p, const Eigen::VectorXd& pi) {
  return (pi.transpose() * p - pi.transpose()).cwiseAbs().maxCoeff();
}

// Collapsed stationary law against p(S) = Z_S / Z and p(x) outside S.
double collapsed_error(const ChainDiagnostics& d, const Eigen::VectorXd& pi, double set_mass) {
  double err = std::abs(d.stationary(0) - set_mass);
  for (std::size_t i = 0; i < d.outside_codes.size(); ++i) {
    err = std::max(err, std::abs(d.stationary(static_cast<Eigen::Index>(i + 1)) -
                                 pi(static_cast<Eigen::Index>(d.outside_codes[i]))));
  }
  return err;
}

// |log(s[k+1] / s[k]) - log rho(Q)| at the deepest well-resolved k.
double tail_slope_error(const ChainDiagnostics& d) {
  const auto& s = d.survival;
  std::size_t k = 0;
  for (std::size_t i = 1; i + 1 < s.size(); ++i) {
    if (s[i + 1] > 1e-14) k = i;
  }
  if (k == 0 || d.restricted_spectral_radius <= 0.0) return 0.0;
  return std::abs(std::log(s[k + 1] / s[k]) - std::log(d.restricted_spectral_radius));
}

double finite_difference_error(const Rbm& params, const std::vector<BitVector>& data, double step) {
  const Eigen::VectorXd g = flatten(exact_gradient(params, data));
  const Eigen::VectorXd theta = flatten(params);
  const auto n_v = params.n_visible();
  const auto n_h = params.n_hidden();
  double err = 0.0;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    Eigen::VectorXd up = theta;
    Eigen::VectorXd down = theta;
    up(i) += step;
    down(i) -= step;
    const double fd = (exact_log_likelihood(unflatten_params(up, n_v, n_h), data) -
                       exact_log_likelihood(unflatten_params(down, n_v, n_h), data)) /
                      (2.0 * step);
    err = std::max(err, std::abs(fd - g(i)));
  }
  return err;
}

}  // namespace

std::vector<PropertyResult> verify_model(std::uint64_t seed, const VerifyOptions& options) {
  Rng rng(seed);
  const Rbm params = random_model(options.n_visible, options.n_hidden, options.weight_scale, rng);
  const StoppingSet stopping = random_stopping_set(params, options.keep, rng);
  std::vector<BitVector> data;
  for (int n = 0; n < 5; ++n) {
    data.push_back(BitVector::from_code(rng() % (std::uint64_t{1} << options.n_visible), options.n_visible));
  }

  const Eigen::VectorXd pi = joint_distribution(params);
  const double log_z = exact_log_partition(params);
  const double set_mass = std::exp(stopping.log_z_s() - log_z);

  std::vector<PropertyResult> out;
  auto check = [&](const std::string& name, double value, double tol) {
    out.push_back({seed, name, value, tol, value <= tol, false});
  };
  auto info = [&](const std::string& name, double value) { out.push_back({seed, name, value, 0.0, true, true}); };

  CollapsedChainOptions chain_options;
  chain_options.inject_uniform_exit_fault = options.inject_fault;

  const Eigen::MatrixXd p_random = transition_matrix(params, GibbsScan::RandomScan);
  const Eigen::MatrixXd p_alt = transition_matrix(params, GibbsScan::AlternatingVH);
  check("detailed_balance", detailed_balance_error(p_random, pi), 1e-12);
  check("stationary_alternating", stationarity_error(p_alt, pi), 1e-12);

  const ChainDiagnostics d_random = collapsed_chain(params, stopping, GibbsScan::RandomScan, chain_options);
  const ChainDiagnostics d_alt = collapsed_chain(params, stopping, GibbsScan::AlternatingVH, chain_options);
  check("collapsed_stationary_random", collapsed_error(d_random, pi, set_mass), 1e-9);
  check("collapsed_stationary_alternating", collapsed_error(d_alt, pi, set_mass), 1e-9);

  const CollapsedChain collapsed = collapsed_transition(params, stopping, GibbsScan::RandomScan, chain_options);
  check("collapsed_detailed_balance", detailed_balance_error(collapsed.transition, d_random.stationary), 1e-12);

  const double kac = std::exp(log_z - stopping.log_z_s());
  check("kac_random", std::abs(d_random.mean_tour_length() / kac - 1.0), 1e-8);
  check("kac_alternating", std::abs(d_alt.mean_tour_length() / kac - 1.0), 1e-8);

  check("tail_slope", tail_slope_error(d_alt), 1e-3);
  check("tail_below_entry_bound",
        std::max(0.0, d_alt.restricted_spectral_radius - (1.0 - d_alt.min_one_step_into_set)), 1e-12);

  check("gradient_finite_difference", finite_difference_error(params, data, 1e-5), 1e-6);

  info("spectral_gap_alternating", spectral_gap(p_alt, pi));
  info("spectral_gap_collapsed_alternating", d_alt.spectral_gap);
  info("spectral_gap_random", spectral_gap(p_random, pi));
  info("spectral_gap_collapsed_random", d_random.spectral_gap);
  return out;
}

}  // namespace mclv
