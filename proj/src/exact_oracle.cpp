#include "mclv/exact_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/LU>

#include "mclv/numeric.hpp"

namespace mclv {

namespace {

constexpr Eigen::Index kBlock = 4096;

void require_enumerable(Eigen::Index units, const char* what) {
  if (units > kMaxEnumeratedUnits) {
    throw BudgetExceeded(std::string(what) + ": " + std::to_string(units) + " units exceeds the enumeration limit of " +
                         std::to_string(kMaxEnumeratedUnits));
  }
}

void require_chain_budget(const Rbm& params) {
  const Eigen::Index units = params.n_visible() + params.n_hidden();
  if (units > kMaxChainUnits) {
    throw BudgetExceeded("dense chain over " + std::to_string(units) + " units exceeds the limit of " +
                         std::to_string(kMaxChainUnits));
  }
}

// n_bits x count matrix whose column c holds the bits of code start + c.
Eigen::MatrixXd code_block(std::uint64_t start, Eigen::Index count, Eigen::Index n_bits) {
  Eigen::MatrixXd out(n_bits, count);
  for (Eigen::Index c = 0; c < count; ++c) {
    const std::uint64_t code = start + static_cast<std::uint64_t>(c);
    for (Eigen::Index i = 0; i < n_bits; ++i) out(i, c) = static_cast<double>((code >> i) & 1U);
  }
  return out;
}

// Unnormalized log marginal of each column of `states` on the enumerated side:
// linear' * states + sum softplus(coupling' * states + other_bias).
Eigen::RowVectorXd log_marginals(const Eigen::MatrixXd& states, const Eigen::MatrixXd& coupling,
                                 const Eigen::VectorXd& linear, const Eigen::VectorXd& other_bias,
                                 Eigen::MatrixXd* activation_out = nullptr) {
  Eigen::MatrixXd act = coupling.transpose() * states;
  act.colwise() += other_bias;
  Eigen::RowVectorXd out = linear.transpose() * states;
  out += softplus(act.array()).matrix().colwise().sum();
  if (activation_out) *activation_out = std::move(act);
  return out;
}

double log_partition_enumerating(const Eigen::MatrixXd& coupling, const Eigen::VectorXd& linear,
                                 const Eigen::VectorXd& other_bias) {
  const Eigen::Index n = linear.size();
  const std::uint64_t total = std::uint64_t{1} << n;
  LogSumExpAccumulator<double> acc;
  for (std::uint64_t start = 0; start < total; start += kBlock) {
    const auto count = static_cast<Eigen::Index>(std::min<std::uint64_t>(kBlock, total - start));
    acc.add_all(log_marginals(code_block(start, count, n), coupling, linear, other_bias));
  }
  return acc.value();
}

double bernoulli_code_probability(const Eigen::VectorXd& probs, std::uint64_t code) {
  double p = 1.0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) p *= ((code >> i) & 1U) ? probs(i) : 1.0 - probs(i);
  return p;
}

}  // namespace

double log_partition_over_hidden(const Rbm& params) {
  require_enumerable(params.n_hidden(), "log_partition_over_hidden");
  return log_partition_enumerating(params.weights.transpose(), params.hidden_bias, params.visible_bias);
}

double log_partition_over_visible(const Rbm& params) {
  require_enumerable(params.n_visible(), "log_partition_over_visible");
  return log_partition_enumerating(params.weights, params.visible_bias, params.hidden_bias);
}

double exact_log_partition(const Rbm& params) {
  return params.n_hidden() <= params.n_visible() ? log_partition_over_hidden(params)
                                                 : log_partition_over_visible(params);
}

double exact_log_likelihood(const Rbm& params, const std::vector<BitVector>& data, std::optional<double> log_z) {
  if (data.empty()) throw std::invalid_argument("exact_log_likelihood: empty data");
  const double lz = log_z ? *log_z : exact_log_partition(params);
  double total = 0.0;
  for (std::size_t start = 0; start < data.size(); start += kBlock) {
    const std::size_t end = std::min(data.size(), start + static_cast<std::size_t>(kBlock));
    Eigen::MatrixXd v(params.n_visible(), static_cast<Eigen::Index>(end - start));
    for (std::size_t n = start; n < end; ++n) {
      detail::check_visible(data[n], params);
      v.col(static_cast<Eigen::Index>(n - start)) = data[n].to_dense<double>();
    }
    total += log_marginals(v, params.weights, params.visible_bias, params.hidden_bias).sum();
  }
  return total / static_cast<double>(data.size()) - lz;
}

GradientEstimate exact_gradient(const Rbm& params, const std::vector<BitVector>& data) {
  if (data.empty()) throw std::invalid_argument("exact_gradient: empty data");
  const Eigen::Index n_v = params.n_visible();
  const Eigen::Index n_h = params.n_hidden();
  const double log_z = exact_log_partition(params);

  GradientEstimate g = GradientEstimate::zeros(n_v, n_h);
  // Positive phase with E[h | v_n].
  for (const auto& v_bits : data) {
    detail::check_visible(v_bits, params);
    const Eigen::VectorXd v = v_bits.to_dense<double>();
    const Eigen::VectorXd hp = hidden_conditional(v_bits, params);
    g.d_weights.noalias() += v * hp.transpose();
    g.d_visible_bias += v;
    g.d_hidden_bias += hp;
  }
  const double inv_n = 1.0 / static_cast<double>(data.size());
  g.d_weights *= inv_n;
  g.d_visible_bias *= inv_n;
  g.d_hidden_bias *= inv_n;

  // Negative phase: enumerate the smaller layer, marginalize the other.
  Eigen::MatrixXd neg_w = Eigen::MatrixXd::Zero(n_v, n_h);
  Eigen::VectorXd neg_b = Eigen::VectorXd::Zero(n_v);
  Eigen::VectorXd neg_a = Eigen::VectorXd::Zero(n_h);
  const bool over_hidden = n_h <= n_v;
  const Eigen::Index n_enum = over_hidden ? n_h : n_v;
  require_enumerable(n_enum, "exact_gradient");
  const std::uint64_t total = std::uint64_t{1} << n_enum;
  for (std::uint64_t start = 0; start < total; start += kBlock) {
    const auto count = static_cast<Eigen::Index>(std::min<std::uint64_t>(kBlock, total - start));
    const Eigen::MatrixXd states = code_block(start, count, n_enum);
    Eigen::MatrixXd act;
    Eigen::RowVectorXd logw =
        over_hidden ? log_marginals(states, params.weights.transpose(), params.hidden_bias, params.visible_bias, &act)
                    : log_marginals(states, params.weights, params.visible_bias, params.hidden_bias, &act);
    const Eigen::VectorXd p = (logw.array() - log_z).exp().transpose();
    const Eigen::MatrixXd cond = sigmoid(act.array()).matrix();
    const Eigen::MatrixXd weighted_cond = cond * p.asDiagonal();
    if (over_hidden) {
      neg_w.noalias() += weighted_cond * states.transpose();
      neg_b += cond * p;
      neg_a += states * p;
    } else {
      neg_w.noalias() += states * weighted_cond.transpose();
      neg_b += states * p;
      neg_a += cond * p;
    }
  }
  g.d_weights -= neg_w;
  g.d_visible_bias -= neg_b;
  g.d_hidden_bias -= neg_a;
  g.normalized = true;
  return g;
}

ExactSummary exact_summary(const Rbm& params, const std::vector<BitVector>& data) {
  ExactSummary s;
  s.log_z = exact_log_partition(params);
  s.log_likelihood = exact_log_likelihood(params, data, s.log_z);
  s.gradient = exact_gradient(params, data);
  return s;
}

Eigen::VectorXd joint_distribution(const Rbm& params) {
  require_chain_budget(params);
  const auto n_v = static_cast<std::size_t>(params.n_visible());
  const auto n_h = static_cast<std::size_t>(params.n_hidden());
  const std::uint64_t total = std::uint64_t{1} << (n_v + n_h);
  Eigen::VectorXd log_p(static_cast<Eigen::Index>(total));
  for (std::uint64_t code = 0; code < total; ++code) {
    log_p(static_cast<Eigen::Index>(code)) = -energy(state_from_code(code, n_v, n_h), params);
  }
  return (log_p.array() - log_sum_exp(log_p)).exp().matrix();
}

Eigen::MatrixXd transition_matrix(const Rbm& params, GibbsScan scan) {
  require_chain_budget(params);
  const auto n_v = static_cast<std::size_t>(params.n_visible());
  const auto n_h = static_cast<std::size_t>(params.n_hidden());
  const std::uint64_t n_vis_states = std::uint64_t{1} << n_v;
  const std::uint64_t n_hid_states = std::uint64_t{1} << n_h;
  const auto total = static_cast<Eigen::Index>(n_vis_states * n_hid_states);
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(total, total);

  if (scan == GibbsScan::AlternatingVH) {
    Eigen::MatrixXd v_given_h(n_hid_states, n_vis_states);
    Eigen::MatrixXd h_given_v(n_vis_states, n_hid_states);
    for (std::uint64_t h = 0; h < n_hid_states; ++h) {
      const Eigen::VectorXd probs = visible_conditional(BitVector::from_code(h, n_h), params);
      for (std::uint64_t v = 0; v < n_vis_states; ++v)
        v_given_h(static_cast<Eigen::Index>(h), static_cast<Eigen::Index>(v)) = bernoulli_code_probability(probs, v);
    }
    for (std::uint64_t v = 0; v < n_vis_states; ++v) {
      const Eigen::VectorXd probs = hidden_conditional(BitVector::from_code(v, n_v), params);
      for (std::uint64_t h = 0; h < n_hid_states; ++h)
        h_given_v(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(h)) = bernoulli_code_probability(probs, h);
    }
    for (Eigen::Index x = 0; x < total; ++x) {
      const auto h = static_cast<Eigen::Index>(static_cast<std::uint64_t>(x) >> n_v);
      for (std::uint64_t v2 = 0; v2 < n_vis_states; ++v2) {
        const double pv = v_given_h(h, static_cast<Eigen::Index>(v2));
        for (std::uint64_t h2 = 0; h2 < n_hid_states; ++h2) {
          p(x, static_cast<Eigen::Index>(v2 | (h2 << n_v))) = pv * h_given_v(static_cast<Eigen::Index>(v2),
                                                                            static_cast<Eigen::Index>(h2));
        }
      }
    }
    return p;
  }

  const double inv_units = 1.0 / static_cast<double>(n_v + n_h);
  for (Eigen::Index x = 0; x < total; ++x) {
    const JointState s = state_from_code(static_cast<std::uint64_t>(x), n_v, n_h);
    for (std::size_t u = 0; u < n_v + n_h; ++u) {
      const double on = u < n_v ? sigmoid(detail::visible_unit_activation(u, s.hidden, params))
                                : sigmoid(detail::hidden_unit_activation(u - n_v, s.visible, params));
      const bool bit = (static_cast<std::uint64_t>(x) >> u) & 1U;
      const auto flipped = static_cast<Eigen::Index>(static_cast<std::uint64_t>(x) ^ (std::uint64_t{1} << u));
      p(x, flipped) += inv_units * (bit ? 1.0 - on : on);
      p(x, x) += inv_units * (bit ? on : 1.0 - on);
    }
  }
  return p;
}

std::vector<bool> stopping_mask(const Rbm& params, const StoppingSet& stopping) {
  require_chain_budget(params);
  const auto n_v = static_cast<std::size_t>(params.n_visible());
  const auto n_h = static_cast<std::size_t>(params.n_hidden());
  if (stopping.n_hidden() != n_h) throw std::invalid_argument("stopping set does not match params");
  const std::uint64_t total = std::uint64_t{1} << (n_v + n_h);
  std::vector<bool> mask(total);
  for (std::uint64_t code = 0; code < total; ++code) {
    mask[code] = stopping.contains(BitVector::from_code(code >> n_v, n_h));
  }
  return mask;
}

CollapsedChain collapsed_transition(const Rbm& params, const StoppingSet& stopping, GibbsScan scan,
                                    const CollapsedChainOptions& options) {
  const Eigen::MatrixXd p = transition_matrix(params, scan);
  const Eigen::VectorXd pi = joint_distribution(params);
  const std::vector<bool> mask = stopping_mask(params, stopping);

  CollapsedChain out;
  std::vector<Eigen::Index> inside;
  for (std::size_t code = 0; code < mask.size(); ++code) {
    if (mask[code]) {
      inside.push_back(static_cast<Eigen::Index>(code));
    } else {
      out.outside_codes.push_back(code);
    }
  }
  double mass = 0.0;
  for (auto y : inside) mass += pi(y);
  for (auto y : inside) {
    const double w = options.inject_uniform_exit_fault ? 1.0 / static_cast<double>(inside.size()) : pi(y) / mass;
    out.start_distribution.emplace_back(static_cast<std::uint64_t>(y), w);
  }

  const auto n_out = static_cast<Eigen::Index>(out.outside_codes.size());
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(n_out + 1, n_out + 1);
  for (const auto& [y, w] : out.start_distribution) {
    const auto row = static_cast<Eigen::Index>(y);
    for (auto y2 : inside) t(0, 0) += w * p(row, y2);
    for (Eigen::Index i = 0; i < n_out; ++i) t(0, i + 1) += w * p(row, static_cast<Eigen::Index>(out.outside_codes[i]));
  }
  for (Eigen::Index i = 0; i < n_out; ++i) {
    const auto xi = static_cast<Eigen::Index>(out.outside_codes[i]);
    for (auto y : inside) t(i + 1, 0) += p(xi, y);
    for (Eigen::Index j = 0; j < n_out; ++j) t(i + 1, j + 1) = p(xi, static_cast<Eigen::Index>(out.outside_codes[j]));
  }
  out.transition = std::move(t);
  return out;
}

double ChainDiagnostics::survival_sum() const {
  double sum = tail_mass;
  for (double s : survival) sum += s;
  return sum;
}

ChainDiagnostics collapsed_chain(const Rbm& params, const StoppingSet& stopping, GibbsScan scan,
                                 const CollapsedChainOptions& options) {
  const CollapsedChain chain = collapsed_transition(params, stopping, scan, options);
  ChainDiagnostics d;
  d.outside_codes = chain.outside_codes;
  const auto n_out = static_cast<Eigen::Index>(chain.outside_codes.size());
  if (n_out == 0) {
    d.stationary = Eigen::VectorXd::Ones(1);
    d.spectral_gap = 1.0;
    d.survival = {1.0, 0.0};
    d.restricted_spectral_radius = 0.0;
    d.min_one_step_into_set = 1.0;
    return d;
  }

  d.stationary = stationary_distribution(chain.transition);
  d.spectral_gap = options.skip_spectral_gap
                       ? std::numeric_limits<double>::quiet_NaN()
                       : spectral_gap(chain.transition, d.stationary, options.power_iteration_cap,
                                      options.power_iteration_tolerance);

  const Eigen::MatrixXd q = chain.transition.bottomRightCorner(n_out, n_out);
  const Eigen::VectorXd visits =
      (Eigen::MatrixXd::Identity(n_out, n_out) - q).partialPivLu().solve(Eigen::VectorXd::Ones(n_out));
  d.expected_length = 1.0 + chain.transition.row(0).tail(n_out).dot(visits);
  d.restricted_spectral_radius = perron_root(q, options.power_iteration_cap);
  d.min_one_step_into_set = chain.transition.col(0).tail(n_out).minCoeff();

  // Z / Z_S straight from the joint distribution.
  const Eigen::VectorXd pi = joint_distribution(params);
  double outside_mass = 0.0;
  for (auto code : chain.outside_codes) outside_mass += pi(static_cast<Eigen::Index>(code));
  const double z_over_zs = 1.0 / std::max(1.0 - outside_mass, std::numeric_limits<double>::min());
  const auto k_max = static_cast<std::size_t>(std::ceil(50.0 * z_over_zs));

  d.survival.reserve(std::min<std::size_t>(k_max + 1, 1 << 20));
  d.survival.push_back(1.0);
  Eigen::RowVectorXd w = chain.transition.row(0).tail(n_out);
  d.survival.push_back(w.sum());
  for (std::size_t k = 2; k <= k_max && d.survival.back() > 1e-20; ++k) {
    w = w * q;
    d.survival.push_back(w.sum());
  }
  const std::size_t last = d.survival.size() - 1;
  if (last >= 2 && d.survival[last] > 0.0 && d.survival[last - 1] > 0.0) {
    const double ratio = d.survival[last] / d.survival[last - 1];
    if (ratio < 1.0) d.tail_mass = d.survival[last] * ratio / (1.0 - ratio);
  }
  return d;
}

double exact_mean_tour_length(const Rbm& params, const StoppingSet& stopping, GibbsScan scan) {
  CollapsedChainOptions options;
  options.skip_spectral_gap = true;
  return collapsed_chain(params, stopping, scan, options).mean_tour_length();
}

Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& transition) {
  const Eigen::Index n = transition.rows();
  Eigen::MatrixXd a = transition.transpose() - Eigen::MatrixXd::Identity(n, n);
  a.row(n - 1).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  rhs(n - 1) = 1.0;
  return a.partialPivLu().solve(rhs);
}

double spectral_gap(const Eigen::MatrixXd& transition, const Eigen::VectorXd& stationary, std::size_t max_iterations,
                    double tolerance) {
  const Eigen::Index n = transition.rows();
  if (n <= 1) return 1.0;
  Rng rng(0x5eed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  Eigen::RowVectorXd x(n);
  for (Eigen::Index i = 0; i < n; ++i) x(i) = unif(rng);
  const Eigen::RowVectorXd pi = stationary.transpose();
  x -= x.sum() * pi;
  x.normalize();

  double previous = std::numeric_limits<double>::quiet_NaN();
  double estimate = 0.0;
  std::size_t done = 0;
  std::size_t window = 32;
  while (done < max_iterations) {
    double log_growth = 0.0;
    std::size_t steps = 0;
    for (; steps < window && done < max_iterations; ++steps, ++done) {
      x = x * transition;
      x -= x.sum() * pi;
      const double norm = x.norm();
      if (norm == 0.0 || !std::isfinite(norm)) return 1.0;
      log_growth += std::log(norm);
      x /= norm;
    }
    estimate = std::exp(log_growth / static_cast<double>(steps));
    if (std::abs(estimate - previous) < tolerance * std::max(1.0, estimate)) break;
    previous = estimate;
    window = std::min<std::size_t>(window * 2, 1 << 14);
  }
  return std::clamp(1.0 - estimate, 0.0, 1.0);
}

double perron_root(const Eigen::MatrixXd& matrix, std::size_t max_iterations, double tolerance) {
  const Eigen::Index n = matrix.rows();
  if (n == 0) return 0.0;
  Eigen::RowVectorXd x = Eigen::RowVectorXd::Constant(n, 1.0 / static_cast<double>(n));
  double previous = -1.0;
  double r = 0.0;
  for (std::size_t it = 0; it < max_iterations; ++it) {
    Eigen::RowVectorXd y = x * matrix;
    const double mass = y.sum();
    if (mass <= 0.0) return 0.0;
    r = mass / x.sum();
    x = y / mass;
    if (std::abs(r - previous) < tolerance) break;
    previous = r;
  }
  return r;
}

TruncatedTourExpectation exact_truncated_tour_expectation(const Rbm& params, const StoppingSet& stopping,
                                                          GibbsScan scan, std::size_t k_max,
                                                          const Eigen::MatrixXd& statistic_table) {
  if (k_max == 0) throw std::invalid_argument("k_max must be positive");
  const Eigen::MatrixXd p = transition_matrix(params, scan);
  const Eigen::VectorXd pi = joint_distribution(params);
  const std::vector<bool> mask_bits = stopping_mask(params, stopping);
  const Eigen::Index n = p.rows();
  if (statistic_table.rows() != n) throw std::invalid_argument("statistic table needs one row per joint state");

  Eigen::VectorXd inside(n);
  for (Eigen::Index x = 0; x < n; ++x) inside(x) = mask_bits[static_cast<std::size_t>(x)] ? 1.0 : 0.0;
  const Eigen::VectorXd outside = Eigen::VectorXd::Ones(n) - inside;

  // hit[j](x) = P(enter the set within j steps | X = x), hit[0] = 0.
  std::vector<Eigen::VectorXd> hit(k_max + 1, Eigen::VectorXd::Zero(n));
  for (std::size_t j = 1; j <= k_max; ++j) {
    hit[j] = p * (inside + outside.cwiseProduct(hit[j - 1]));
  }

  // alpha(x) = P(X(t) = x and X(2..t) outside the set).
  Eigen::VectorXd alpha = pi.cwiseProduct(inside);
  alpha /= alpha.sum();
  TruncatedTourExpectation out;
  out.completed_probability = alpha.dot(hit[k_max]);
  out.completed_sum = Eigen::VectorXd::Zero(statistic_table.cols());
  for (std::size_t t = 1; t <= k_max; ++t) {
    out.completed_sum.noalias() += statistic_table.transpose() * alpha.cwiseProduct(hit[k_max + 1 - t]);
    alpha = (p.transpose() * alpha).cwiseProduct(outside);
  }
  return out;
}

Eigen::VectorXd exact_normalized_target(const Rbm& params, const StoppingSet& stopping,
                                        const Eigen::MatrixXd& statistic_table) {
  const Eigen::VectorXd pi = joint_distribution(params);
  const std::vector<bool> mask_bits = stopping_mask(params, stopping);
  double mass = 0.0;
  for (Eigen::Index x = 0; x < pi.size(); ++x) {
    if (mask_bits[static_cast<std::size_t>(x)]) mass += pi(x);
  }
  return statistic_table.transpose() * pi / mass;
}

double truncation_bias_bound(double sup_norm, const std::vector<double>& survival, double tail_mass,
                             std::size_t k_max) {
  double mean = tail_mass;
  for (double s : survival) mean += s;
  double head = 0.0;
  for (std::size_t k = 1; k + 1 <= k_max && k < survival.size(); ++k) head += survival[k];
  return sup_norm * (mean - head);
}

double truncation_bias_bound(double sup_norm, const ChainDiagnostics& chain, std::size_t k_max) {
  double head = 0.0;
  for (std::size_t k = 1; k + 1 <= k_max && k < chain.survival.size(); ++k) head += chain.survival[k];
  return sup_norm * (chain.expected_length - head);
}

}  // namespace mclv
