#include "mclv/stopping_set.hpp"

#include <algorithm>
#include <cstring>
#include <ostream>
#include <stdexcept>

#include "mclv/numeric.hpp"

namespace mclv {

namespace {

std::uint64_t fnv1a(const void* data, std::size_t bytes, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < bytes; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::uint64_t params_fingerprint(const Rbm& params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto rows = static_cast<std::uint64_t>(params.n_visible());
  const auto cols = static_cast<std::uint64_t>(params.n_hidden());
  h = fnv1a(&rows, sizeof rows, h);
  h = fnv1a(&cols, sizeof cols, h);
  h = fnv1a(params.weights.data(), sizeof(double) * static_cast<std::size_t>(params.weights.size()), h);
  h = fnv1a(params.visible_bias.data(), sizeof(double) * static_cast<std::size_t>(params.visible_bias.size()), h);
  h = fnv1a(params.hidden_bias.data(), sizeof(double) * static_cast<std::size_t>(params.hidden_bias.size()), h);
  return h;
}

StoppingSet StoppingSet::build(const std::vector<BitVector>& data, const Rbm& params, std::size_t m, Rng& rng) {
  if (data.empty()) throw std::invalid_argument("StoppingSet::build: empty data");
  if (m == 0) throw std::invalid_argument("StoppingSet::build: m must be positive");
  StoppingSet out;
  out.n_hidden_ = static_cast<std::size_t>(params.n_hidden());
  out.m_ = m;
  out.built_from_ = data.size();
  out.membership_.reserve(data.size() * m);
  for (std::size_t n = 0; n < data.size(); ++n) {
    const Eigen::VectorXd probs = hidden_conditional(data[n], params);
    for (std::size_t r = 0; r < m; ++r) out.insert(sample_bernoulli(probs, rng), n);
  }
  out.finalize(params);
  return out;
}

StoppingSet StoppingSet::from_hidden_states(const std::vector<BitVector>& hidden_states, const Rbm& params) {
  if (hidden_states.empty()) throw std::invalid_argument("StoppingSet: no hidden states");
  StoppingSet out;
  out.n_hidden_ = static_cast<std::size_t>(params.n_hidden());
  for (const auto& h : hidden_states) {
    if (h.size() != out.n_hidden_) throw std::invalid_argument("StoppingSet: hidden length mismatch");
    out.insert(h, std::nullopt);
  }
  out.finalize(params);
  return out;
}

void StoppingSet::insert(const BitVector& hidden, std::optional<std::size_t> source) {
  const auto [it, inserted] = membership_.try_emplace(hidden, hidden_states_.size());
  if (!inserted) return;
  hidden_states_.push_back(hidden);
  sources_.push_back(source);
}

void StoppingSet::finalize(const Rbm& params) {
  log_weights_.resize(hidden_states_.size());
  for (std::size_t i = 0; i < hidden_states_.size(); ++i) {
    log_weights_[i] = -hidden_free_energy(hidden_states_[i], params);
  }
  const Eigen::Map<const Eigen::VectorXd> lw(log_weights_.data(), static_cast<Eigen::Index>(log_weights_.size()));
  log_z_s_ = log_sum_exp(lw);
  cumulative_.resize(log_weights_.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < log_weights_.size(); ++i) {
    acc += std::exp(log_weights_[i] - log_z_s_);
    cumulative_[i] = acc;
  }
  for (auto& c : cumulative_) c /= acc;
  cumulative_.back() = 1.0;
  fingerprint_ = params_fingerprint(params);
}

void StoppingSet::reweight(const Rbm& params) {
  if (static_cast<std::size_t>(params.n_hidden()) != n_hidden_) {
    throw std::invalid_argument("StoppingSet::reweight: hidden size mismatch");
  }
  finalize(params);
}

bool StoppingSet::contains(const BitVector& hidden) const { return membership_.find(hidden) != membership_.end(); }

std::optional<std::size_t> StoppingSet::index_of(const BitVector& hidden) const {
  const auto it = membership_.find(hidden);
  if (it == membership_.end()) return std::nullopt;
  return it->second;
}

std::size_t StoppingSet::sample_index(Rng& rng) const {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  return std::min(static_cast<std::size_t>(it - cumulative_.begin()), cumulative_.size() - 1);
}

JointState StoppingSet::sample_start(const Rbm& params, Rng& rng) const {
  std::size_t index = 0;
  return sample_start(params, rng, index);
}

JointState StoppingSet::sample_start(const Rbm& params, Rng& rng, std::size_t& index) const {
  index = sample_index(rng);
  const BitVector& h = hidden_states_[index];
  return {sample_bernoulli(visible_conditional(h, params), rng), h};
}

std::optional<std::size_t> StoppingSet::source_example(std::size_t i) const { return sources_.at(i); }

std::optional<bool> StoppingSet::is_proper_subset() const {
  if (n_hidden_ > 63) return std::nullopt;
  return hidden_states_.size() < (std::uint64_t{1} << n_hidden_);
}

void StoppingSet::write_csv(std::ostream& out) const {
  out << "index,log_weight,source_example,hidden_bits\n";
  out.precision(17);
  for (std::size_t i = 0; i < hidden_states_.size(); ++i) {
    out << i << ',' << log_weights_[i] << ',';
    if (sources_[i]) out << *sources_[i];
    out << ',' << hidden_states_[i].to_string() << '\n';
  }
}

}  // namespace mclv
