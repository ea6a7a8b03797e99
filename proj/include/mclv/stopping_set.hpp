#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <unordered_map>
#include <vector>

#include "mclv/bit_vector.hpp"
#include "mclv/rbm.hpp"

namespace mclv {

/// Hash of the raw parameter bytes; used to detect a stopping set that was
/// built against different parameters than the ones it is sampled with.
std::uint64_t params_fingerprint(const Rbm& params);

/// Stopping set made of every joint state whose hidden part is one of a
/// finite list of hidden states, paired with every visible vector. Only the
/// hidden states are stored. Each carries log weight -F_H(h), so
/// log_Z_S = logsumexp(log_weights) is the log mass of the whole set.
class StoppingSet {
 public:
  /// Draws m hidden samples from p(h | v_n) for every example; repeated
  /// samples enter once (set semantics, weight is the free energy only).
  static StoppingSet build(const std::vector<BitVector>& data, const Rbm& params, std::size_t m, Rng& rng);

  /// Explicit hidden states; duplicates are collapsed.
  static StoppingSet from_hidden_states(const std::vector<BitVector>& hidden_states, const Rbm& params);

  /// Recomputes the weights under new parameters; the states stay fixed.
  void reweight(const Rbm& params);

  bool contains(const BitVector& hidden) const;
  std::optional<std::size_t> index_of(const BitVector& hidden) const;

  /// Hidden-state index drawn with probability exp(log_weight - log_Z_S),
  /// by binary search on the cumulative weights.
  std::size_t sample_index(Rng& rng) const;

  /// Joint start state with probability exp(-E(v, h)) / Z_S over the set:
  /// h by sample_index(), then v ~ p(v | h).
  JointState sample_start(const Rbm& params, Rng& rng) const;
  JointState sample_start(const Rbm& params, Rng& rng, std::size_t& index) const;

  std::size_t size() const { return hidden_states_.size(); }
  std::size_t n_hidden() const { return n_hidden_; }
  const std::vector<BitVector>& hidden_states() const { return hidden_states_; }
  const std::vector<double>& log_weights() const { return log_weights_; }
  double log_z_s() const { return log_z_s_; }
  std::size_t m() const { return m_; }
  std::size_t built_from() const { return built_from_; }
  /// Index of the first training example whose sample produced hidden state i
  /// (absent for sets built from explicit states).
  std::optional<std::size_t> source_example(std::size_t i) const;

  bool built_for(const Rbm& params) const { return params_fingerprint(params) == fingerprint_; }

  /// True iff the set misses at least one hidden state; unknown when n_hidden > 63.
  std::optional<bool> is_proper_subset() const;

  /// CSV with header `index,log_weight,source_example,hidden_bits`.
  void write_csv(std::ostream& out) const;

 private:
  StoppingSet() = default;
  void insert(const BitVector& hidden, std::optional<std::size_t> source);
  void finalize(const Rbm& params);

  std::size_t n_hidden_ = 0;
  std::vector<BitVector> hidden_states_;
  std::vector<std::optional<std::size_t>> sources_;
  std::unordered_map<BitVector, std::size_t, BitVectorHash> membership_;
  std::vector<double> log_weights_;
  std::vector<double> cumulative_;  // normalized, last entry 1
  double log_z_s_ = 0.0;
  std::size_t m_ = 0;
  std::size_t built_from_ = 0;
  std::uint64_t fingerprint_ = 0;
};

}  // namespace mclv
