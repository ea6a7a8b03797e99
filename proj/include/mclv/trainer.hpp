#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mclv/data_io.hpp"
#include "mclv/rbm.hpp"

namespace mclv {

enum class EstimatorKind { CD, PCD, LVS, Exact };

const char* to_string(EstimatorKind kind);
std::optional<EstimatorKind> parse_estimator(const std::string& name);

/// eta_t = lr0 * tau / (tau + t) over epoch index t.
struct RobbinsMonro {
  double tau = 50.0;
  double rate(double lr0, std::size_t epoch) const { return lr0 * tau / (tau + static_cast<double>(epoch)); }
};

struct TrainConfig {
  EstimatorKind estimator = EstimatorKind::LVS;
  std::size_t k = 1;
  bool dynamic_k = false;
  std::size_t k_dyn_cap = 1'000'000;
  std::size_t epochs = 100;
  /// CD-1 epochs run first when the estimator is LVS.
  std::size_t warmup_epochs = 15;
  std::size_t batch_size = 100;
  double lr0 = 0.1;
  RobbinsMonro schedule;
  std::size_t m = 1;
  std::uint64_t seed = 0;
  std::size_t eval_every = 1;
  std::size_t n_hidden = 32;
  std::size_t threads = 1;
  bool normalize = true;
  GibbsScan scan = GibbsScan::AlternatingVH;

  void validate() const;
};

struct TrainLogRow {
  std::size_t epoch = 0;
  double lr = 0.0;
  /// NaN when exact evaluation is out of budget.
  double train_log_likelihood = 0.0;
  double test_log_likelihood = 0.0;
  double xi_hat = 1.0;
  double completed_fraction = 1.0;
  std::size_t skipped_updates = 0;
  std::size_t capped_tours = 0;
  double wall_time = 0.0;
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainResult {
  Rbm params;
  std::vector<TrainLogRow> log;
  std::size_t skipped_updates = 0;
};

/// U(-c, c) weights with c = 0.1 / sqrt(n_V + n_H), zero hidden biases and
/// visible biases log(p_i / (1 - p_i)), p_i clamped to [1/(2N), 1 - 1/(2N)].
Rbm init_params(const std::vector<BitVector>& data, std::size_t n_hidden, Rng& rng);

/// Mean exact log p(v_n); `log_z` is required when the model is too large
/// to enumerate.
double evaluate(const Rbm& params, const std::vector<BitVector>& data, std::optional<double> log_z = std::nullopt);

/// Plain SGD, no momentum or weight decay: W <- W + eta_t g.
TrainResult train(const std::vector<BitVector>& data, const std::vector<BitVector>& test, const TrainConfig& config,
                  const std::function<void(const TrainLogRow&)>& on_eval = {});

/// Training-log CSV (everything but wall time, so serial runs reproduce it
/// byte for byte) and the matching timing CSV.
void write_train_log_csv(std::ostream& out, const std::vector<TrainLogRow>& log);
void write_timing_csv(std::ostream& out, const std::vector<TrainLogRow>& log);

/// Flat checkpoint: "RBM1", u32 n_V, u32 n_H (little-endian), then row-major
/// little-endian f64 weights, visible bias, hidden bias.
void save_checkpoint(const std::filesystem::path& path, const Rbm& params);
Rbm load_checkpoint(const std::filesystem::path& path);

}  // namespace mclv
