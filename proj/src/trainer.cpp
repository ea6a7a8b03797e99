#include "mclv/trainer.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "mclv/estimators.hpp"
#include "mclv/exact_oracle.hpp"
#include "mclv/stopping_set.hpp"

namespace mclv {

const char* to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::CD: return "cd";
    case EstimatorKind::PCD: return "pcd";
    case EstimatorKind::LVS: return "lvs";
    case EstimatorKind::Exact: return "exact";
  }
  return "?";
}

std::optional<EstimatorKind> parse_estimator(const std::string& name) {
  for (auto kind : {EstimatorKind::CD, EstimatorKind::PCD, EstimatorKind::LVS, EstimatorKind::Exact}) {
    if (name == to_string(kind)) return kind;
  }
  return std::nullopt;
}

void TrainConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("TrainConfig: ") + what);
  };
  require(lr0 >= 0.0 && std::isfinite(lr0), "lr0 must be finite and non-negative");
  require(schedule.tau > 0.0, "tau must be positive");
  require(epochs >= warmup_epochs, "epochs must be at least warmup_epochs");
  require(batch_size > 0, "batch_size must be positive");
  require(k > 0, "K must be positive");
  require(k_dyn_cap > 0, "k_dyn_cap must be positive");
  require(m > 0, "m must be positive");
  require(eval_every > 0, "eval_every must be positive");
  require(n_hidden > 0, "n_hidden must be positive");
  require(threads > 0, "threads must be positive");
}

Rbm init_params(const std::vector<BitVector>& data, std::size_t n_hidden, Rng& rng) {
  if (data.empty()) throw std::invalid_argument("init_params: empty data");
  const std::size_t n_visible = data.front().size();
  Rbm params = Rbm::zeros(static_cast<Eigen::Index>(n_visible), static_cast<Eigen::Index>(n_hidden));
  const double c = 0.1 / std::sqrt(static_cast<double>(n_visible + n_hidden));
  std::uniform_real_distribution<double> unif(-c, c);
  for (Eigen::Index j = 0; j < params.weights.cols(); ++j) {
    for (Eigen::Index i = 0; i < params.weights.rows(); ++i) params.weights(i, j) = unif(rng);
  }
  const double n = static_cast<double>(data.size());
  const double lo = 1.0 / (2.0 * n);
  for (std::size_t i = 0; i < n_visible; ++i) {
    double on = 0.0;
    for (const auto& v : data) on += v.get(i) ? 1.0 : 0.0;
    const double p = std::clamp(on / n, lo, 1.0 - lo);
    params.visible_bias(static_cast<Eigen::Index>(i)) = std::log(p / (1.0 - p));
  }
  return params;
}

double evaluate(const Rbm& params, const std::vector<BitVector>& data, std::optional<double> log_z) {
  return exact_log_likelihood(params, data, log_z);
}

namespace {

bool exact_evaluable(const Rbm& params) {
  return std::min(params.n_visible(), params.n_hidden()) <= kMaxEnumeratedUnits;
}

std::string divergence_report(const Rbm& params, const GradientEstimate& g, std::size_t epoch, std::size_t batch) {
  std::ostringstream msg;
  msg << "non-finite parameters at epoch " << epoch << " batch " << batch
      << ": max|W| = " << params.weights.cwiseAbs().maxCoeff()
      << ", max|b| = " << params.visible_bias.cwiseAbs().maxCoeff()
      << ", max|a| = " << params.hidden_bias.cwiseAbs().maxCoeff()
      << ", |g| = " << flatten(g).norm() << ", xi_hat = " << g.xi_hat;
  return msg.str();
}

}  // namespace

TrainResult train(const std::vector<BitVector>& data, const std::vector<BitVector>& test, const TrainConfig& config,
                  const std::function<void(const TrainLogRow&)>& on_eval) {
  config.validate();
  if (data.empty()) throw std::invalid_argument("train: empty training set");
  const auto started = std::chrono::steady_clock::now();
  Rng rng(config.seed);

  TrainResult result;
  Rbm& params = result.params;
  params = init_params(data, config.n_hidden, rng);

  const TourConfig tour_config = config.dynamic_k ? TourConfig::dynamic(config.k_dyn_cap, config.scan)
                                                  : TourConfig::fixed(config.k, config.scan);
  PersistentChains chains;
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<BitVector> batch;
  batch.reserve(config.batch_size);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = config.schedule.rate(config.lr0, epoch);
    const bool warmup = config.estimator == EstimatorKind::LVS && epoch < config.warmup_epochs;
    const bool use_tours = config.estimator == EstimatorKind::LVS && !warmup;

    std::optional<StoppingSet> stopping;
    if (use_tours) stopping = StoppingSet::build(data, params, config.m, rng);
    std::shuffle(order.begin(), order.end(), rng);

    double length_sum = 0.0;
    std::size_t completed = 0;
    std::size_t tours = 0;
    std::size_t capped = 0;
    std::size_t skipped = 0;

    for (std::size_t start = 0, b = 0; start < order.size(); start += config.batch_size, ++b) {
      batch.clear();
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      for (std::size_t i = start; i < stop; ++i) batch.push_back(data[order[i]]);

      GradientEstimate g;
      if (warmup) {
        g = cd_gradient(batch, params, 1, rng);
      } else {
        switch (config.estimator) {
          case EstimatorKind::CD: g = cd_gradient(batch, params, config.k, rng); break;
          case EstimatorKind::PCD: g = pcd_gradient(batch, params, config.k, chains, rng); break;
          case EstimatorKind::Exact: g = exact_gradient(params, batch); break;
          case EstimatorKind::LVS: {
            // The set's states stay fixed for the epoch; only the weights
            // follow the parameters.
            if (!stopping->built_for(params)) stopping->reweight(params);
            g = lvs_gradient(batch, params, *stopping, tour_config, batch.size(), rng, config.normalize,
                             config.threads);
            tours += batch.size();
            completed += g.completed_tours;
            if (config.dynamic_k) capped += batch.size() - g.completed_tours;
            if (g.completed_tours == 0) {
              ++skipped;
              continue;
            }
            length_sum += g.xi_hat * static_cast<double>(g.completed_tours);
            break;
          }
        }
      }
      apply_update(params, g, lr);
      if (!params.all_finite()) throw TrainingDiverged(divergence_report(params, g, epoch, b));
    }
    result.skipped_updates += skipped;

    const std::size_t done = epoch + 1;
    if (done % config.eval_every != 0 && done != config.epochs) continue;
    TrainLogRow row;
    row.epoch = done;
    row.lr = lr;
    row.train_log_likelihood = std::numeric_limits<double>::quiet_NaN();
    row.test_log_likelihood = std::numeric_limits<double>::quiet_NaN();
    if (exact_evaluable(params)) {
      const double log_z = exact_log_partition(params);
      row.train_log_likelihood = evaluate(params, data, log_z);
      if (!test.empty()) row.test_log_likelihood = evaluate(params, test, log_z);
    }
    if (use_tours) {
      row.xi_hat = completed ? length_sum / static_cast<double>(completed) : std::numeric_limits<double>::quiet_NaN();
      row.completed_fraction = tours ? static_cast<double>(completed) / static_cast<double>(tours) : 0.0;
    }
    row.skipped_updates = skipped;
    row.capped_tours = capped;
    row.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    result.log.push_back(row);
    if (on_eval) on_eval(row);
  }
  return result;
}

void write_train_log_csv(std::ostream& out, const std::vector<TrainLogRow>& log) {
  out << "epoch,lr,train_log_likelihood,test_log_likelihood,xi_hat,completed_fraction,skipped_updates,capped_tours\n";
  out.precision(17);
  for (const auto& r : log) {
    out << r.epoch << ',' << r.lr << ',' << r.train_log_likelihood << ',' << r.test_log_likelihood << ','
        << r.xi_hat << ',' << r.completed_fraction << ',' << r.skipped_updates << ',' << r.capped_tours << '\n';
  }
}

void write_timing_csv(std::ostream& out, const std::vector<TrainLogRow>& log) {
  out << "epoch,wall_time\n";
  out.precision(6);
  for (const auto& r : log) out << r.epoch << ',' << r.wall_time << '\n';
}

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

void write_u32(std::ostream& out, std::uint32_t x) { out.write(reinterpret_cast<const char*>(&x), sizeof x); }

std::uint32_t read_u32(std::istream& in) {
  std::uint32_t x = 0;
  in.read(reinterpret_cast<char*>(&x), sizeof x);
  return x;
}

template <typename Derived>
void write_doubles(std::ostream& out, const Eigen::DenseBase<Derived>& x) {
  const auto& d = x.derived();
  out.write(reinterpret_cast<const char*>(d.data()), static_cast<std::streamsize>(sizeof(double) * d.size()));
}

template <typename Derived>
void read_doubles(std::istream& in, Eigen::DenseBase<Derived>& x) {
  auto& d = x.derived();
  in.read(reinterpret_cast<char*>(d.data()), static_cast<std::streamsize>(sizeof(double) * d.size()));
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Rbm& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out.write("RBM1", 4);
  write_u32(out, static_cast<std::uint32_t>(params.n_visible()));
  write_u32(out, static_cast<std::uint32_t>(params.n_hidden()));
  // Row-major W' is column-major W.
  write_doubles(out, params.weights);
  write_doubles(out, params.visible_bias);
  write_doubles(out, params.hidden_bias);
  if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

Rbm load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "RBM1", 4) != 0) throw std::runtime_error(path.string() + ": not an RBM1 checkpoint");
  const std::uint32_t n_v = read_u32(in);
  const std::uint32_t n_h = read_u32(in);
  if (!in || n_v == 0 || n_h == 0) throw std::runtime_error(path.string() + ": bad checkpoint header");
  Rbm params = Rbm::zeros(n_v, n_h);
  read_doubles(in, params.weights);
  read_doubles(in, params.visible_bias);
  read_doubles(in, params.hidden_bias);
  if (!in) throw std::runtime_error(path.string() + ": checkpoint truncated");
  if (in.peek() != std::char_traits<char>::eof()) throw std::runtime_error(path.string() + ": trailing bytes");
  if (!params.all_finite()) throw std::runtime_error(path.string() + ": non-finite parameters");
  return params;
}

}  // namespace mclv
