#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <cstring>
#include <iterator>
#include <sstream>

#include "mclv/exact_oracle.hpp"
#include "mclv/trainer.hpp"
#include "test_util.hpp"

using namespace mclv;
namespace fs = std::filesystem;

namespace {

std::vector<BitVector> toy_data(std::size_t n_visible, std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<BitVector> out;
  // Two noisy prototypes.
  for (std::size_t n = 0; n < count; ++n) {
    BitVector v(n_visible);
    for (std::size_t i = 0; i < n_visible; ++i) {
      const bool proto = (n % 2 == 0) ? i < n_visible / 2 : i >= n_visible / 2;
      v.set(i, (rng() % 10 == 0) ? !proto : proto);
    }
    out.push_back(v);
  }
  return out;
}

TrainConfig tiny_config(EstimatorKind kind) {
  TrainConfig c;
  c.estimator = kind;
  c.n_hidden = 4;
  c.epochs = 6;
  c.warmup_epochs = 2;
  c.batch_size = 10;
  c.seed = 3;
  return c;
}

fs::path temp_path(const std::string& name) { return fs::temp_directory_path() / ("mclv_test_" + name); }

}  // namespace

TEST(Schedule, RobbinsMonro) {
  const RobbinsMonro rm;
  EXPECT_DOUBLE_EQ(rm.rate(0.1, 0), 0.1);
  EXPECT_DOUBLE_EQ(rm.rate(0.1, 50), 0.05);
  EXPECT_DOUBLE_EQ(RobbinsMonro{10.0}.rate(1.0, 30), 0.25);
}

TEST(Estimator, NamesRoundTrip) {
  for (auto k : {EstimatorKind::CD, EstimatorKind::PCD, EstimatorKind::LVS, EstimatorKind::Exact}) {
    EXPECT_EQ(parse_estimator(to_string(k)), k);
  }
  EXPECT_FALSE(parse_estimator("sgd").has_value());
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  c.lr0 = -1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = TrainConfig{};
  c.epochs = 3;
  c.warmup_epochs = 4;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = TrainConfig{};
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(InitParams, BoundsAndBiases) {
  std::vector<BitVector> data(4, BitVector(3));
  data[0].set(1, true);
  data[1].set(1, true);
  for (auto& v : data) v.set(2, true);
  Rng rng(1);
  const Rbm p = init_params(data, 5, rng);
  const double c = 0.1 / std::sqrt(8.0);
  EXPECT_LE(p.weights.cwiseAbs().maxCoeff(), c);
  EXPECT_GT(p.weights.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_TRUE(p.hidden_bias.isZero());
  const double lo = 1.0 / 8.0;
  EXPECT_NEAR(p.visible_bias(0), std::log(lo / (1 - lo)), 1e-15);
  EXPECT_NEAR(p.visible_bias(1), 0.0, 1e-15);
  EXPECT_NEAR(p.visible_bias(2), std::log((1 - lo) / lo), 1e-15);
  EXPECT_THROW(init_params({}, 2, rng), std::invalid_argument);
}

TEST(Evaluate, ClosedFormsAndEnumeration) {
  const std::vector<BitVector> data = toy_data(6, 8, 2);
  EXPECT_NEAR(evaluate(Rbm::zeros(6, 3), data), -6 * std::log(2.0), 1e-12);
  const Rbm p = mclv::testing::small_model(6, 3, 4);
  const double log_z = mclv::testing::brute_log_z(p);
  double expected = 0.0;
  for (const auto& v : data) expected += (-visible_free_energy(v, p) - log_z) / data.size();
  EXPECT_NEAR(evaluate(p, data), expected, 1e-10);
  EXPECT_THROW(evaluate(Rbm::zeros(30, 30), data), std::exception);
}

TEST(Evaluate, SingleExampleBeatsUniform) {
  const std::vector<BitVector> one{BitVector::from_code(0b101101, 6)};
  Rng rng(3);
  EXPECT_GT(evaluate(init_params(one, 3, rng), one), -6 * std::log(2.0));
}

TEST(Train, ZeroLearningRateLeavesInitialParams) {
  const auto data = toy_data(6, 20, 5);
  for (auto kind : {EstimatorKind::CD, EstimatorKind::PCD, EstimatorKind::LVS}) {
    TrainConfig c = tiny_config(kind);
    c.lr0 = 0.0;
    const TrainResult r = train(data, {}, c);
    Rng rng(c.seed);
    const Rbm init = init_params(data, c.n_hidden, rng);
    EXPECT_EQ(r.params.weights, init.weights);
    EXPECT_EQ(r.params.visible_bias, init.visible_bias);
  }
}

TEST(Train, ExactGradientAscends) {
  const auto data = toy_data(6, 16, 6);
  TrainConfig c = tiny_config(EstimatorKind::Exact);
  c.batch_size = data.size();
  c.epochs = 30;
  c.warmup_epochs = 0;
  c.lr0 = 1.0;
  const TrainResult r = train(data, {}, c);
  ASSERT_EQ(r.log.size(), 30u);
  for (std::size_t i = 1; i < r.log.size(); ++i) {
    EXPECT_GE(r.log[i].train_log_likelihood, r.log[i - 1].train_log_likelihood - 1e-6) << "epoch " << i + 1;
  }
  EXPECT_GT(r.log.back().train_log_likelihood, r.log.front().train_log_likelihood + 0.1);
}

TEST(Train, DeterministicInSerialMode) {
  const auto data = toy_data(8, 30, 7);
  for (auto kind : {EstimatorKind::CD, EstimatorKind::PCD, EstimatorKind::LVS}) {
    const TrainConfig c = tiny_config(kind);
    const TrainResult a = train(data, data, c);
    const TrainResult b = train(data, data, c);
    EXPECT_EQ(a.params.weights, b.params.weights) << to_string(kind);
    std::ostringstream la;
    std::ostringstream lb;
    write_train_log_csv(la, a.log);
    write_train_log_csv(lb, b.log);
    EXPECT_EQ(la.str(), lb.str());
  }
}

TEST(Train, LvsWarmupIsCdOne) {
  const auto data = toy_data(6, 20, 8);
  TrainConfig lvs = tiny_config(EstimatorKind::LVS);
  lvs.warmup_epochs = lvs.epochs;
  TrainConfig cd = tiny_config(EstimatorKind::CD);
  cd.k = 1;
  EXPECT_EQ(train(data, {}, lvs).params.weights, train(data, {}, cd).params.weights);
}

TEST(Train, LogRowsAndDiagnostics) {
  const auto data = toy_data(6, 20, 9);
  TrainConfig c = tiny_config(EstimatorKind::LVS);
  c.eval_every = 4;
  c.epochs = 6;
  std::size_t callbacks = 0;
  const TrainResult r = train(data, data, c, [&](const TrainLogRow&) { ++callbacks; });
  ASSERT_EQ(r.log.size(), 2u);
  EXPECT_EQ(callbacks, 2u);
  EXPECT_EQ(r.log[0].epoch, 4u);
  EXPECT_EQ(r.log[1].epoch, 6u);
  EXPECT_DOUBLE_EQ(r.log[1].lr, c.schedule.rate(c.lr0, 5));
  EXPECT_GT(r.log[1].completed_fraction, 0.0);
  EXPECT_GE(r.log[1].xi_hat, 1.0);
  EXPECT_TRUE(std::isfinite(r.log[1].test_log_likelihood));
}

TEST(Train, DynamicToursComplete) {
  const auto data = toy_data(6, 20, 10);
  TrainConfig c = tiny_config(EstimatorKind::LVS);
  c.dynamic_k = true;
  const TrainResult r = train(data, {}, c);
  EXPECT_EQ(r.log.back().completed_fraction, 1.0);
  EXPECT_EQ(r.log.back().capped_tours, 0u);
}

TEST(Train, DivergenceAborts) {
  const auto data = toy_data(6, 16, 11);
  TrainConfig c = tiny_config(EstimatorKind::Exact);
  c.lr0 = 1e308;
  c.warmup_epochs = 0;
  EXPECT_THROW(train(data, {}, c), TrainingDiverged);
}

TEST(TrainLog, CsvLayout) {
  TrainLogRow row;
  row.epoch = 3;
  row.lr = 0.5;
  row.train_log_likelihood = -1.25;
  row.test_log_likelihood = -2.5;
  row.xi_hat = 1.5;
  row.completed_fraction = 0.75;
  row.skipped_updates = 1;
  row.capped_tours = 2;
  row.wall_time = 9.5;
  std::ostringstream log;
  write_train_log_csv(log, {row});
  EXPECT_EQ(log.str(),
            "epoch,lr,train_log_likelihood,test_log_likelihood,xi_hat,completed_fraction,skipped_updates,"
            "capped_tours\n3,0.5,-1.25,-2.5,1.5,0.75,1,2\n");
  std::ostringstream timing;
  write_timing_csv(timing, {row});
  EXPECT_EQ(timing.str(), "epoch,wall_time\n3,9.5\n");
}

TEST(Checkpoint, ByteLayoutAndRoundTrip) {
  Eigen::MatrixXd w(2, 1);
  w << 1.0, 2.0;
  Eigen::VectorXd b(2);
  b << 3.0, 4.0;
  Eigen::VectorXd a(1);
  a << 5.0;
  const Rbm p(w, b, a);
  const fs::path path = temp_path("ckpt.rbm");
  save_checkpoint(path, p);
  std::ifstream in(path, std::ios::binary);
  const std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  ASSERT_EQ(bytes.size(), 4u + 8u + 5u * 8u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "RBM1");
  EXPECT_EQ(bytes[4], 2);
  EXPECT_EQ(bytes[8], 1);
  double third = 0.0;
  std::memcpy(&third, bytes.data() + 12 + 16, 8);
  EXPECT_EQ(third, 3.0);
  const Rbm back = load_checkpoint(path);
  EXPECT_EQ(back.weights, p.weights);
  EXPECT_EQ(back.visible_bias, p.visible_bias);
  EXPECT_EQ(back.hidden_bias, p.hidden_bias);

  const Rbm q = mclv::testing::small_model(5, 3, 1);
  save_checkpoint(path, q);
  EXPECT_EQ(load_checkpoint(path).weights, q.weights);
  fs::remove(path);
}

TEST(Checkpoint, RejectsBadFiles) {
  const fs::path path = temp_path("bad.rbm");
  std::ofstream(path, std::ios::binary) << "RBM2xxxxxxxx";
  EXPECT_THROW(load_checkpoint(path), std::runtime_error);
  save_checkpoint(path, Rbm::zeros(3, 2));
  fs::resize_file(path, fs::file_size(path) - 8);
  EXPECT_THROW(load_checkpoint(path), std::runtime_error);
  EXPECT_THROW(load_checkpoint(temp_path("missing.rbm")), std::runtime_error);
  fs::remove(path);
}
