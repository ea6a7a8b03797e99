#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "mclv/exact_oracle.hpp"
#include "mclv/tour.hpp"
#include "test_util.hpp"

using namespace mclv;
using mclv::testing::all_states;
using mclv::testing::small_model;

namespace {

StoppingSet set_of(const Rbm& p, std::initializer_list<std::uint64_t> cs) {
  std::vector<BitVector> hs;
  for (auto c : cs) hs.push_back(BitVector::from_code(c, static_cast<std::size_t>(p.n_hidden())));
  return StoppingSet::from_hidden_states(hs, p);
}

TourRecord record(std::size_t length, bool completed, bool capped = false) {
  TourRecord r;
  r.length = length;
  r.completed = completed;
  r.capped = capped;
  return r;
}

}  // namespace

TEST(TourConfig, Modes) {
  EXPECT_THROW(TourConfig::fixed(0), std::invalid_argument);
  EXPECT_THROW(TourConfig::dynamic(0), std::invalid_argument);
  EXPECT_EQ(TourConfig::fixed(7).step_limit(), 7u);
  EXPECT_FALSE(TourConfig::fixed(7).is_dynamic());
  EXPECT_EQ(TourConfig::dynamic(50).step_limit(), 50u);
  EXPECT_TRUE(TourConfig::dynamic().is_dynamic());
}

TEST(Statistics, EnergyGradientLayout) {
  const StatisticSpec s = StatisticSpec::energy_gradient(3, 2);
  EXPECT_EQ(s.dimension, 11);
  EXPECT_EQ(s.sup_norm, 11.0);
  const JointState x{BitVector::from_code(0b101, 3), BitVector::from_code(0b10, 2)};
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(11);
  s.accumulate(x, acc);
  const Eigen::VectorXd v = x.visible.to_dense<double>();
  const Eigen::VectorXd h = x.hidden.to_dense<double>();
  const Eigen::MatrixXd vh = v * h.transpose();
  EXPECT_EQ(acc, flatten(-vh, -v, -h));
  StatisticSpec u = StatisticSpec::unit();
  Eigen::VectorXd one = Eigen::VectorXd::Zero(1);
  u.accumulate(x, one);
  u.accumulate(x, one);
  EXPECT_EQ(one(0), 2.0);
}

TEST(Tours, FullSetReturnsImmediately) {
  const Rbm p = small_model(3, 2, 4);
  const StoppingSet s = set_of(p, {0, 1, 2, 3});
  Rng rng(1);
  const BatchResult b = run_batch(p, s, TourConfig::dynamic(), {StatisticSpec::unit()}, 500, rng);
  for (const auto& r : b.records) {
    EXPECT_TRUE(r.completed);
    EXPECT_EQ(r.length, 1u);
    EXPECT_EQ(r.stat_sums[0](0), 1.0);
  }
  EXPECT_EQ(b.tail.survival, (std::vector<double>{1.0, 0.0}));
  EXPECT_EQ(b.tail.xi_hat, 1.0);
}

TEST(Tours, RecordInvariants) {
  const Rbm p = small_model(4, 3, 5);
  const StoppingSet s = set_of(p, {1, 4});
  Rng rng(2);
  for (int t = 0; t < 300; ++t) {
    const TourRecord r = run_tour(p, s, TourConfig::fixed(4), {StatisticSpec::unit()}, rng);
    EXPECT_GE(r.length, 1u);
    EXPECT_LE(r.length, 4u);
    EXPECT_FALSE(r.capped);
    EXPECT_EQ(r.stat_sums[0](0), static_cast<double>(r.length));
    EXPECT_LT(r.start_index, s.size());
    if (r.completed) {
      EXPECT_TRUE(s.contains(r.exit_state.hidden));
      EXPECT_EQ(r.returned_to_start, r.exit_state.hidden == s.hidden_states()[r.start_index]);
    } else {
      EXPECT_EQ(r.length, 4u);
      EXPECT_FALSE(s.contains(r.exit_state.hidden));
    }
  }
}

TEST(Tours, DynamicCapIsFlagged) {
  // A single weak state: most tours wander much longer than two steps.
  const Rbm p = small_model(4, 4, 6);
  const StoppingSet s = set_of(p, {9});
  Rng rng(3);
  const BatchResult b = run_batch(p, s, TourConfig::dynamic(2), {}, 400, rng);
  EXPECT_GT(b.tail.capped, 0u);
  EXPECT_EQ(b.tail.truncated, 0u);
  for (const auto& r : b.records) {
    if (r.capped) EXPECT_EQ(r.length, 2u);
  }
}

TEST(Tours, SurvivalWithinDkwBandOfExact) {
  const Rbm p = small_model(4, 3, 7);
  const StoppingSet s = set_of(p, {0, 2, 5});
  const ChainDiagnostics d = collapsed_chain(p, s, GibbsScan::AlternatingVH);
  Rng rng(4);
  const std::size_t n = 20000;
  const BatchResult b = run_batch(p, s, TourConfig::dynamic(), {}, n, rng);
  // DKW with failure probability 1e-4.
  const double eps = std::sqrt(std::log(2.0 / 1e-4) / (2.0 * n));
  for (std::size_t k = 1; k < d.survival.size(); ++k) {
    const double emp = k < b.tail.survival.size() ? b.tail.survival[k] : 0.0;
    ASSERT_LE(std::abs(emp - d.survival[k]), eps) << "k = " << k;
  }
}

TEST(Tours, MeanLengthMatchesReturnTime) {
  const Rbm p = small_model(3, 3, 8);
  const StoppingSet s = set_of(p, {3, 6});
  for (auto scan : {GibbsScan::AlternatingVH, GibbsScan::RandomScan}) {
    const double expected = std::exp(exact_log_partition(p) - s.log_z_s());
    Rng rng(5);
    const BatchResult b = run_batch(p, s, TourConfig::dynamic(1'000'000, scan), {}, 20000, rng);
    double sq = 0.0;
    for (const auto& r : b.records) sq += std::pow(static_cast<double>(r.length) - b.tail.xi_hat, 2);
    const double se = std::sqrt(sq / (b.records.size() - 1.0) / b.records.size());
    EXPECT_NEAR(b.tail.xi_hat, expected, 4.0 * se) << to_string(scan);
  }
}

TEST(Tours, BatchIsThreadCountInvariant) {
  const Rbm p = small_model(5, 4, 9);
  const StoppingSet s = set_of(p, {1, 2, 8});
  const std::vector<StatisticSpec> stats{StatisticSpec::energy_gradient(5, 4)};
  Rng r1(10);
  Rng r2(10);
  const BatchResult a = run_batch(p, s, TourConfig::fixed(6), stats, 97, r1, 1);
  const BatchResult b = run_batch(p, s, TourConfig::fixed(6), stats, 97, r2, 4);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].length, b.records[i].length);
    EXPECT_EQ(a.records[i].stat_sums[0], b.records[i].stat_sums[0]);
    EXPECT_EQ(a.records[i].exit_state.visible, b.records[i].exit_state.visible);
  }
  EXPECT_EQ(r1(), r2());
}

TEST(Tours, StaleSetIsReported) {
  Rbm p = small_model(3, 2, 11);
  const StoppingSet s = set_of(p, {1});
  Rng rng(6);
  EXPECT_FALSE(run_batch(p, s, TourConfig::fixed(1), {}, 5, rng).stale_stopping_set);
  p.weights(0, 0) += 1.0;
  EXPECT_TRUE(run_batch(p, s, TourConfig::fixed(1), {}, 5, rng).stale_stopping_set);
}

TEST(Summary, CountsAndSurvival) {
  const std::vector<TourRecord> rs{record(1, true), record(1, true), record(2, true), record(3, false),
                                   record(3, false, true)};
  const TailSummary t = summarize(rs);
  EXPECT_EQ(t.tours, 5u);
  EXPECT_EQ(t.completed, 3u);
  EXPECT_EQ(t.truncated, 1u);
  EXPECT_EQ(t.capped, 1u);
  EXPECT_EQ(t.completed_by_length, (std::vector<std::size_t>{0, 2, 1, 0}));
  EXPECT_EQ(t.survival, (std::vector<double>{1.0, 0.6, 0.4, 0.4}));
  EXPECT_NEAR(t.xi_hat, 4.0 / 3.0, 1e-15);
  EXPECT_NEAR(t.completed_fraction(), 0.6, 1e-15);
  EXPECT_TRUE(std::isnan(summarize({record(2, false)}).xi_hat));
}

TEST(Summary, CcdfCsv) {
  const TailSummary t = summarize({record(1, true), record(2, true), record(2, true), record(4, true)});
  std::ostringstream out;
  write_ccdf_csv(out, t);
  EXPECT_EQ(out.str(), "k,count,p_gt_k\n1,1,0.75\n2,2,0.25\n3,0,0.25\n4,1,0\n");
}

TEST(TailFit, RecoversGeometricRate) {
  std::vector<TourRecord> rs;
  Rng rng(12);
  std::geometric_distribution<std::size_t> geo(0.4);
  for (int i = 0; i < 20000; ++i) rs.push_back(record(geo(rng) + 1, true));
  const auto fit = fit_geometric_tail(rs);
  ASSERT_TRUE(fit.has_value());
  EXPECT_NEAR(fit->alpha, 0.6, 0.02);
  EXPECT_EQ(fit->k_lo, 1u);
  EXPECT_GT(fit->k_hi, 5u);
  const auto later = fit_geometric_tail(rs, 3);
  ASSERT_TRUE(later.has_value());
  EXPECT_EQ(later->k_lo, 3u);
  EXPECT_NEAR(later->alpha, 0.6, 0.03);
}

TEST(TailFit, NeedsEnoughLongTours) {
  std::vector<TourRecord> rs(500, record(1, true));
  for (int i = 0; i < 50; ++i) rs.push_back(record(3, true));
  EXPECT_FALSE(fit_geometric_tail(rs).has_value());
}

TEST(Labels, AssignedFromSourceExample) {
  const Rbm p = small_model(3, 2, 13);
  const std::vector<BitVector> data = all_states(3);
  Rng rng(14);
  const StoppingSet s = StoppingSet::build(data, p, 1, rng);
  BatchResult b = run_batch(p, s, TourConfig::fixed(2), {}, 50, rng);
  const std::vector<int> labels{0, 1, 2, 3, 4, 5, 6, 7};
  assign_start_labels(b.records, s, labels);
  for (const auto& r : b.records) {
    ASSERT_TRUE(r.start_label.has_value());
    EXPECT_EQ(*r.start_label, labels[*s.source_example(r.start_index)]);
  }
}
