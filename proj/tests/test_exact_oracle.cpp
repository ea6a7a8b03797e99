#include <gtest/gtest.h>

#include <cmath>

#include "mclv/exact_oracle.hpp"
#include "mclv/stopping_set.hpp"
#include "mclv/verification.hpp"
#include "test_util.hpp"

using namespace mclv;
using mclv::testing::brute_joint;
using mclv::testing::brute_log_z;
using mclv::testing::small_model;

namespace {

StoppingSet set_of(const Rbm& p, std::initializer_list<std::uint64_t> codes) {
  std::vector<BitVector> hs;
  for (auto c : codes) hs.push_back(BitVector::from_code(c, static_cast<std::size_t>(p.n_hidden())));
  return StoppingSet::from_hidden_states(hs, p);
}

Eigen::MatrixXd unit_table(const Rbm& p) {
  return Eigen::MatrixXd::Ones(Eigen::Index{1} << (p.n_visible() + p.n_hidden()), 1);
}

}  // namespace

TEST(ExactPartition, MatchesJointEnumeration) {
  for (auto [nv, nh] : {std::pair{4, 3}, std::pair{3, 5}, std::pair{5, 5}}) {
    const Rbm p = small_model(nv, nh, 100 + nv * 10 + nh);
    const double brute = brute_log_z(p);
    EXPECT_NEAR(exact_log_partition(p), brute, 1e-11);
    EXPECT_NEAR(log_partition_over_hidden(p), brute, 1e-11);
    EXPECT_NEAR(log_partition_over_visible(p), brute, 1e-11);
  }
}

TEST(ExactPartition, ZeroModelClosedForm) {
  EXPECT_NEAR(exact_log_partition(Rbm::zeros(30, 6)), 36 * std::log(2.0), 1e-10);
  EXPECT_NEAR(exact_log_partition(Rbm::zeros(7, 40)), 47 * std::log(2.0), 1e-10);
}

TEST(ExactPartition, LargeModelsExceedBudget) {
  EXPECT_THROW(exact_log_partition(Rbm::zeros(26, 26)), BudgetExceeded);
  EXPECT_THROW(log_partition_over_hidden(Rbm::zeros(3, 26)), BudgetExceeded);
  EXPECT_THROW(transition_matrix(Rbm::zeros(8, 7), GibbsScan::AlternatingVH), BudgetExceeded);
}

TEST(ExactLikelihood, MatchesEnumeratedMarginal) {
  const Rbm p = small_model(4, 3, 7);
  const std::vector<double> joint = brute_joint(p);
  std::vector<BitVector> data{BitVector::from_code(3, 4), BitVector::from_code(12, 4), BitVector::from_code(3, 4)};
  double expected = 0.0;
  for (const auto& v : data) {
    double marginal = 0.0;
    for (std::uint64_t h = 0; h < 8; ++h) marginal += joint[v.code() | (h << 4)];
    expected += std::log(marginal) / 3.0;
  }
  EXPECT_NEAR(exact_log_likelihood(p, data), expected, 1e-10);
  EXPECT_NEAR(exact_log_likelihood(p, data, exact_log_partition(p)), expected, 1e-10);
}

TEST(ExactLikelihood, ZeroModel) {
  const std::vector<BitVector> data{BitVector::from_code(5, 6)};
  EXPECT_NEAR(exact_log_likelihood(Rbm::zeros(6, 2), data), -6 * std::log(2.0), 1e-12);
}

TEST(ExactGradient, MatchesFiniteDifferences) {
  const Rbm p = small_model(5, 4, 21, 0.8);
  std::vector<BitVector> data;
  for (std::uint64_t c : {1, 7, 19, 30, 31, 8}) data.push_back(BitVector::from_code(c, 5));
  const Eigen::VectorXd g = flatten(exact_gradient(p, data));
  const Eigen::VectorXd theta = flatten(p);
  const double step = 1e-5;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    Eigen::VectorXd up = theta;
    Eigen::VectorXd down = theta;
    up(i) += step;
    down(i) -= step;
    const double fd = (exact_log_likelihood(unflatten_params(up, 5, 4), data) -
                       exact_log_likelihood(unflatten_params(down, 5, 4), data)) /
                      (2 * step);
    EXPECT_NEAR(g(i), fd, 1e-6) << "entry " << i;
  }
}

TEST(ExactGradient, WideVisibleLayer) {
  // More visible than hidden units: the negative phase enumerates h.
  const Rbm p = small_model(9, 3, 4, 0.5);
  std::vector<BitVector> data{BitVector::from_code(0x1f3, 9), BitVector::from_code(0x0a1, 9)};
  const Eigen::VectorXd g = flatten(exact_gradient(p, data));
  const Eigen::VectorXd theta = flatten(p);
  const double step = 1e-5;
  for (Eigen::Index i : {0, 5, 13, 27, 30, 35, 38}) {
    Eigen::VectorXd up = theta;
    Eigen::VectorXd down = theta;
    up(i) += step;
    down(i) -= step;
    const double fd = (exact_log_likelihood(unflatten_params(up, 9, 3), data) -
                       exact_log_likelihood(unflatten_params(down, 9, 3), data)) /
                      (2 * step);
    EXPECT_NEAR(g(i), fd, 1e-6) << "entry " << i;
  }
}

TEST(ExactChain, JointDistributionMatchesEnergies) {
  const Rbm p = small_model(3, 3, 9);
  const Eigen::VectorXd pi = joint_distribution(p);
  const std::vector<double> brute = brute_joint(p);
  EXPECT_NEAR(pi.sum(), 1.0, 1e-14);
  for (std::size_t c = 0; c < brute.size(); ++c) EXPECT_NEAR(pi(static_cast<Eigen::Index>(c)), brute[c], 1e-14);
}

TEST(ExactChain, TransitionMatricesPreservePi) {
  const Rbm p = small_model(4, 3, 12);
  const Eigen::VectorXd pi = joint_distribution(p);
  for (auto scan : {GibbsScan::AlternatingVH, GibbsScan::RandomScan}) {
    const Eigen::MatrixXd t = transition_matrix(p, scan);
    EXPECT_LT((t.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-13);
    EXPECT_GE(t.minCoeff(), 0.0);
    EXPECT_LT((pi.transpose() * t - pi.transpose()).cwiseAbs().maxCoeff(), 1e-14);
  }
  const Eigen::MatrixXd random = pi.asDiagonal() * transition_matrix(p, GibbsScan::RandomScan);
  EXPECT_LT((random - random.transpose()).cwiseAbs().maxCoeff(), 1e-15);
  const Eigen::MatrixXd alt = pi.asDiagonal() * transition_matrix(p, GibbsScan::AlternatingVH);
  EXPECT_GT((alt - alt.transpose()).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(ExactChain, TwoStateHelpers) {
  Eigen::MatrixXd t(2, 2);
  t << 0.7, 0.3, 0.1, 0.9;
  const Eigen::VectorXd pi = stationary_distribution(t);
  EXPECT_NEAR(pi(0), 0.25, 1e-15);
  EXPECT_NEAR(pi(1), 0.75, 1e-15);
  EXPECT_NEAR(spectral_gap(t, pi), 0.4, 1e-9);
  Eigen::MatrixXd q(2, 2);
  q << 0.5, 0.25, 0.25, 0.5;
  EXPECT_NEAR(perron_root(q), 0.75, 1e-12);
}

TEST(CollapsedChain, StationaryLawAndReturnTime) {
  const Rbm p = small_model(4, 3, 31);
  const StoppingSet s = set_of(p, {1, 6});
  const Eigen::VectorXd pi = joint_distribution(p);
  const double set_mass = std::exp(s.log_z_s() - exact_log_partition(p));
  for (auto scan : {GibbsScan::AlternatingVH, GibbsScan::RandomScan}) {
    const ChainDiagnostics d = collapsed_chain(p, s, scan);
    EXPECT_EQ(d.outside_codes.size(), 128u - 2u * 16u);
    EXPECT_NEAR(d.stationary(0), set_mass, 1e-12);
    for (std::size_t i = 0; i < d.outside_codes.size(); ++i) {
      EXPECT_NEAR(d.stationary(static_cast<Eigen::Index>(i + 1)), pi(static_cast<Eigen::Index>(d.outside_codes[i])),
                  1e-12);
    }
    EXPECT_NEAR(d.mean_tour_length(), 1.0 / set_mass, 1e-9 / set_mass);
    EXPECT_NEAR(d.survival_sum(), d.mean_tour_length(), 1e-6 * d.mean_tour_length());
    EXPECT_LE(d.restricted_spectral_radius, 1.0 - d.min_one_step_into_set + 1e-12);
  }
}

TEST(CollapsedChain, FirstSurvivalStepFromTransitionMatrix) {
  const Rbm p = small_model(3, 3, 2);
  const StoppingSet s = set_of(p, {0, 5, 7});
  const Eigen::MatrixXd t = transition_matrix(p, GibbsScan::AlternatingVH);
  const Eigen::VectorXd pi = joint_distribution(p);
  const std::vector<bool> mask = stopping_mask(p, s);
  double in_mass = 0.0;
  double leave = 0.0;
  for (Eigen::Index x = 0; x < t.rows(); ++x) {
    if (!mask[static_cast<std::size_t>(x)]) continue;
    in_mass += pi(x);
    for (Eigen::Index y = 0; y < t.cols(); ++y) {
      if (!mask[static_cast<std::size_t>(y)]) leave += pi(x) * t(x, y);
    }
  }
  const ChainDiagnostics d = collapsed_chain(p, s, GibbsScan::AlternatingVH);
  EXPECT_NEAR(d.survival[0], 1.0, 0.0);
  EXPECT_NEAR(d.survival[1], leave / in_mass, 1e-13);
}

TEST(CollapsedChain, FullSetIsDegenerate) {
  const Rbm p = small_model(3, 2, 3);
  const StoppingSet s = set_of(p, {0, 1, 2, 3});
  const ChainDiagnostics d = collapsed_chain(p, s, GibbsScan::AlternatingVH);
  EXPECT_TRUE(d.outside_codes.empty());
  EXPECT_EQ(d.survival, (std::vector<double>{1.0, 0.0}));
  EXPECT_EQ(d.mean_tour_length(), 1.0);
  EXPECT_EQ(exact_mean_tour_length(p, s, GibbsScan::RandomScan), 1.0);
}

TEST(CollapsedChain, InjectedFaultBreaksStationarity) {
  const Rbm p = small_model(4, 3, 31);
  const StoppingSet s = set_of(p, {1, 6});
  CollapsedChainOptions bad;
  bad.inject_uniform_exit_fault = true;
  const ChainDiagnostics d = collapsed_chain(p, s, GibbsScan::RandomScan, bad);
  const double set_mass = std::exp(s.log_z_s() - exact_log_partition(p));
  EXPECT_GT(std::abs(d.stationary(0) - set_mass), 1e-6);
}

TEST(TruncatedTours, UnitStatisticRecoversSurvival) {
  const Rbm p = small_model(4, 3, 44);
  const StoppingSet s = set_of(p, {2, 3, 5});
  const ChainDiagnostics d = collapsed_chain(p, s, GibbsScan::AlternatingVH);
  const Eigen::MatrixXd unit = unit_table(p);
  const auto k1 = exact_truncated_tour_expectation(p, s, GibbsScan::AlternatingVH, 1, unit);
  EXPECT_NEAR(k1.completed_probability, 1.0 - d.survival[1], 1e-13);
  EXPECT_NEAR(k1.completed_sum(0), 1.0 - d.survival[1], 1e-13);
  for (std::size_t k : {2u, 5u}) {
    const auto e = exact_truncated_tour_expectation(p, s, GibbsScan::AlternatingVH, k, unit);
    EXPECT_NEAR(e.completed_probability, 1.0 - d.survival[k], 1e-12);
    // sum_{j<=k} j p(xi = j)
    double expected = 0.0;
    for (std::size_t j = 1; j <= k; ++j) expected += static_cast<double>(j) * (d.survival[j - 1] - d.survival[j]);
    EXPECT_NEAR(e.completed_sum(0), expected, 1e-12);
  }
  const auto far = exact_truncated_tour_expectation(p, s, GibbsScan::AlternatingVH, 2000, unit);
  EXPECT_NEAR(far.completed_probability, 1.0, 1e-10);
  EXPECT_NEAR(far.completed_sum(0), d.mean_tour_length(), 1e-8);
  EXPECT_NEAR(exact_normalized_target(p, s, unit)(0), d.mean_tour_length(), 1e-10);
}

TEST(TruncatedTours, BiasBound) {
  std::vector<double> survival{1.0, 0.5, 0.25, 0.125, 0.0};
  EXPECT_DOUBLE_EQ(truncation_bias_bound(2.0, survival, 0.0, 1), 2.0 * 1.875);
  EXPECT_DOUBLE_EQ(truncation_bias_bound(2.0, survival, 0.0, 3), 2.0 * 1.125);
  ChainDiagnostics d;
  d.survival = survival;
  d.expected_length = 1.875;
  EXPECT_DOUBLE_EQ(truncation_bias_bound(1.0, d, 2), 1.375);
}

TEST(Verification, SuitePassesAndFaultIsCaught) {
  for (std::uint64_t seed : {0u, 1u}) {
    for (const auto& r : verify_model(seed)) EXPECT_TRUE(r.passed) << r.property << " seed " << seed;
  }
  VerifyOptions bad;
  bad.inject_fault = true;
  bool stationary_failed = false;
  for (const auto& r : verify_model(0, bad)) {
    if (r.property == "collapsed_stationary_random" && !r.passed) stationary_failed = true;
  }
  EXPECT_TRUE(stationary_failed);
}

TEST(Verification, RandomStoppingSetIsProper) {
  Rng rng(3);
  const Rbm p = random_model(3, 4, 1.0, rng);
  for (double keep : {0.0, 0.5, 1.0}) {
    const StoppingSet s = random_stopping_set(p, keep, rng);
    EXPECT_GE(s.size(), 1u);
    EXPECT_EQ(s.is_proper_subset(), std::optional<bool>(true));
  }
}
