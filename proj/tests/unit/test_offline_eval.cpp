#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "robandit/errors.hpp"
#include "robandit/offline_eval.hpp"
#include "test_util.hpp"

namespace robandit {
namespace {

using testing::vec;

LoggedDataSpec spec_with(Vector logging, int n, std::uint64_t seed) {
  LoggedDataSpec spec;
  spec.feature_dim = 4;
  spec.num_records = n;
  spec.logging_coefficients = std::move(logging);
  spec.reward_mu = vec({0.3, -0.2, 0.1, 0.4, -0.3, 0.2, 0.5, -0.1});
  spec.seed = seed;
  return spec;
}

TEST(StackContexts, Layout) {
  const StackedContext s = stack_contexts(vec({1, 0, 0, 0}), 2);
  EXPECT_EQ(s.context.arm(0), vec({1, 0, 0, 0, 0, 0, 0, 0}));
  EXPECT_EQ(s.context.arm(1), vec({0, 0, 0, 0, 1, 0, 0, 0}));
  EXPECT_EQ(s.scale, 1.0);
  const Vector x = vec({0.2, -0.4, 0.1, 0.3});
  const Vector a = advantage_features(stack_contexts(x, 2).context, ActorParams{Vector::Zero(8)}, 0);
  Vector expected(8);
  expected << x / 2, -x / 2;
  EXPECT_LT((a - expected).norm(), 1e-15);
}

TEST(StackContexts, RescalesLongRows) {
  const StackedContext s = stack_contexts(vec({3, 4}), 2);
  EXPECT_NEAR(s.scale, 0.2, 1e-15);
  EXPECT_NEAR(s.context.arm(0).norm(), 1.0, 1e-15);
}

TEST(Logit, BalancedActionsGiveOneHalf) {
  LoggedDataset data;
  data.feature_dim = 1;
  // Every (feature, action) pair occurs equally often, so the slope is exactly 0.
  for (int k = 0; k < 100; ++k) {
    data.records.push_back({vec({(k / 2) % 2 == 0 ? 0.5 : -0.5}), k % 2, 0.0, std::nullopt});
  }
  const PropensityModel m = fit_logging_propensity(data);
  EXPECT_NEAR(m.coefficients(0), 0.0, 1e-10);
  EXPECT_NEAR(m.coefficients(1), 0.0, 1e-10);
  for (const auto& r : data.records) EXPECT_NEAR(*r.propensity, 0.5, 1e-10);
  EXPECT_LE(m.gradient_norm, kLogitGradientTolerance);
}

TEST(Logit, IndependentLabelsGiveSmallSlopes) {
  LoggedDataSpec spec = spec_with(vec({0.0, 0.0, 0.0, 0.0, 0.0}), 4000, 17);
  LoggedDataset data = generate_logged_data(spec);
  const PropensityModel m = fit_logging_propensity(data);
  for (int j = 1; j <= 4; ++j) EXPECT_LT(std::abs(m.coefficients(j)), 3.0 * m.standard_errors(j));
}

TEST(Logit, RecoversLoggingCoefficients) {
  const Vector truth = vec({0.4, 1.0, -0.8, 0.5, 0.0});
  LoggedDataset data = generate_logged_data(spec_with(truth, 5000, 18));
  const PropensityModel m = fit_logging_propensity(data);
  for (int j = 0; j < 5; ++j) {
    EXPECT_LT(std::abs(m.coefficients(j) - truth(j)), 3.0 * m.standard_errors(j)) << j;
  }
}

TEST(Logit, SeparationFails) {
  LoggedDataset data;
  data.feature_dim = 1;
  for (int k = 0; k < 40; ++k) {
    const double x = (k - 19.5) / 40.0;
    data.records.push_back({vec({x}), x > 0 ? 1 : 0, 0.0, std::nullopt});
  }
  EXPECT_THROW(fit_logging_propensity(data), FitFailed);
}

TEST(Logit, SingleActionFails) {
  LoggedDataset data;
  data.feature_dim = 1;
  for (int k = 0; k < 10; ++k) data.records.push_back({vec({0.1 * k}), 0, 0.0, std::nullopt});
  EXPECT_THROW(fit_logging_propensity(data), FitFailed);
}

TEST(Bootstrap, Summaries) {
  const BootstrapSummary ones = bootstrap_summary({1, 1, 1});
  EXPECT_DOUBLE_EQ(ones.mean, 1.0);
  EXPECT_DOUBLE_EQ(ones.sd, 0.0);
  const BootstrapSummary two = bootstrap_summary({0, 2});
  EXPECT_DOUBLE_EQ(two.mean, 1.0);
  EXPECT_DOUBLE_EQ(two.sd, std::sqrt(2.0));
  EXPECT_THROW(bootstrap_summary({1.0}), std::invalid_argument);
}

TEST(Replay, UniformLoggingDeterministicTarget) {
  // A near-deterministic target keeps about half of uniformly logged records.
  LoggedDataset data = generate_logged_data(spec_with(vec({0, 0, 0, 0, 0}), 4000, 19));
  const Vector theta = vec({200, 0, 0, 0, -200, 0, 0, 0});
  const AgentFactory factory = [&] { return std::make_unique<FixedPolicyAgent>(ActorParams{theta}); };
  const ReplayResult r = replay_evaluate(data, factory, 100000, 1, 1.0 / 0.5);
  EXPECT_TRUE(r.partial);
  EXPECT_EQ(r.records_consumed, 4000);
  const double rate = static_cast<double>(r.rounds_used) / 4000.0;
  EXPECT_NEAR(rate, 0.5, 3.0 * std::sqrt(0.25 / 4000.0));
}

TEST(Replay, SelfEvaluationAcceptsAtOneOverM) {
  // With no intercept the logit logger is the stacked softmax with theta = (0, beta).
  const Vector logging = vec({0.0, 0.5, -0.5, 0.2, 0.1});
  LoggedDataset data = generate_logged_data(spec_with(logging, 6000, 20));
  Vector theta = Vector::Zero(8);
  theta.tail(4) = logging.tail(4);
  const double M = 4.0;
  const AgentFactory factory = [&] { return std::make_unique<FixedPolicyAgent>(ActorParams{theta}); };
  const ReplayResult res = replay_evaluate(data, factory, 1000000, 2, M);
  const double n = 6000.0;
  EXPECT_NEAR(res.rounds_used / n, 1.0 / M, 3.0 * std::sqrt((1.0 / M) * (1.0 - 1.0 / M) / n));
}

TEST(Replay, RatioAboveBoundIsInvalid) {
  LoggedDataset data = generate_logged_data(spec_with(vec({0, 0, 0, 0, 0}), 50, 21));
  const Vector theta = vec({200, 0, 0, 0, -200, 0, 0, 0});
  const AgentFactory factory = [&] { return std::make_unique<FixedPolicyAgent>(ActorParams{theta}); };
  EXPECT_THROW(replay_evaluate(data, factory, 40, 1, 1.5), EvaluationInvalid);
}

TEST(Replay, Deterministic) {
  LoggedDataset data = generate_logged_data(spec_with(vec({0.1, 0.3, 0, 0, 0}), 500, 22));
  const AgentFactory factory = [] {
    return make_agent(AgentKind::kEpsilonGreedy, 8, 2, HyperParams{}, OptimizerConfig{});
  };
  const ReplayResult a = replay_evaluate(data, factory, 100, 9);
  const ReplayResult b = replay_evaluate(data, factory, 100, 9);
  EXPECT_EQ(a.cumulative_reward, b.cumulative_reward);
  EXPECT_EQ(a.records_consumed, b.records_consumed);
}

TEST(Replay, MissingPropensityIsRejected) {
  LoggedDataSpec spec = spec_with(vec({0, 0, 0, 0, 0}), 30, 23);
  spec.include_propensity = false;
  LoggedDataset data = generate_logged_data(spec);
  const AgentFactory factory = [] {
    return std::make_unique<FixedPolicyAgent>(ActorParams{Vector::Zero(8)});
  };
  EXPECT_THROW(replay_evaluate(data, factory, 10, 1), InvalidData);
}

TEST(Csv, RoundTrip) {
  const LoggedDataset data = generate_logged_data(spec_with(vec({0.1, 0.2, 0.3, 0.4, 0.5}), 25, 24));
  std::stringstream buffer;
  write_logged_csv(buffer, data);
  const LoggedDataset back = read_logged_csv(buffer);
  ASSERT_EQ(back.records.size(), data.records.size());
  for (std::size_t k = 0; k < data.records.size(); ++k) {
    EXPECT_EQ(back.records[k].x, data.records[k].x);
    EXPECT_EQ(back.records[k].action, data.records[k].action);
    EXPECT_EQ(back.records[k].reward, data.records[k].reward);
    EXPECT_EQ(back.records[k].propensity, data.records[k].propensity);
  }
}

TEST(Csv, RejectsMalformedInput) {
  std::stringstream bad_header("t,x_1,arm,reward\n1,0.1,1,0.2\n");
  EXPECT_THROW(read_logged_csv(bad_header), InvalidData);
  std::stringstream bad_action("t,x_1,action,reward\n1,0.1,0,0.2\n");
  EXPECT_THROW(read_logged_csv(bad_action), InvalidData);
}

}  // namespace
}  // namespace robandit
