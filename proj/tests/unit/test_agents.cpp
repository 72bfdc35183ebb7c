#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "robandit/agents.hpp"
#include "robandit/errors.hpp"
#include "robandit/seeding.hpp"
#include "test_util.hpp"

namespace robandit {
namespace {

using testing::random_context;
using testing::rows;
using testing::vec;

OptimizerConfig light_optimizer() {
  OptimizerConfig opt;
  opt.grid_points_per_axis = 3;
  opt.num_seeds = 2;
  return opt;
}

TEST(SampleArm, InverseCdf) {
  EXPECT_EQ(sample_arm(vec({0.5, 0.5}), 0.3), 0);
  EXPECT_EQ(sample_arm(vec({0.5, 0.5}), 0.7), 1);
  EXPECT_EQ(sample_arm(vec({0.2, 0.3, 0.5}), 0.49), 1);
  EXPECT_THROW(sample_arm(vec({0.5, 0.5}), 1.0), std::invalid_argument);
}

TEST(ProposedAgent, FreshAgentActsUniformly) {
  ActorImproperCriticAgent agent(4, HyperParams{}, light_optimizer());
  const ContextSet ctx(rows({{0.1, 0.2, 0.3, 0.4}, {-0.4, 0.3, 0.0, 0.1}}));
  const ActDecision d = agent.act(ctx, 0.3);
  EXPECT_EQ(d.arm, 0);
  EXPECT_DOUBLE_EQ(d.propensity, 0.5);
  EXPECT_THROW(agent.act(ContextSet(rows({{0.1, 0.2}, {0.3, 0.4}})), 0.3), std::invalid_argument);
}

TEST(ProposedAgent, ZeroRewardsKeepZeroEstimates) {
  std::mt19937_64 rng(21);
  ActorImproperCriticAgent agent(3, HyperParams{}, light_optimizer());
  for (int t = 0; t < 15; ++t) {
    const ContextSet ctx = random_context(rng, 2, 3);
    const ActDecision d = agent.act(ctx, uniform01(rng));
    agent.update({ctx, d.arm, 0.0, d.propensity});
  }
  EXPECT_LT(agent.critic().norm(), 1e-12);
  EXPECT_LT(agent.actor().theta.norm(), 1e-5);
}

TEST(ProposedAgent, CriticWeightsUsePreviousActor) {
  std::mt19937_64 rng(22);
  ActorImproperCriticAgent agent(2, HyperParams{}, light_optimizer());
  for (int t = 0; t < 10; ++t) {
    const ContextSet ctx = random_context(rng, 2, 2);
    const ActDecision d = agent.act(ctx, uniform01(rng));
    const ActorParams before = agent.actor();
    agent.update({ctx, d.arm, 0.5 * ctx.arm(d.arm)(0), d.propensity});
    // The newest weight is pi_{theta_{t-1}}(b, a) / propensity.
    const double expected = softmax_policy(ctx, before)(d.arm) / d.propensity;
    const Vector& w = agent.last_weights();
    EXPECT_NEAR(w(w.size() - 1), expected, 1e-12);
  }
}

TEST(LinearAcAgent, ZeroCriticGivesZeroActor) {
  std::mt19937_64 rng(23);
  LinearActorCriticAgent agent(3, HyperParams{}, light_optimizer());
  for (int t = 0; t < 10; ++t) {
    const ContextSet ctx = random_context(rng, 2, 3);
    const ActDecision d = agent.act(ctx, uniform01(rng));
    agent.update({ctx, d.arm, 0.0, d.propensity});
  }
  EXPECT_LT(agent.critic().norm(), 1e-15);
  EXPECT_LT(agent.actor().theta.norm(), 1e-5);
}

TEST(LinearAcAgent, RidgeTracksChosenContexts) {
  std::mt19937_64 rng(24);
  HyperParams hyper;
  hyper.ridge_scale = 2.0;
  LinearActorCriticAgent agent(2, hyper, light_optimizer());
  Matrix B = 2.0 * Matrix::Identity(2, 2);
  Vector y = Vector::Zero(2);
  for (int t = 0; t < 8; ++t) {
    const ContextSet ctx = random_context(rng, 2, 2);
    const ActDecision d = agent.act(ctx, uniform01(rng));
    const double r = 0.3 - 0.1 * t;
    agent.update({ctx, d.arm, r, d.propensity});
    B += ctx.arm(d.arm) * ctx.arm(d.arm).transpose();
    y += ctx.arm(d.arm) * r;
  }
  EXPECT_LT((agent.critic() - B.ldlt().solve(y)).norm(), 1e-12);
}

TEST(EpsilonGreedy, FullExplorationIsUniform) {
  HyperParams hyper;
  hyper.epsilon = 1.0;
  EpsilonGreedyAgent agent(2, 3, hyper);
  std::mt19937_64 rng(25);
  for (int k = 0; k < 10; ++k) {
    const ContextSet ctx = random_context(rng, 3, 2);
    EXPECT_NEAR(agent.act(ctx, uniform01(rng)).propensity, 1.0 / 3.0, 1e-15);
  }
}

TEST(EpsilonGreedy, WarmupIsUniformThenGreedyMatchesArgmax) {
  HyperParams hyper;
  hyper.epsilon = 0.01;
  const Eigen::Index d = 3;
  EpsilonGreedyAgent agent(d, 2, hyper);
  EXPECT_EQ(agent.warmup_rounds(), 2 * 2 * 3);
  const Vector mu_star = vec({0.25, -0.15, 0.1, -0.2, 0.3, 0.05});
  std::mt19937_64 rng(26);
  for (int t = 0; t < 200; ++t) {
    const ContextSet ctx = random_context(rng, 2, d);
    if (agent.in_warmup()) {
      EXPECT_DOUBLE_EQ(agent.probabilities(ctx)(0), 0.5);
    }
    const ActDecision a = agent.act(ctx, uniform01(rng));
    // Noise-free linear rewards on stacked contexts, same coefficients for both arms.
    const double r = stack_arm_contexts(ctx).dot(mu_star) * (a.arm == 0 ? 1.0 : -1.0);
    agent.update({ctx, a.arm, std::clamp(r, -1.0, 1.0), a.propensity});
  }
  ASSERT_FALSE(agent.in_warmup());
  int agree = 0;
  for (int k = 0; k < 200; ++k) {
    const ContextSet ctx = random_context(rng, 2, d);
    const double v0 = stack_arm_contexts(ctx).dot(mu_star);
    const int best = v0 >= -v0 ? 0 : 1;
    const Vector p = agent.probabilities(ctx);
    agree += p(best) > 0.5 ? 1 : 0;
  }
  EXPECT_EQ(agree, 200);
}

TEST(FixedAgent, NeverLearns) {
  FixedPolicyAgent agent(ActorParams{vec({1.0, -1.0})});
  const ContextSet ctx(rows({{0.5, 0.0}, {0.0, 0.5}}));
  const Vector before = agent.probabilities(ctx);
  agent.update({ctx, 0, 1.0, before(0)});
  EXPECT_EQ(agent.probabilities(ctx), before);
  EXPECT_EQ(agent.round(), 1);
}

TEST(MakeAgent, KindsAndNames) {
  for (AgentKind k : {AgentKind::kProposed, AgentKind::kActorCritic, AgentKind::kEpsilonGreedy}) {
    EXPECT_EQ(make_agent(k, 2, 2, HyperParams{}, OptimizerConfig{})->kind(), k);
    EXPECT_EQ(agent_kind_from_string(to_string(k)), k);
  }
  EXPECT_THROW(make_agent(AgentKind::kFixed, 2, 2, HyperParams{}, OptimizerConfig{}),
               std::invalid_argument);
  EXPECT_THROW(agent_kind_from_string("ucb"), std::invalid_argument);
}

TEST(HyperParamsTest, Validation) {
  HyperParams h;
  EXPECT_NO_THROW(h.validate());
  h.lambda = 0.0;
  EXPECT_THROW(h.validate(), std::invalid_argument);
  h = HyperParams{};
  h.norm_cap = 1.0;
  EXPECT_THROW(h.validate(), std::invalid_argument);
  h = HyperParams{};
  h.epsilon = 1.5;
  EXPECT_THROW(h.validate(), std::invalid_argument);
}

TEST(EpsilonFromLambda, Values) {
  EXPECT_DOUBLE_EQ(epsilon_from_lambda(0.0), 0.5);
  const double l = std::log(99.0);
  EXPECT_NEAR(epsilon_from_lambda(l * l), 0.01, 1e-15);
  EXPECT_THROW(epsilon_from_lambda(-1.0), std::invalid_argument);
}

}  // namespace
}  // namespace robandit
