#pragma once

// Sequential decision agents behind one interface:
//  - ActorImproperCriticAgent: importance-weighted, norm-constrained advantage
//    critic with a softmax actor (robust to critic misspecification).
//  - LinearActorCriticAgent: ridge critic on raw contexts and truncated reward
//    estimates (the linear-reward baseline).
//  - EpsilonGreedyAgent: per-arm inverse-propensity weighted LSE on stacked
//    contexts.
//  - FixedPolicyAgent: a non-learning softmax policy, used for replay checks.
//
// An agent instance is single-threaded; distinct instances share nothing.

#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "robandit/estimation.hpp"
#include "robandit/optimization.hpp"
#include "robandit/policy_core.hpp"

namespace robandit {

struct HyperParams {
  /// Actor penalty.
  double lambda = 0.001;
  /// Critic norm cap; infinity disables the constraint.
  double norm_cap = std::numeric_limits<double>::infinity();
  /// Ridge scale of the baseline critic.
  double ridge_scale = 1.0;
  /// Exploration rate of the epsilon-greedy comparator.
  double epsilon = 0.01;
  /// Test significance level.
  double alpha = 0.05;

  void validate() const;
};

enum class AgentKind { kProposed, kActorCritic, kEpsilonGreedy, kFixed };

std::string to_string(AgentKind kind);
AgentKind agent_kind_from_string(const std::string& name);

struct ActDecision {
  int arm = 0;
  double propensity = 1.0;
};

/// Inverse-CDF draw from a probability vector; `u` in [0, 1).
int sample_arm(const Vector& probabilities, double u);

class Agent {
 public:
  virtual ~Agent() = default;

  virtual AgentKind kind() const = 0;

  /// Action probabilities the agent would use on `context` this round.
  virtual Vector probabilities(const ContextSet& context) const = 0;

  /// Chooses an arm from one uniform draw and reports its propensity.
  virtual ActDecision act(const ContextSet& context, double uniform_draw) const;

  /// Appends the record and refits. The record's propensity must be the one
  /// this agent reported for it.
  virtual void update(const InteractionRecord& record) = 0;

  const InteractionLog& log() const noexcept { return log_; }
  int round() const noexcept { return static_cast<int>(log_.size()); }

  /// Current actor parameters (zero for agents without an actor).
  virtual const ActorParams& actor() const = 0;

  /// Current critic parameters, flattened. The epsilon-greedy agent returns the
  /// per-arm stacked coefficients concatenated arm by arm.
  virtual Vector critic() const = 0;

 protected:
  InteractionLog log_;
};

class ActorImproperCriticAgent final : public Agent {
 public:
  ActorImproperCriticAgent(Eigen::Index dim, HyperParams hyper, OptimizerConfig opt);

  AgentKind kind() const override { return AgentKind::kProposed; }
  Vector probabilities(const ContextSet& context) const override;
  void update(const InteractionRecord& record) override;
  const ActorParams& actor() const override { return theta_; }
  Vector critic() const override { return mu_.mu; }

  const CriticParams& critic_params() const noexcept { return mu_; }
  /// Importance weights of the most recent critic solve.
  const Vector& last_weights() const noexcept { return last_weights_; }

 private:
  HyperParams hyper_;
  OptimizerConfig opt_;
  ActorParams theta_;
  CriticParams mu_;
  Vector last_weights_;
};

class LinearActorCriticAgent final : public Agent {
 public:
  LinearActorCriticAgent(Eigen::Index dim, HyperParams hyper, OptimizerConfig opt);

  AgentKind kind() const override { return AgentKind::kActorCritic; }
  Vector probabilities(const ContextSet& context) const override;
  void update(const InteractionRecord& record) override;
  const ActorParams& actor() const override { return theta_; }
  Vector critic() const override { return mu_.mu; }

  const RidgeState& ridge() const noexcept { return ridge_; }

 private:
  HyperParams hyper_;
  OptimizerConfig opt_;
  ActorParams theta_;
  CriticParams mu_;
  RidgeState ridge_;
};

class EpsilonGreedyAgent final : public Agent {
 public:
  EpsilonGreedyAgent(Eigen::Index dim, Eigen::Index num_arms, HyperParams hyper);

  AgentKind kind() const override { return AgentKind::kEpsilonGreedy; }
  Vector probabilities(const ContextSet& context) const override;
  ActDecision act(const ContextSet& context, double uniform_draw) const override;
  void update(const InteractionRecord& record) override;
  const ActorParams& actor() const override { return zero_actor_; }
  Vector critic() const override;

  /// Rounds of uniform play before the per-arm fits are used: 2 * N * d.
  int warmup_rounds() const noexcept { return warmup_rounds_; }
  bool in_warmup() const noexcept { return round() < warmup_rounds_; }
  const std::vector<Vector>& arm_coefficients() const noexcept { return arm_mu_; }

 private:
  std::vector<int> greedy_set(const ContextSet& context) const;

  Eigen::Index dim_;
  Eigen::Index num_arms_;
  HyperParams hyper_;
  int warmup_rounds_;
  ActorParams zero_actor_;
  std::vector<Vector> arm_mu_;
};

class FixedPolicyAgent final : public Agent {
 public:
  explicit FixedPolicyAgent(ActorParams theta);

  AgentKind kind() const override { return AgentKind::kFixed; }
  Vector probabilities(const ContextSet& context) const override;
  void update(const InteractionRecord& record) override;
  const ActorParams& actor() const override { return theta_; }
  Vector critic() const override { return Vector(); }

 private:
  ActorParams theta_;
};

/// Builds an agent of the given kind. `fixed_theta` is required for kFixed.
std::unique_ptr<Agent> make_agent(AgentKind kind, Eigen::Index dim, Eigen::Index num_arms,
                                  const HyperParams& hyper, const OptimizerConfig& opt,
                                  const std::optional<Vector>& fixed_theta = std::nullopt);

/// Maps beta = theta^T theta to the exploration rate 1 / (1 + exp(sqrt(beta)))
/// guaranteed by a softmax policy of that norm over two arms.
double epsilon_from_lambda(double beta_hat);

}  // namespace robandit
