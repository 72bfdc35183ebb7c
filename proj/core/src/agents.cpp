#include "robandit/agents.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "robandit/errors.hpp"

namespace robandit {

void HyperParams::validate() const {
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be > 0");
  if (!(norm_cap > 1.0)) throw std::invalid_argument("norm cap C must be > 1");
  if (!(ridge_scale > 0.0)) throw std::invalid_argument("ridge scale xi must be > 0");
  if (!(epsilon > 0.0) || epsilon > 1.0) throw std::invalid_argument("epsilon must be in (0, 1]");
  if (!(alpha > 0.0) || alpha > 1.0) throw std::invalid_argument("alpha must be in (0, 1]");
}

std::string to_string(AgentKind kind) {
  switch (kind) {
    case AgentKind::kProposed: return "proposed";
    case AgentKind::kActorCritic: return "ac";
    case AgentKind::kEpsilonGreedy: return "egreedy";
    case AgentKind::kFixed: return "fixed";
  }
  return "unknown";
}

AgentKind agent_kind_from_string(const std::string& name) {
  if (name == "proposed") return AgentKind::kProposed;
  if (name == "ac") return AgentKind::kActorCritic;
  if (name == "egreedy") return AgentKind::kEpsilonGreedy;
  if (name == "fixed") return AgentKind::kFixed;
  throw std::invalid_argument("unknown agent '" + name + "'");
}

int sample_arm(const Vector& probabilities, double u) {
  if (!(u >= 0.0) || !(u < 1.0)) throw std::invalid_argument("uniform draw must lie in [0, 1)");
  double cumulative = 0.0;
  for (Eigen::Index i = 0; i < probabilities.size(); ++i) {
    cumulative += probabilities(i);
    if (u < cumulative) return static_cast<int>(i);
  }
  // Rounding left u above the final partial sum.
  return static_cast<int>(probabilities.size() - 1);
}

ActDecision Agent::act(const ContextSet& context, double uniform_draw) const {
  const Vector probs = probabilities(context);
  const int arm = sample_arm(probs, uniform_draw);
  return {arm, probs(arm)};
}

// ---------------------------------------------------------------------------

ActorImproperCriticAgent::ActorImproperCriticAgent(Eigen::Index dim, HyperParams hyper,
                                                   OptimizerConfig opt)
    : hyper_(hyper), opt_(std::move(opt)), theta_{Vector::Zero(dim)}, mu_{Vector::Zero(dim)} {
  hyper_.validate();
  opt_.validate();
}

Vector ActorImproperCriticAgent::probabilities(const ContextSet& context) const {
  return softmax_policy(context, theta_);
}

void ActorImproperCriticAgent::update(const InteractionRecord& record) {
  log_.append(record);
  const ActorParams previous = theta_;

  // Critic: importance weights pi_{theta_{t-1}}(b_tau, a_tau) / propensity_tau.
  const WlsProblem problem = build_wls_problem(log_, previous);
  mu_ = constrained_wls(problem, hyper_.norm_cap);
  last_weights_ = problem.weights;

  // Actor: maximize the empirical penalized value under the new critic.
  const PenalizedPolicyValue objective =
      PenalizedPolicyValue::from_critic(log_, mu_, hyper_.lambda);
  OptimizerConfig opt = opt_;
  opt.warm_start = previous.theta;
  theta_.theta = maximize(std::cref(objective), previous.theta.size(), opt).point;
}

// ---------------------------------------------------------------------------

LinearActorCriticAgent::LinearActorCriticAgent(Eigen::Index dim, HyperParams hyper,
                                               OptimizerConfig opt)
    : hyper_(hyper),
      opt_(std::move(opt)),
      theta_{Vector::Zero(dim)},
      mu_{Vector::Zero(dim)},
      ridge_(RidgeState::initial(dim, hyper.ridge_scale)) {
  hyper_.validate();
  opt_.validate();
}

Vector LinearActorCriticAgent::probabilities(const ContextSet& context) const {
  return softmax_policy(context, theta_);
}

void LinearActorCriticAgent::update(const InteractionRecord& record) {
  log_.append(record);
  RidgeUpdate next = ridge_update(ridge_, record.context.arm(record.arm), record.reward);
  ridge_ = std::move(next.state);
  mu_ = std::move(next.mu);

  // Recompute truncated estimates for every past round under the new critic.
  const Eigen::Index t = static_cast<Eigen::Index>(log_.size());
  Matrix estimates(t, log_.num_arms());
  for (Eigen::Index tau = 0; tau < t; ++tau) {
    const Vector raw = log_[static_cast<std::size_t>(tau)].context.arms() * mu_.mu;
    estimates.row(tau) = raw.unaryExpr(&truncate_reward_estimate).transpose();
  }
  const PenalizedPolicyValue objective =
      PenalizedPolicyValue::from_values(log_, estimates, hyper_.lambda);
  OptimizerConfig opt = opt_;
  opt.warm_start = theta_.theta;
  theta_.theta = maximize(std::cref(objective), theta_.theta.size(), opt).point;
}

// ---------------------------------------------------------------------------

EpsilonGreedyAgent::EpsilonGreedyAgent(Eigen::Index dim, Eigen::Index num_arms,
                                       HyperParams hyper)
    : dim_(dim),
      num_arms_(num_arms),
      hyper_(hyper),
      warmup_rounds_(static_cast<int>(2 * num_arms * dim)),
      zero_actor_{Vector::Zero(dim)},
      arm_mu_(static_cast<std::size_t>(num_arms), Vector::Zero(num_arms * dim)) {
  hyper_.validate();
  if (num_arms < 2 || dim < 1) throw std::invalid_argument("epsilon-greedy needs N >= 2, d >= 1");
}

std::vector<int> EpsilonGreedyAgent::greedy_set(const ContextSet& context) const {
  const Vector stacked = stack_arm_contexts(context);
  std::vector<double> scores(static_cast<std::size_t>(num_arms_));
  for (Eigen::Index i = 0; i < num_arms_; ++i) {
    scores[static_cast<std::size_t>(i)] = stacked.dot(arm_mu_[static_cast<std::size_t>(i)]);
  }
  const double best = *std::max_element(scores.begin(), scores.end());
  std::vector<int> ties;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i] == best) ties.push_back(static_cast<int>(i));
  }
  return ties;
}

Vector EpsilonGreedyAgent::probabilities(const ContextSet& context) const {
  if (context.num_arms() != num_arms_ || context.dim() != dim_) {
    throw std::invalid_argument("context shape does not match the agent");
  }
  const double n = static_cast<double>(num_arms_);
  if (in_warmup()) return Vector::Constant(num_arms_, 1.0 / n);
  Vector probs = Vector::Constant(num_arms_, hyper_.epsilon / n);
  const std::vector<int> ties = greedy_set(context);
  for (int arm : ties) probs(arm) += (1.0 - hyper_.epsilon) / static_cast<double>(ties.size());
  return probs;
}

ActDecision EpsilonGreedyAgent::act(const ContextSet& context, double uniform_draw) const {
  if (!(uniform_draw >= 0.0) || !(uniform_draw < 1.0)) {
    throw std::invalid_argument("uniform draw must lie in [0, 1)");
  }
  const Vector probs = probabilities(context);
  const double n = static_cast<double>(num_arms_);
  int arm = 0;
  if (in_warmup()) {
    arm = std::min(static_cast<int>(uniform_draw * n), static_cast<int>(num_arms_) - 1);
  } else if (uniform_draw < hyper_.epsilon) {
    // Explore: rescale the draw onto the arms.
    arm = std::min(static_cast<int>(uniform_draw / hyper_.epsilon * n),
                   static_cast<int>(num_arms_) - 1);
  } else {
    const std::vector<int> ties = greedy_set(context);
    const double v = (uniform_draw - hyper_.epsilon) / (1.0 - hyper_.epsilon);
    const auto pick = std::min(static_cast<std::size_t>(v * static_cast<double>(ties.size())),
                               ties.size() - 1);
    arm = ties[pick];
  }
  return {arm, probs(arm)};
}

void EpsilonGreedyAgent::update(const InteractionRecord& record) {
  log_.append(record);
  if (in_warmup()) return;
  for (Eigen::Index i = 0; i < num_arms_; ++i) {
    try {
      arm_mu_[static_cast<std::size_t>(i)] =
          epsilon_greedy_wlse(log_, static_cast<int>(i), num_arms_).mu;
    } catch (const InvalidState&) {
      arm_mu_[static_cast<std::size_t>(i)].setZero();
    }
  }
}

Vector EpsilonGreedyAgent::critic() const {
  Vector flat(num_arms_ * num_arms_ * dim_);
  for (Eigen::Index i = 0; i < num_arms_; ++i) {
    flat.segment(i * num_arms_ * dim_, num_arms_ * dim_) = arm_mu_[static_cast<std::size_t>(i)];
  }
  return flat;
}

// ---------------------------------------------------------------------------

FixedPolicyAgent::FixedPolicyAgent(ActorParams theta) : theta_(std::move(theta)) {}

Vector FixedPolicyAgent::probabilities(const ContextSet& context) const {
  return softmax_policy(context, theta_);
}

void FixedPolicyAgent::update(const InteractionRecord& record) { log_.append(record); }

// ---------------------------------------------------------------------------

std::unique_ptr<Agent> make_agent(AgentKind kind, Eigen::Index dim, Eigen::Index num_arms,
                                  const HyperParams& hyper, const OptimizerConfig& opt,
                                  const std::optional<Vector>& fixed_theta) {
  switch (kind) {
    case AgentKind::kProposed:
      return std::make_unique<ActorImproperCriticAgent>(dim, hyper, opt);
    case AgentKind::kActorCritic:
      return std::make_unique<LinearActorCriticAgent>(dim, hyper, opt);
    case AgentKind::kEpsilonGreedy:
      return std::make_unique<EpsilonGreedyAgent>(dim, num_arms, hyper);
    case AgentKind::kFixed:
      if (!fixed_theta || fixed_theta->size() != dim) {
        throw std::invalid_argument("fixed policy needs a theta of dimension d");
      }
      return std::make_unique<FixedPolicyAgent>(ActorParams{*fixed_theta});
  }
  throw std::invalid_argument("unknown agent kind");
}

double epsilon_from_lambda(double beta_hat) {
  if (!(beta_hat >= 0.0)) throw std::invalid_argument("beta must be >= 0");
  return 1.0 / (1.0 + std::exp(std::sqrt(beta_hat)));
}

}  // namespace robandit
