#pragma once

// Synthetic contextual-bandit environments, Monte Carlo oracles for the
// population actor/critic targets, single-episode simulation with regret
// tracking, and the repeated-episode rejection-rate experiment.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "robandit/agents.hpp"
#include "robandit/inference.hpp"
#include "robandit/optimization.hpp"
#include "robandit/policy_core.hpp"
#include "robandit/seeding.hpp"

namespace robandit {

enum class ContextLaw { kGaussianTruncated, kTable };
enum class MeanReward { kLinear, kMaxAdjustedLinear, kConstant };

std::string to_string(ContextLaw law);
std::string to_string(MeanReward mean);
ContextLaw context_law_from_string(const std::string& name);
MeanReward mean_reward_from_string(const std::string& name);

struct EnvironmentSpec {
  Eigen::Index num_arms = 2;
  Eigen::Index dim = 4;
  ContextLaw context_law = ContextLaw::kGaussianTruncated;
  MeanReward mean_reward = MeanReward::kMaxAdjustedLinear;
  Vector true_mu;
  /// Mean reward of every arm under MeanReward::kConstant.
  double constant_value = 0.0;
  double noise_sd = 0.01;
  std::uint64_t seed = 42;
  /// Context sets drawn uniformly with replacement under ContextLaw::kTable.
  std::vector<Matrix> context_table;

  void validate() const;
  /// Canonical text form; equal strings mean equal environments.
  std::string canonical() const;
};

/// Two arms, four features, truncated Gaussian contexts, rewards
/// b_i^T mu - max_j b_j^T mu + N(0, 0.01^2) with mu = (-0.577, 0.577, 0.577, 0).
EnvironmentSpec misspecified_reward_environment();

struct RoundSample {
  ContextSet context;
  Vector true_means;
  Vector rewards;
  /// Arms whose realized reward was clamped into [-1, 1].
  int clipped = 0;
};

/// Conditional mean reward of each arm given the context.
Vector true_mean_rewards(const EnvironmentSpec& env, const ContextSet& context);

/// Draws one context set (rows with norm > 1 are rescaled to norm 1).
ContextSet sample_context(const EnvironmentSpec& env, Rng& rng);

RoundSample sample_round(const EnvironmentSpec& env, Rng& rng);

/// Maximizer of the Monte Carlo estimate of
/// E[sum_i E[r_i | b] pi_theta(b, i)] - lambda theta^T theta.
ActorParams oracle_theta_star(const EnvironmentSpec& env, double lambda, int mc_samples,
                              const OptimizerConfig& opt, std::uint64_t mc_seed);

/// oracle_theta_star with a file cache under `cache_dir`, keyed by a hash of
/// every input.
ActorParams cached_oracle_theta_star(const EnvironmentSpec& env, double lambda, int mc_samples,
                                     const OptimizerConfig& opt, std::uint64_t mc_seed,
                                     const std::filesystem::path& cache_dir);

struct MuStarOracle {
  CriticParams mu;
  /// Smallest eigenvalue of the policy-weighted Gram matrix.
  double phi_squared = 0.0;
};

/// G^{-1} h with G = E[sum_i pi_i x_i x_i^T], h = E[sum_i pi_i x_i E[r_i | b]] and
/// x_i = b_i - sum_j pi_j b_j, all under pi = pi_{theta_star}.
MuStarOracle oracle_mu_star(const EnvironmentSpec& env, const ActorParams& theta_star,
                            int mc_samples, std::uint64_t mc_seed);

struct RegretTrace {
  /// Term t: sum_i E[r_{t,i} | b_t] (pi_{theta*}(b_t, i) - p_agent(b_t, i)).
  std::vector<double> terms;
  std::vector<double> cumulative;
};

struct Episode {
  InteractionLog log;
  RegretTrace regret;
  std::vector<Vector> theta_trace;
  std::vector<Vector> mu_trace;
  std::vector<double> cumulative_reward;
  int clipped_rewards = 0;
};

/// Runs `horizon` rounds. Contexts and rewards come from stream
/// derive_seed(episode_seed, 1); the agent's uniform draws from
/// derive_seed(episode_seed, 2). Regret is tracked only when `theta_star` is set.
Episode run_episode(Agent& agent, const EnvironmentSpec& env, int horizon,
                    std::uint64_t episode_seed,
                    const std::optional<ActorParams>& theta_star = std::nullopt);

struct ExperimentConfig {
  EnvironmentSpec env;
  int horizon = 50;
  int repetitions = 100;
  std::vector<AgentKind> agents{AgentKind::kEpsilonGreedy, AgentKind::kActorCritic,
                                AgentKind::kProposed};
  HyperParams hyper;
  OptimizerConfig opt;
  std::uint64_t base_seed = 42;
  /// Worker threads; 0 means hardware concurrency.
  int parallelism = 0;

  void validate() const;
};

/// Seed of repetition `rep`; every agent sees the same environment stream.
std::uint64_t repetition_seed(std::uint64_t base_seed, int rep);

struct ParameterRate {
  std::string label;
  int rejections = 0;
  double rate = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

struct QuantileRow {
  int t = 0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
};

struct AgentSummary {
  AgentKind agent = AgentKind::kProposed;
  std::vector<ParameterRate> rates;
  /// Repetitions where the covariance could not be formed; counted as
  /// non-rejections.
  int inference_unavailable = 0;
  int clipped_rewards = 0;
  std::vector<QuantileRow> cumulative_reward;
  std::vector<Vector> final_theta;
};

struct ExperimentResult {
  int repetitions = 0;
  double alpha = 0.05;
  std::vector<AgentSummary> agents;
};

/// Tests applied at the end of one episode: actor coordinates for the
/// proposed and baseline agents, each arm's own block of stacked coefficients
/// for epsilon-greedy. Throws InferenceUnavailable when the covariance is
/// singular.
TestReport episode_test(const Agent& agent, double lambda, double alpha);

/// Labels episode_test emits for an agent kind.
std::vector<std::string> test_labels(AgentKind kind, Eigen::Index num_arms, Eigen::Index dim);

ExperimentResult rejection_rate_experiment(const ExperimentConfig& config);

/// Half-width 1.96 sqrt(alpha (1 - alpha) / n) around an observed rate.
std::pair<double, double> rate_interval(double rate, double alpha, int n);

/// Type-7 (linear interpolation) sample quantile; `values` need not be sorted.
double quantile(std::vector<double> values, double q);

}  // namespace robandit
