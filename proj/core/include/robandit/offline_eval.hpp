#pragma once

// Offline evaluation on logged bandit data by rejection-sampling replay,
// with a binary logit model for unknown logging propensities, bootstrap
// summaries, and a synthetic logged-data generator.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "robandit/agents.hpp"
#include "robandit/policy_core.hpp"
#include "robandit/seeding.hpp"

namespace robandit {

struct LoggedRecord {
  Vector x;
  /// 0-based action index.
  int action = 0;
  double reward = 0.0;
  /// Probability the logging policy gave to `action`.
  std::optional<double> propensity;
};

struct LoggedDataset {
  Eigen::Index num_actions = 2;
  Eigen::Index feature_dim = 0;
  std::vector<LoggedRecord> records;

  /// Throws InvalidData on out-of-range actions, rewards or propensities.
  void validate() const;
  bool has_propensities() const;
  double min_propensity() const;
};

struct StackedContext {
  ContextSet context;
  /// Factor the stacked rows were multiplied by (1 when no rescaling).
  double scale = 1.0;
};

/// Arm i gets x in feature block i and zeros elsewhere (d = N * d').
/// Rows are rescaled to norm 1 when ||x|| > 1.
StackedContext stack_contexts(const Vector& x, Eigen::Index num_arms);

struct PropensityModel {
  /// Intercept first, then one slope per feature.
  Vector coefficients;
  Vector standard_errors;
  int iterations = 0;
  double gradient_norm = 0.0;

  /// P(action = 1 | x) under the fitted logit.
  double probability_second(const Vector& x) const;
};

inline constexpr double kLogitGradientTolerance = 1e-8;
inline constexpr int kLogitMaxIterations = 100;

/// Maximum-likelihood logit of P(action = 1 | x) by damped Newton iteration,
/// stopped when the mean log-likelihood gradient has norm <= 1e-8. Writes the
/// fitted propensity of each logged action into `data`. Two actions only.
/// Throws FitFailed on separation or when an action never occurs.
PropensityModel fit_logging_propensity(LoggedDataset& data);

using AgentFactory = std::function<std::unique_ptr<Agent>()>;

struct ReplayResult {
  double cumulative_reward = 0.0;
  int rounds_used = 0;
  int records_consumed = 0;
  /// True when the data ran out before the target number of rounds.
  bool partial = false;
};

/// Streams records in order. A record is accepted with probability
/// pi_agent(b, a) / (M p_log(a)); accepted records update the agent with the
/// logged reward. M defaults to 1 / min logged propensity. An observed ratio
/// above M throws EvaluationInvalid.
ReplayResult replay_evaluate(const LoggedDataset& data, const AgentFactory& make_agent,
                             int target_rounds, std::uint64_t seed,
                             std::optional<double> ratio_bound = std::nullopt);

/// Same-size resample with replacement.
LoggedDataset bootstrap_resample(const LoggedDataset& data, Rng& rng);

struct BootstrapSummary {
  double mean = 0.0;
  /// Sample standard deviation (n - 1 denominator).
  double sd = 0.0;
  int n = 0;
};

/// Requires at least two values.
BootstrapSummary bootstrap_summary(const std::vector<double>& values);

struct BootstrapReplay {
  std::vector<ReplayResult> runs;
  BootstrapSummary summary;
};

/// Replays `resamples` bootstrap copies of `data`; copy b uses seed
/// derive_seed(seed, b) for both resampling and acceptance draws.
BootstrapReplay bootstrap_replay(const LoggedDataset& data, const AgentFactory& make_agent,
                                 int target_rounds, int resamples, std::uint64_t seed,
                                 std::optional<double> ratio_bound = std::nullopt,
                                 int parallelism = 0);

struct LoggedDataSpec {
  Eigen::Index feature_dim = 4;
  int num_records = 1000;
  /// Logit of P(action = 1 | x): intercept, then d' slopes.
  Vector logging_coefficients;
  /// Reward mean for action a is x^T reward_mu.segment(a d', d').
  Vector reward_mu;
  double noise_sd = 0.1;
  std::uint64_t seed = 1;
  bool include_propensity = true;
};

/// Features are standard normal with norm capped at 1; rewards are clamped
/// to [-1, 1].
LoggedDataset generate_logged_data(const LoggedDataSpec& spec);

/// Header `t,x_1..x_{d'},action,reward[,propensity]`; actions are 1-based.
LoggedDataset read_logged_csv(std::istream& in);
LoggedDataset read_logged_csv(const std::string& path);
void write_logged_csv(std::ostream& out, const LoggedDataset& data);

}  // namespace robandit
