#include "robandit/sim_env.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "robandit/errors.hpp"
#include "robandit/estimation.hpp"
#include "parallel.hpp"

namespace robandit {

double standard_normal(Rng& rng) {
  for (;;) {
    const double u = 2.0 * uniform01(rng) - 1.0;
    const double v = 2.0 * uniform01(rng) - 1.0;
    const double s = u * u + v * v;
    if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
  }
}

std::string to_string(ContextLaw law) {
  return law == ContextLaw::kTable ? "table" : "gaussian-truncated";
}

std::string to_string(MeanReward mean) {
  switch (mean) {
    case MeanReward::kLinear: return "linear";
    case MeanReward::kMaxAdjustedLinear: return "max-adjusted-linear";
    case MeanReward::kConstant: return "constant";
  }
  return "unknown";
}

ContextLaw context_law_from_string(const std::string& name) {
  if (name == "gaussian-truncated") return ContextLaw::kGaussianTruncated;
  if (name == "table") return ContextLaw::kTable;
  throw std::invalid_argument("unknown context law '" + name + "'");
}

MeanReward mean_reward_from_string(const std::string& name) {
  if (name == "linear") return MeanReward::kLinear;
  if (name == "max-adjusted-linear") return MeanReward::kMaxAdjustedLinear;
  if (name == "constant") return MeanReward::kConstant;
  throw std::invalid_argument("unknown mean reward '" + name + "'");
}

namespace {

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void rescale_rows(Matrix& arms) {
  for (Eigen::Index i = 0; i < arms.rows(); ++i) {
    const double norm = arms.row(i).norm();
    if (norm > 1.0) arms.row(i) /= norm;
  }
}

}  // namespace

void EnvironmentSpec::validate() const {
  if (num_arms < 2) throw std::invalid_argument("environment needs N >= 2");
  if (dim < 1) throw std::invalid_argument("environment needs d >= 1");
  if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd)) {
    throw std::invalid_argument("noise_sd must be finite and >= 0");
  }
  if (mean_reward != MeanReward::kConstant) {
    if (true_mu.size() != dim) throw std::invalid_argument("true_mu must have d entries");
    if (!true_mu.allFinite()) throw std::invalid_argument("true_mu must be finite");
  } else if (!std::isfinite(constant_value)) {
    throw std::invalid_argument("constant_value must be finite");
  }
  if (context_law == ContextLaw::kTable) {
    if (context_table.empty()) throw std::invalid_argument("context table is empty");
    for (const auto& arms : context_table) {
      if (arms.rows() != num_arms || arms.cols() != dim) {
        throw std::invalid_argument("context table entry has the wrong shape");
      }
      ContextSet check(arms);  // norm and finiteness checks
    }
  }
}

std::string EnvironmentSpec::canonical() const {
  std::ostringstream out;
  out << "N=" << num_arms << ";d=" << dim << ";law=" << to_string(context_law)
      << ";mean=" << to_string(mean_reward) << ";mu=";
  for (Eigen::Index j = 0; j < true_mu.size(); ++j) out << format_double(true_mu(j)) << ',';
  out << ";const=" << format_double(constant_value) << ";sd=" << format_double(noise_sd)
      << ";seed=" << seed;
  if (context_law == ContextLaw::kTable) {
    out << ";table=";
    for (const auto& arms : context_table) {
      for (Eigen::Index k = 0; k < arms.size(); ++k) out << format_double(arms(k)) << ',';
      out << '|';
    }
  }
  return out.str();
}

EnvironmentSpec misspecified_reward_environment() {
  EnvironmentSpec env;
  env.num_arms = 2;
  env.dim = 4;
  env.context_law = ContextLaw::kGaussianTruncated;
  env.mean_reward = MeanReward::kMaxAdjustedLinear;
  env.true_mu = (Vector(4) << -0.577, 0.577, 0.577, 0.0).finished();
  env.noise_sd = 0.01;
  env.seed = 42;
  return env;
}

Vector true_mean_rewards(const EnvironmentSpec& env, const ContextSet& context) {
  switch (env.mean_reward) {
    case MeanReward::kLinear:
      return context.arms() * env.true_mu;
    case MeanReward::kMaxAdjustedLinear: {
      Vector means = context.arms() * env.true_mu;
      return means.array() - means.maxCoeff();
    }
    case MeanReward::kConstant:
      return Vector::Constant(context.num_arms(), env.constant_value);
  }
  throw std::invalid_argument("unknown mean reward");
}

ContextSet sample_context(const EnvironmentSpec& env, Rng& rng) {
  if (env.context_law == ContextLaw::kTable) {
    const auto n = static_cast<double>(env.context_table.size());
    const auto k = std::min(static_cast<std::size_t>(uniform01(rng) * n),
                            env.context_table.size() - 1);
    return ContextSet(env.context_table[k]);
  }
  Matrix arms(env.num_arms, env.dim);
  for (Eigen::Index i = 0; i < env.num_arms; ++i) {
    for (Eigen::Index j = 0; j < env.dim; ++j) arms(i, j) = standard_normal(rng);
  }
  rescale_rows(arms);
  return ContextSet(std::move(arms));
}

RoundSample sample_round(const EnvironmentSpec& env, Rng& rng) {
  ContextSet context = sample_context(env, rng);
  Vector means = true_mean_rewards(env, context);
  Vector rewards(env.num_arms);
  int clipped = 0;
  for (Eigen::Index i = 0; i < env.num_arms; ++i) {
    const double raw = means(i) + env.noise_sd * standard_normal(rng);
    rewards(i) = std::clamp(raw, -1.0, 1.0);
    if (rewards(i) != raw) ++clipped;
  }
  return {std::move(context), std::move(means), std::move(rewards), clipped};
}

// ---------------------------------------------------------------------------
// Oracles

namespace {

struct MonteCarloDraws {
  Matrix stacked_arms;  // (mc * N) x d
  Vector means;         // mc * N
};

MonteCarloDraws draw_monte_carlo(const EnvironmentSpec& env, int mc_samples,
                                 std::uint64_t mc_seed) {
  if (mc_samples < 1) throw std::invalid_argument("mc_samples must be >= 1");
  env.validate();
  Rng rng(mix64(mc_seed));
  const Eigen::Index n = env.num_arms;
  MonteCarloDraws draws{Matrix(mc_samples * n, env.dim), Vector(mc_samples * n)};
  for (int s = 0; s < mc_samples; ++s) {
    const ContextSet context = sample_context(env, rng);
    draws.stacked_arms.middleRows(s * n, n) = context.arms();
    draws.means.segment(s * n, n) = true_mean_rewards(env, context);
  }
  return draws;
}

}  // namespace

ActorParams oracle_theta_star(const EnvironmentSpec& env, double lambda, int mc_samples,
                              const OptimizerConfig& opt, std::uint64_t mc_seed) {
  MonteCarloDraws draws = draw_monte_carlo(env, mc_samples, mc_seed);
  const PenalizedPolicyValue objective(std::move(draws.stacked_arms), std::move(draws.means),
                                       env.num_arms, lambda);
  return ActorParams{maximize(std::cref(objective), env.dim, opt).point};
}

ActorParams cached_oracle_theta_star(const EnvironmentSpec& env, double lambda, int mc_samples,
                                     const OptimizerConfig& opt, std::uint64_t mc_seed,
                                     const std::filesystem::path& cache_dir) {
  std::ostringstream key;
  key << env.canonical() << ";lambda=" << format_double(lambda) << ";mc=" << mc_samples
      << ";mcseed=" << mc_seed << ";grid=" << format_double(opt.grid_radius) << ','
      << opt.grid_points_per_axis << ";nm=" << opt.nm_max_iters << ','
      << format_double(opt.nm_xatol) << ',' << format_double(opt.nm_fatol) << ','
      << format_double(opt.nm_initial_step) << ',' << opt.num_seeds;
  char name[64];
  std::snprintf(name, sizeof name, "theta_star_%016llx.txt",
                static_cast<unsigned long long>(fnv1a64(key.str())));
  const std::filesystem::path path = cache_dir / name;

  if (std::ifstream in(path); in) {
    Vector theta(env.dim);
    bool ok = true;
    for (Eigen::Index j = 0; j < env.dim && ok; ++j) ok = static_cast<bool>(in >> theta(j));
    if (ok && theta.allFinite()) return ActorParams{theta};
  }

  ActorParams theta = oracle_theta_star(env, lambda, mc_samples, opt, mc_seed);
  std::filesystem::create_directories(cache_dir);
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    for (Eigen::Index j = 0; j < theta.theta.size(); ++j) {
      out << format_double(theta.theta(j)) << '\n';
    }
  }
  std::filesystem::rename(tmp, path);
  return theta;
}

MuStarOracle oracle_mu_star(const EnvironmentSpec& env, const ActorParams& theta_star,
                            int mc_samples, std::uint64_t mc_seed) {
  if (theta_star.theta.size() != env.dim) {
    throw std::invalid_argument("theta_star has the wrong dimension");
  }
  const MonteCarloDraws draws = draw_monte_carlo(env, mc_samples, mc_seed);
  const Eigen::Index n = env.num_arms;
  Matrix gram = Matrix::Zero(env.dim, env.dim);
  Vector moment = Vector::Zero(env.dim);
  for (int s = 0; s < mc_samples; ++s) {
    const ContextSet context(draws.stacked_arms.middleRows(s * n, n));
    const Vector probs = softmax_policy(context, theta_star);
    const Vector mean_context = context.arms().transpose() * probs;
    const Matrix centered = context.arms().rowwise() - mean_context.transpose();
    gram.noalias() += centered.transpose() * probs.asDiagonal() * centered;
    moment.noalias() +=
        centered.transpose() * probs.cwiseProduct(draws.means.segment(s * n, n));
  }
  gram /= static_cast<double>(mc_samples);
  moment /= static_cast<double>(mc_samples);
  MuStarOracle out;
  out.mu.mu = gram.ldlt().solve(moment);
  out.phi_squared =
      Eigen::SelfAdjointEigenSolver<Matrix>(gram, Eigen::EigenvaluesOnly).eigenvalues()(0);
  return out;
}

// ---------------------------------------------------------------------------
// Episodes

Episode run_episode(Agent& agent, const EnvironmentSpec& env, int horizon,
                    std::uint64_t episode_seed, const std::optional<ActorParams>& theta_star) {
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  env.validate();
  Rng env_rng(derive_seed(episode_seed, 1));
  Rng action_rng(derive_seed(episode_seed, 2));

  Episode episode;
  const auto reserve = static_cast<std::size_t>(horizon);
  episode.theta_trace.reserve(reserve);
  episode.mu_trace.reserve(reserve);
  episode.cumulative_reward.reserve(reserve);
  double total_reward = 0.0;
  double total_regret = 0.0;
  for (int t = 0; t < horizon; ++t) {
    RoundSample round = sample_round(env, env_rng);
    episode.clipped_rewards += round.clipped;
    if (theta_star) {
      const Vector gap = softmax_policy(round.context, *theta_star) -
                         agent.probabilities(round.context);
      const double term = round.true_means.dot(gap);
      total_regret += term;
      episode.regret.terms.push_back(term);
      episode.regret.cumulative.push_back(total_regret);
    }
    const ActDecision decision = agent.act(round.context, uniform01(action_rng));
    const double reward = round.rewards(decision.arm);
    agent.update(InteractionRecord{std::move(round.context), decision.arm, reward,
                                   decision.propensity});
    total_reward += reward;
    episode.cumulative_reward.push_back(total_reward);
    episode.theta_trace.push_back(agent.actor().theta);
    episode.mu_trace.push_back(agent.critic());
  }
  episode.log = agent.log();
  return episode;
}

// ---------------------------------------------------------------------------
// Experiments

void ExperimentConfig::validate() const {
  env.validate();
  hyper.validate();
  opt.validate();
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  if (repetitions < 1) throw std::invalid_argument("repetitions must be >= 1");
  if (agents.empty()) throw std::invalid_argument("no agents configured");
  if (parallelism < 0) throw std::invalid_argument("parallelism must be >= 0");
  for (AgentKind kind : agents) {
    if (kind == AgentKind::kFixed) {
      throw std::invalid_argument("the fixed policy has no test to run");
    }
  }
}

std::uint64_t repetition_seed(std::uint64_t base_seed, int rep) {
  return derive_seed(base_seed, static_cast<std::uint64_t>(rep));
}

std::vector<std::string> test_labels(AgentKind kind, Eigen::Index num_arms, Eigen::Index dim) {
  std::vector<std::string> labels;
  if (kind == AgentKind::kEpsilonGreedy) {
    for (Eigen::Index i = 0; i < num_arms; ++i) {
      for (Eigen::Index j = 0; j < dim; ++j) {
        labels.push_back("mu^" + std::to_string(i + 1) + "_" + std::to_string(i * dim + j + 1));
      }
    }
  } else {
    for (Eigen::Index j = 0; j < dim; ++j) labels.push_back("theta_" + std::to_string(j + 1));
  }
  return labels;
}

TestReport episode_test(const Agent& agent, double lambda, double alpha) {
  const InteractionLog& log = agent.log();
  switch (agent.kind()) {
    case AgentKind::kProposed: {
      const auto& proposed = dynamic_cast<const ActorImproperCriticAgent&>(agent);
      return z_test(proposed.actor(),
                    sandwich(log, proposed.critic_params(), proposed.actor(), lambda), alpha);
    }
    case AgentKind::kActorCritic:
      return z_test(agent.actor(),
                    linear_ac_sandwich(log, CriticParams{agent.critic()}, agent.actor(), lambda),
                    alpha);
    case AgentKind::kEpsilonGreedy: {
      const auto& greedy = dynamic_cast<const EpsilonGreedyAgent&>(agent);
      const Eigen::Index n = log.num_arms();
      const Eigen::Index d = log.dim();
      const std::vector<std::string> labels = test_labels(AgentKind::kEpsilonGreedy, n, d);
      TestReport report;
      report.alpha = alpha;
      report.t = static_cast<int>(log.size());
      for (Eigen::Index i = 0; i < n; ++i) {
        const Vector& coef = greedy.arm_coefficients()[static_cast<std::size_t>(i)];
        const std::vector<std::string> block(labels.begin() + i * d,
                                             labels.begin() + (i + 1) * d);
        try {
          const SandwichCovariance cov = epsilon_greedy_sandwich(log, static_cast<int>(i), coef);
          const TestReport part = z_test_block(coef.segment(i * d, d), cov, i * d, alpha, block);
          report.entries.insert(report.entries.end(), part.entries.begin(), part.entries.end());
        } catch (const InferenceUnavailable&) {
          for (Eigen::Index j = 0; j < d; ++j) {
            TestEntry entry;
            entry.label = block[static_cast<std::size_t>(j)];
            entry.estimate = coef(i * d + j);
            entry.std_error = entry.z_stat = entry.p_value =
                std::numeric_limits<double>::quiet_NaN();
            entry.defined = false;
            report.entries.push_back(std::move(entry));
          }
        }
      }
      return report;
    }
    case AgentKind::kFixed:
      break;
  }
  throw std::invalid_argument("no test defined for agent '" + to_string(agent.kind()) + "'");
}

std::pair<double, double> rate_interval(double rate, double alpha, int n) {
  if (n < 1) throw std::invalid_argument("rate_interval needs n >= 1");
  const double half = 1.96 * std::sqrt(alpha * (1.0 - alpha) / static_cast<double>(n));
  return {rate - half, rate + half};
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile of an empty sample");
  if (!(q >= 0.0) || q > 1.0) throw std::invalid_argument("quantile level must be in [0, 1]");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

namespace {

struct RepOutcome {
  std::vector<bool> rejected;
  bool unavailable = false;
  int clipped = 0;
  std::vector<double> cumulative_reward;
  Vector final_theta;
};

RepOutcome run_repetition(const ExperimentConfig& config, AgentKind kind, int rep) {
  const EnvironmentSpec& env = config.env;
  auto agent = make_agent(kind, env.dim, env.num_arms, config.hyper, config.opt);
  Episode episode = run_episode(*agent, env, config.horizon, repetition_seed(config.base_seed, rep));

  RepOutcome out;
  out.clipped = episode.clipped_rewards;
  out.cumulative_reward = std::move(episode.cumulative_reward);
  out.final_theta = agent->actor().theta;
  const std::size_t width = test_labels(kind, env.num_arms, env.dim).size();
  out.rejected.assign(width, false);
  try {
    const TestReport report = episode_test(*agent, config.hyper.lambda, config.hyper.alpha);
    for (std::size_t k = 0; k < width; ++k) {
      out.rejected[k] = report.entries[k].reject;
      if (!report.entries[k].defined) out.unavailable = true;
    }
  } catch (const InferenceUnavailable&) {
    out.unavailable = true;
  }
  return out;
}

}  // namespace

ExperimentResult rejection_rate_experiment(const ExperimentConfig& config) {
  config.validate();
  const int reps = config.repetitions;
  const std::size_t num_agents = config.agents.size();
  std::vector<RepOutcome> outcomes(num_agents * static_cast<std::size_t>(reps));

  detail::parallel_for(static_cast<int>(outcomes.size()), config.parallelism, [&](int job) {
    const auto a = static_cast<std::size_t>(job) / static_cast<std::size_t>(reps);
    const int rep = job % reps;
    outcomes[static_cast<std::size_t>(job)] = run_repetition(config, config.agents[a], rep);
  });

  ExperimentResult result;
  result.repetitions = reps;
  result.alpha = config.hyper.alpha;
  for (std::size_t a = 0; a < num_agents; ++a) {
    const AgentKind kind = config.agents[a];
    AgentSummary summary;
    summary.agent = kind;
    const std::vector<std::string> labels =
        test_labels(kind, config.env.num_arms, config.env.dim);
    for (const auto& label : labels) summary.rates.push_back({label});

    std::vector<std::vector<double>> by_round(static_cast<std::size_t>(config.horizon));
    for (int rep = 0; rep < reps; ++rep) {
      const RepOutcome& out = outcomes[a * static_cast<std::size_t>(reps) +
                                       static_cast<std::size_t>(rep)];
      for (std::size_t k = 0; k < labels.size(); ++k) {
        if (out.rejected[k]) ++summary.rates[k].rejections;
      }
      if (out.unavailable) ++summary.inference_unavailable;
      summary.clipped_rewards += out.clipped;
      for (std::size_t t = 0; t < by_round.size(); ++t) {
        by_round[t].push_back(out.cumulative_reward[t]);
      }
      summary.final_theta.push_back(out.final_theta);
    }
    for (auto& rate : summary.rates) {
      rate.rate = static_cast<double>(rate.rejections) / static_cast<double>(reps);
      std::tie(rate.ci_low, rate.ci_high) = rate_interval(rate.rate, config.hyper.alpha, reps);
    }
    for (std::size_t t = 0; t < by_round.size(); ++t) {
      summary.cumulative_reward.push_back({static_cast<int>(t + 1), quantile(by_round[t], 0.5),
                                           quantile(by_round[t], 0.25),
                                           quantile(by_round[t], 0.75)});
    }
    result.agents.push_back(std::move(summary));
  }
  return result;
}

}  // namespace robandit
