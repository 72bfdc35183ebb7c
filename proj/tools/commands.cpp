#include "commands.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "config.hpp"
#include "output.hpp"
#include "robandit/agents.hpp"
#include "robandit/errors.hpp"
#include "robandit/inference.hpp"
#include "robandit/offline_eval.hpp"
#include "robandit/seeding.hpp"
#include "robandit/sim_env.hpp"

#ifndef ROBANDIT_VERSION
#define ROBANDIT_VERSION "unknown"
#endif

namespace robandit::cli {

namespace fs = std::filesystem;

namespace {

// Thrown for errors that map to a specific exit code.
struct CommandError : std::runtime_error {
  CommandError(int code, const std::string& kind, const std::string& message)
      : std::runtime_error(message), exit_code(code), kind(kind) {}
  int exit_code;
  std::string kind;
};

std::string insufficient_message(const std::string& detail) {
  const std::string prefix = "insufficient data for inference";
  return detail.rfind(prefix, 0) == 0 ? detail : prefix + ": " + detail;
}

int report_error(int code, const std::string& kind, const std::string& message) {
  nlohmann::json error{{"error", kind}, {"message", message}, {"exit_code", code}};
  std::cerr << error.dump() << std::endl;
  return code;
}

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CommandError(kExitRuntimeFailure, "io_error", "cannot write '" + path.string() + "'");
  return out;
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<double> parse_list(const std::string& text, const char* what) {
  std::vector<double> values;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    char* end = nullptr;
    const double v = std::strtod(item.c_str(), &end);
    if (item.empty() || *end != '\0') {
      throw ConfigError(std::string(what) + ": '" + item + "' is not a number");
    }
    values.push_back(v);
  }
  if (values.empty()) throw ConfigError(std::string(what) + " is empty");
  return values;
}

Vector to_vector(const std::vector<double>& values) {
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

// Scalar flag overrides shared by the config-driven commands.
struct Overrides {
  std::string config_path;
  std::optional<std::string> output_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> repetitions;
  std::optional<int> horizon;
  std::optional<int> parallelism;
};

RunSettings load_settings(const Overrides& o) {
  RunSettings s = build_settings(load_config(o.config_path));
  apply_seed_environment(s);
  if (o.seed) {
    s.experiment.base_seed = *o.seed;
    s.experiment.env.seed = *o.seed;
  }
  if (o.repetitions) s.experiment.repetitions = *o.repetitions;
  if (o.horizon) s.experiment.horizon = *o.horizon;
  if (o.parallelism) s.experiment.parallelism = *o.parallelism;
  if (o.output_dir) s.output_dir = *o.output_dir;
  try {
    s.experiment.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid configuration: ") + e.what());
  }
  return s;
}

void add_overrides(CLI::App* cmd, Overrides& o, bool experiment_flags) {
  cmd->add_option("config", o.config_path, "Run configuration file")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("-o,--output-dir", o.output_dir, "Output directory (overrides [output] dir)");
  cmd->add_option("--seed", o.seed, "Base seed (overrides [run] seed and ROBANDIT_SEED)");
  cmd->add_option("--horizon", o.horizon, "Rounds per episode");
  if (experiment_flags) {
    cmd->add_option("--repetitions", o.repetitions, "Monte Carlo repetitions");
    cmd->add_option("--parallelism", o.parallelism, "Worker threads (0 = all cores)");
  }
}

nlohmann::json vector_json(const Vector& v) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index j = 0; j < v.size(); ++j) out.push_back(v(j));
  return out;
}

// ---------------------------------------------------------------------------

int cmd_simulate(const Overrides& o, const std::optional<std::string>& agent_name, bool regret) {
  const RunSettings s = load_settings(o);
  const ExperimentConfig& x = s.experiment;
  const std::string hash = config_hash(s);
  std::vector<AgentKind> kinds = x.agents;
  if (agent_name) kinds = {agent_kind_from_string(*agent_name)};

  std::optional<ActorParams> theta_star;
  if (regret) {
    theta_star = cached_oracle_theta_star(x.env, x.hyper.lambda, s.oracle.mc_samples, x.opt,
                                          s.oracle.mc_seed, s.oracle.cache_dir);
  }
  const fs::path dir = s.output_dir;
  for (AgentKind kind : kinds) {
    auto agent = make_agent(kind, x.env.dim, x.env.num_arms, x.hyper, x.opt);
    const Episode episode =
        run_episode(*agent, x.env, x.horizon, repetition_seed(x.base_seed, 0), theta_star);
    AgentLog run{kind, hash, episode.log, episode.theta_trace, episode.mu_trace};
    const std::string name = to_string(kind);
    {
      std::ofstream out = open_output(dir / (name + "_log.csv"));
      write_agent_log_csv(out, run);
    }
    if (theta_star) {
      std::ofstream out = open_output(dir / (name + "_regret.csv"));
      out << "# config_hash: " << hash << "\nt,regret_term,cumulative_regret\n";
      for (std::size_t t = 0; t < episode.regret.terms.size(); ++t) {
        out << t + 1 << ',' << format_number(episode.regret.terms[t]) << ','
            << format_number(episode.regret.cumulative[t]) << '\n';
      }
    }
    std::cout << name << ": T = " << x.horizon
              << ", cumulative reward = " << format_number(episode.cumulative_reward.back());
    if (theta_star) std::cout << ", regret = " << format_number(episode.regret.cumulative.back());
    std::cout << ", log = " << (dir / (name + "_log.csv")).string() << '\n';
  }
  return kExitOk;
}

int cmd_experiment(const Overrides& o) {
  const RunSettings s = load_settings(o);
  const ExperimentConfig& x = s.experiment;
  const std::string hash = config_hash(s);
  const std::string started = utc_timestamp();
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentResult result = rejection_rate_experiment(x);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const fs::path dir = s.output_dir;
  {
    std::ofstream out = open_output(dir / "rejection_rates.csv");
    write_rejection_rates_csv(out, result, hash);
  }
  {
    std::ofstream out = open_output(dir / "rejection_rates.json");
    out << rejection_rates_json(result, hash).dump(2) << '\n';
  }
  {
    std::ofstream out = open_output(dir / "cumulative_rewards.csv");
    write_cumulative_rewards_csv(out, result, hash);
  }
  const std::string table = rejection_table(result);
  {
    std::ofstream out = open_output(dir / "rejection_table.txt");
    out << "# config_hash: " << hash << '\n' << table;
  }

  nlohmann::json seeds = nlohmann::json::array();
  for (int rep = 0; rep < x.repetitions; ++rep) seeds.push_back(repetition_seed(x.base_seed, rep));
  nlohmann::json diagnostics = nlohmann::json::object();
  for (const auto& agent : result.agents) {
    diagnostics[to_string(agent.agent)] = {{"inference_unavailable", agent.inference_unavailable},
                                           {"clipped_rewards", agent.clipped_rewards}};
  }
  nlohmann::json meta{
      {"config_hash", hash},
      {"config", settings_to_json(s)},
      {"library_version", ROBANDIT_VERSION},
      {"base_seed", x.base_seed},
      {"repetition_seeds", seeds},
      {"seed_derivation", "splitmix64(base_seed ^ splitmix64(repetition)); environment stream "
                          "derive(rep_seed, 1), action stream derive(rep_seed, 2)"},
      {"optimizer_budget",
       {{"grid_points", std::pow(x.opt.grid_points_per_axis, static_cast<double>(x.env.dim))},
        {"nelder_mead_seeds", x.opt.num_seeds},
        {"nelder_mead_max_iters", x.opt.nm_max_iters},
        {"actor_update", "every round, warm-started at the previous estimate"}}},
      {"diagnostics", diagnostics},
      {"started_utc", started},
      {"wall_time_seconds", wall},
  };
  {
    std::ofstream out = open_output(dir / "metadata.json");
    out << meta.dump(2) << '\n';
  }
  std::cout << table;
  return kExitOk;
}

int cmd_test(const std::string& log_path, const std::optional<std::string>& config_path,
             std::optional<double> lambda, std::optional<double> alpha,
             const std::vector<std::string>& contrasts, const std::string& output_dir) {
  HyperParams hyper;
  OptimizerConfig opt;
  if (config_path) {
    const RunSettings s = build_settings(load_config(*config_path));
    hyper = s.experiment.hyper;
    opt = s.experiment.opt;
  }
  if (lambda) hyper.lambda = *lambda;
  if (alpha) hyper.alpha = *alpha;
  try {
    hyper.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }

  std::ifstream in(log_path);
  if (!in) throw ConfigError("cannot open agent log '" + log_path + "'");
  const AgentLog run = read_agent_log_csv(in);
  const Eigen::Index d = run.log.dim();

  std::vector<std::pair<int, int>> pairs;
  for (const auto& text : contrasts) {
    const std::vector<double> jk = parse_list(text, "--contrast");
    if (jk.size() != 2 || jk[0] != std::floor(jk[0]) || jk[1] != std::floor(jk[1]) ||
        jk[0] < 1 || jk[1] < 1 || jk[0] > static_cast<double>(d) ||
        jk[1] > static_cast<double>(d)) {
      throw ConfigError("--contrast expects 'j,k' with 1 <= j, k <= " + std::to_string(d));
    }
    pairs.emplace_back(static_cast<int>(jk[0]) - 1, static_cast<int>(jk[1]) - 1);
  }
  if (!pairs.empty() && run.agent == AgentKind::kEpsilonGreedy) {
    throw ConfigError("--contrast applies to actor parameters; the log is from epsilon-greedy");
  }
  if (run.agent == AgentKind::kFixed) throw ConfigError("a fixed-policy log has no estimates to test");

  // Recompute the estimates by replaying the logged records through a fresh agent.
  auto agent = make_agent(run.agent, d, run.log.num_arms(), hyper, opt);
  for (const auto& record : run.log) agent->update(record);

  TestReport report;
  try {
    if (pairs.empty()) {
      report = episode_test(*agent, hyper.lambda, hyper.alpha);
    } else {
      const SandwichCovariance cov =
          run.agent == AgentKind::kProposed
              ? sandwich(agent->log(),
                         dynamic_cast<const ActorImproperCriticAgent&>(*agent).critic_params(),
                         agent->actor(), hyper.lambda)
              : linear_ac_sandwich(agent->log(), CriticParams{agent->critic()}, agent->actor(),
                                   hyper.lambda);
      report = contrast_test(agent->actor(), cov, pairs, hyper.alpha);
    }
  } catch (const InferenceUnavailable& e) {
    throw CommandError(kExitInsufficientData, "insufficient_data",
                       insufficient_message(e.what()));
  }

  nlohmann::json doc = test_report_json(report);
  doc["agent"] = to_string(run.agent);
  doc["config_hash"] = run.config_hash;
  doc["lambda"] = hyper.lambda;
  {
    std::ofstream out = open_output(fs::path(output_dir) / "test_report.json");
    out << doc.dump(2) << '\n';
  }
  std::cout << test_report_table(report);
  for (const auto& e : report.entries) {
    if (!e.defined) {
      throw CommandError(kExitInsufficientData, "insufficient_data",
                         "insufficient data for inference: covariance of " + e.label +
                             " is undefined");
    }
  }
  return kExitOk;
}

struct ReplayOptions {
  std::string data_path;
  std::string agent;
  std::optional<std::string> config_path;
  std::optional<std::string> theta;
  std::optional<double> lambda;
  std::optional<double> epsilon;
  bool fit_propensity = false;
  int bootstrap = 30;
  int target = 1000;
  std::optional<double> ratio_bound;
  std::optional<std::uint64_t> seed;
  int parallelism = 0;
  std::string output_dir = ".";
};

int cmd_replay(const ReplayOptions& o) {
  HyperParams hyper;
  OptimizerConfig opt;
  std::uint64_t seed = 42;
  if (o.config_path) {
    RunSettings s = build_settings(load_config(*o.config_path));
    apply_seed_environment(s);
    hyper = s.experiment.hyper;
    opt = s.experiment.opt;
    seed = s.experiment.base_seed;
  } else if (const char* env = std::getenv("ROBANDIT_SEED"); env != nullptr && *env != '\0') {
    RunSettings s;
    apply_seed_environment(s);
    seed = s.experiment.base_seed;
  }
  if (o.seed) seed = *o.seed;
  if (o.lambda) hyper.lambda = *o.lambda;
  if (o.epsilon) hyper.epsilon = *o.epsilon;
  try {
    hyper.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (o.bootstrap < 2) throw ConfigError("--bootstrap needs at least 2 resamples");
  if (o.target < 1) throw ConfigError("--target must be >= 1");

  LoggedDataset data = read_logged_csv(o.data_path);
  std::optional<PropensityModel> model;
  if (o.fit_propensity) {
    if (data.has_propensities()) {
      std::cerr << "note: --fit-propensity replaces the logged propensity column\n";
    }
    model = fit_logging_propensity(data);
  } else if (!data.has_propensities()) {
    throw ConfigError("logged data has no propensity column; pass --fit-propensity to fit one");
  }

  const AgentKind kind = agent_kind_from_string(o.agent);
  const Eigen::Index dim = data.num_actions * data.feature_dim;
  std::optional<Vector> fixed_theta;
  if (kind == AgentKind::kFixed) {
    if (!o.theta) throw ConfigError("--agent fixed needs --theta");
    fixed_theta = to_vector(parse_list(*o.theta, "--theta"));
    if (fixed_theta->size() != dim) {
      throw ConfigError("--theta needs " + std::to_string(dim) + " entries");
    }
  }
  const AgentFactory factory = [&]() {
    return make_agent(kind, dim, data.num_actions, hyper, opt, fixed_theta);
  };
  const BootstrapReplay replay =
      bootstrap_replay(data, factory, o.target, o.bootstrap, seed, o.ratio_bound, o.parallelism);

  std::ifstream raw(o.data_path, std::ios::binary);
  std::ostringstream bytes;
  bytes << raw.rdbuf();
  std::ostringstream key;
  key << "data=" << fnv1a64(bytes.str()) << ";agent=" << o.agent << ";theta=" << o.theta.value_or("")
      << ";lambda=" << format_number(hyper.lambda) << ";epsilon=" << format_number(hyper.epsilon)
      << ";fit=" << o.fit_propensity << ";bootstrap=" << o.bootstrap << ";target=" << o.target
      << ";M=" << (o.ratio_bound ? format_number(*o.ratio_bound) : "default") << ";seed=" << seed;
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx",
                static_cast<unsigned long long>(fnv1a64(key.str())));

  std::vector<int> rounds;
  int partial = 0;
  nlohmann::json cumulative = nlohmann::json::array();
  for (const auto& r : replay.runs) {
    rounds.push_back(r.rounds_used);
    partial += r.partial ? 1 : 0;
    cumulative.push_back(r.cumulative_reward);
  }
  std::vector<double> rounds_d(rounds.begin(), rounds.end());
  nlohmann::json doc{
      {"config_hash", hash},
      {"agent", o.agent},
      {"mean", replay.summary.mean},
      {"sd", replay.summary.sd},
      {"n_resamples", replay.summary.n},
      {"target_rounds", o.target},
      {"partial_runs", partial},
      {"ratio_bound", o.ratio_bound ? *o.ratio_bound : 1.0 / data.min_propensity()},
      {"rounds_used",
       {{"min", quantile(rounds_d, 0.0)},
        {"median", quantile(rounds_d, 0.5)},
        {"max", quantile(rounds_d, 1.0)},
        {"values", rounds}}},
      {"cumulative_rewards", cumulative},
  };
  if (model) {
    doc["propensity_model"] = {{"coefficients", vector_json(model->coefficients)},
                               {"standard_errors", vector_json(model->standard_errors)},
                               {"iterations", model->iterations}};
  }
  const fs::path dir = o.output_dir;
  {
    std::ofstream out = open_output(dir / "replay_summary.json");
    out << doc.dump(2) << '\n';
  }
  char mean[32];
  char sd[32];
  std::snprintf(mean, sizeof mean, "%.1f", replay.summary.mean);
  std::snprintf(sd, sizeof sd, "%.1f", replay.summary.sd);
  {
    std::ofstream out = open_output(dir / "replay_summary.csv");
    out << "# config_hash: " << hash << "\nagent,mean,sd,n_resamples\n"
        << o.agent << ',' << mean << ',' << sd << ',' << replay.summary.n << '\n';
  }
  std::cout << "agent      mean      St.d.   (T = " << o.target << ", " << replay.summary.n
            << " bootstrap samples)\n";
  char line[128];
  std::snprintf(line, sizeof line, "%-8s %8s %8s\n", o.agent.c_str(), mean, sd);
  std::cout << line;
  if (partial > 0) {
    std::cout << "warning: " << partial << " resamples ran out of data before T\n";
  }
  return kExitOk;
}

int cmd_oracle(const Overrides& o) {
  const RunSettings s = load_settings(o);
  const ExperimentConfig& x = s.experiment;
  const ActorParams theta = cached_oracle_theta_star(x.env, x.hyper.lambda, s.oracle.mc_samples,
                                                     x.opt, s.oracle.mc_seed, s.oracle.cache_dir);
  const MuStarOracle mu =
      oracle_mu_star(x.env, theta, s.oracle.mc_samples, derive_seed(s.oracle.mc_seed, 1));
  nlohmann::json doc{{"config_hash", config_hash(s)},
                     {"theta_star", vector_json(theta.theta)},
                     {"mu_star", vector_json(mu.mu.mu)},
                     {"phi_squared", mu.phi_squared},
                     {"mc_samples", s.oracle.mc_samples},
                     {"lambda", x.hyper.lambda}};
  if (std::isfinite(x.hyper.norm_cap) && mu.phi_squared > 0.0) {
    doc["theta_norm_bound"] = actor_norm_bound(x.hyper.norm_cap, x.hyper.lambda, mu.phi_squared);
  }
  {
    std::ofstream out = open_output(fs::path(s.output_dir) / "oracle.json");
    out << doc.dump(2) << '\n';
  }
  std::cout << "theta* =";
  for (Eigen::Index j = 0; j < theta.theta.size(); ++j) std::cout << ' ' << format_number(theta.theta(j));
  std::cout << "\nmu*    =";
  for (Eigen::Index j = 0; j < mu.mu.mu.size(); ++j) std::cout << ' ' << format_number(mu.mu.mu(j));
  std::cout << "\nphi^2  = " << format_number(mu.phi_squared) << '\n';
  return kExitOk;
}

struct GenerateOptions {
  int records = 1000;
  int feature_dim = 4;
  std::string logging;
  std::string reward_mu;
  double noise_sd = 0.1;
  std::uint64_t seed = 1;
  bool no_propensity = false;
  std::string output;
};

int cmd_generate(const GenerateOptions& o) {
  LoggedDataSpec spec;
  spec.feature_dim = o.feature_dim;
  spec.num_records = o.records;
  spec.logging_coefficients = to_vector(parse_list(o.logging, "--logging"));
  spec.reward_mu = to_vector(parse_list(o.reward_mu, "--reward-mu"));
  spec.noise_sd = o.noise_sd;
  spec.seed = o.seed;
  spec.include_propensity = !o.no_propensity;
  LoggedDataset data;
  try {
    data = generate_logged_data(spec);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  std::ofstream out = open_output(o.output);
  write_logged_csv(out, data);
  std::cout << "wrote " << data.records.size() << " records to " << o.output << '\n';
  return kExitOk;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Robust actor-critic contextual bandits: simulation, testing and replay"};
  app.set_version_flag("--version", std::string(ROBANDIT_VERSION));
  app.require_subcommand(1);

  Overrides sim_o;
  std::optional<std::string> sim_agent;
  bool sim_regret = false;
  auto* simulate = app.add_subcommand("simulate", "Run one episode per agent and write its log");
  add_overrides(simulate, sim_o, false);
  simulate->add_option("--agent", sim_agent, "Only this agent (proposed, ac, egreedy)");
  simulate->add_flag("--regret", sim_regret, "Track regret against the Monte Carlo oracle policy");

  Overrides exp_o;
  auto* experiment = app.add_subcommand("experiment", "Repeated episodes and rejection rates");
  add_overrides(experiment, exp_o, true);

  std::string test_log;
  std::optional<std::string> test_config;
  std::optional<double> test_lambda;
  std::optional<double> test_alpha;
  std::vector<std::string> test_contrasts;
  std::string test_out = ".";
  auto* test = app.add_subcommand("test", "Z-tests on the estimates recomputed from an agent log");
  test->add_option("log", test_log, "Agent log CSV written by 'simulate'")
      ->required()
      ->check(CLI::ExistingFile);
  test->add_option("--config", test_config, "Take hyperparameters from this config")
      ->check(CLI::ExistingFile);
  test->add_option("--lambda", test_lambda, "Actor penalty");
  test->add_option("--alpha", test_alpha, "Significance level");
  test->add_option("--contrast", test_contrasts, "Test theta_j - theta_k = 0 (1-based 'j,k')")
      ->take_all();
  test->add_option("-o,--output-dir", test_out, "Directory for test_report.json");

  ReplayOptions rep;
  auto* replay = app.add_subcommand("replay", "Rejection-sampling replay on logged data");
  replay->add_option("data", rep.data_path, "Logged data CSV")->required()->check(CLI::ExistingFile);
  replay->add_option("--agent", rep.agent, "proposed, ac, egreedy or fixed")->required();
  replay->add_option("--config", rep.config_path, "Take hyperparameters from this config")
      ->check(CLI::ExistingFile);
  replay->add_option("--theta", rep.theta, "Comma-separated actor parameters for --agent fixed");
  replay->add_option("--lambda", rep.lambda, "Actor penalty");
  replay->add_option("--epsilon", rep.epsilon, "Exploration rate of epsilon-greedy");
  replay->add_flag("--fit-propensity", rep.fit_propensity,
                   "Fit a logit logging policy instead of reading the propensity column");
  replay->add_option("--bootstrap", rep.bootstrap, "Bootstrap resamples")->capture_default_str();
  replay->add_option("--target", rep.target, "Accepted rounds per replay")->capture_default_str();
  replay->add_option("--ratio-bound", rep.ratio_bound, "Rejection-sampling bound M");
  replay->add_option("--seed", rep.seed, "Seed (overrides config and ROBANDIT_SEED)");
  replay->add_option("--parallelism", rep.parallelism, "Worker threads (0 = all cores)");
  replay->add_option("-o,--output-dir", rep.output_dir, "Output directory")->capture_default_str();

  Overrides oracle_o;
  auto* oracle = app.add_subcommand("oracle", "Monte Carlo theta* and mu* for the configured environment");
  add_overrides(oracle, oracle_o, false);

  GenerateOptions gen;
  auto* generate = app.add_subcommand("generate", "Write a synthetic logged dataset");
  generate->add_option("--records", gen.records, "Number of records")->capture_default_str();
  generate->add_option("--feature-dim", gen.feature_dim, "Features d'")->capture_default_str();
  generate->add_option("--logging", gen.logging, "Logit coefficients: intercept then d' slopes")
      ->required();
  generate->add_option("--reward-mu", gen.reward_mu, "Reward coefficients, 2 d' entries")->required();
  generate->add_option("--noise-sd", gen.noise_sd, "Reward noise sd")->capture_default_str();
  generate->add_option("--seed", gen.seed, "Seed")->capture_default_str();
  generate->add_flag("--no-propensity", gen.no_propensity, "Omit the propensity column");
  generate->add_option("--output", gen.output, "Output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error(kExitConfigError, "usage_error", e.what());
  }

  try {
    if (*simulate) return cmd_simulate(sim_o, sim_agent, sim_regret);
    if (*experiment) return cmd_experiment(exp_o);
    if (*test) return cmd_test(test_log, test_config, test_lambda, test_alpha, test_contrasts, test_out);
    if (*replay) return cmd_replay(rep);
    if (*oracle) return cmd_oracle(oracle_o);
    if (*generate) return cmd_generate(gen);
  } catch (const CommandError& e) {
    return report_error(e.exit_code, e.kind, e.what());
  } catch (const ConfigError& e) {
    return report_error(kExitConfigError, "config_error", e.what());
  } catch (const InferenceUnavailable& e) {
    return report_error(kExitInsufficientData, "insufficient_data",
                        insufficient_message(e.what()));
  } catch (const std::exception& e) {
    return report_error(kExitRuntimeFailure, "runtime_failure", e.what());
  }
  return report_error(kExitConfigError, "usage_error", "no subcommand given");
}

}  // namespace robandit::cli
