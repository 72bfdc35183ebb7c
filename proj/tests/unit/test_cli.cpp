#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "commands.hpp"
#include "config.hpp"
#include "output.hpp"
#include "robandit/errors.hpp"
#include "robandit/offline_eval.hpp"

namespace robandit::cli {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("robandit_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    unsetenv("ROBANDIT_SEED");
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write(const std::string& name, const std::string& text) {
    const fs::path p = dir_ / name;
    std::ofstream(p) << text;
    return p;
  }

  int run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "robandit");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    ::testing::internal::CaptureStdout();
    ::testing::internal::CaptureStderr();
    const int code = run(static_cast<int>(argv.size()), argv.data());
    stdout_ = ::testing::internal::GetCapturedStdout();
    stderr_ = ::testing::internal::GetCapturedStderr();
    return code;
  }

  std::string small_config(int reps = 1, int horizon = 20, const std::string& env_extra = "",
                           const std::string& tail = "") {
    std::ostringstream s;
    s << "[run]\nseed = 5\nrepetitions = " << reps << "\nhorizon = " << horizon
      << "\nparallelism = 1\n[env]\nseed = 5\n" << env_extra << "[oracle]\ncache_dir = \""
      << (dir_ / "cache").string() << "\"\nmc_samples = 2000\n" << tail;
    return s.str();
  }

  fs::path dir_;
  std::string stdout_;
  std::string stderr_;
};

TEST(ConfigParse, ValuesAndComments) {
  const ConfigDocument doc = parse_config(
      "# comment\n[a]\nx = 3 # trailing\ny = -2.5e-1\nz = \"s\\\"q\"\nw = [1, 2,\n  3,]\n"
      "f = inf\nb = true\n");
  const Section& a = doc.sections.at("a");
  EXPECT_EQ(a.at("x").integer, 3);
  EXPECT_DOUBLE_EQ(a.at("y").real, -0.25);
  EXPECT_EQ(a.at("z").text, "s\"q");
  ASSERT_EQ(a.at("w").items.size(), 3u);
  EXPECT_DOUBLE_EQ(a.at("w").items[2].as_double(), 3.0);
  EXPECT_TRUE(std::isinf(a.at("f").real));
  EXPECT_TRUE(a.at("b").boolean);
}

TEST(ConfigParse, ErrorsCarryLineNumbers) {
  try {
    parse_config("[run]\nseed = 1\nhorizon = = 3\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_config("[run\n"), ConfigError);
  EXPECT_THROW(parse_config("[run]\nx = [1, 2\n"), ConfigError);
}

TEST(ConfigSettings, DefaultsAndSchema) {
  const RunSettings s = build_settings(parse_config(""));
  EXPECT_EQ(s.experiment.horizon, 50);
  EXPECT_EQ(s.experiment.repetitions, 100);
  EXPECT_DOUBLE_EQ(s.experiment.hyper.lambda, 0.001);
  EXPECT_DOUBLE_EQ(s.experiment.hyper.epsilon, 0.01);
  EXPECT_EQ(s.experiment.env.true_mu.size(), 4);
  EXPECT_THROW(build_settings(parse_config("[run]\nhorizn = 3\n")), ConfigError);
  EXPECT_THROW(build_settings(parse_config("[gpu]\nx = 1\n")), ConfigError);
  EXPECT_THROW(build_settings(parse_config("[run]\nhorizon = \"long\"\n")), ConfigError);
  EXPECT_THROW(build_settings(parse_config("[hyper]\nlambda = -1\n")), ConfigError);
  EXPECT_THROW(build_settings(parse_config("[run]\nagents = [\"ucb\"]\n")), ConfigError);
}

TEST(ConfigSettings, HashIgnoresParallelismAndOutput) {
  const RunSettings a = build_settings(parse_config("[run]\nparallelism = 1\n"));
  const RunSettings b = build_settings(parse_config("[run]\nparallelism = 4\n[output]\ndir = \"x\"\n"));
  const RunSettings c = build_settings(parse_config("[run]\nseed = 43\n"));
  EXPECT_EQ(config_hash(a), config_hash(b));
  EXPECT_NE(config_hash(a), config_hash(c));
  EXPECT_EQ(config_hash(a).size(), 16u);
}

TEST(ConfigSettings, SeedEnvironmentOverride) {
  RunSettings s = build_settings(parse_config(""));
  setenv("ROBANDIT_SEED", "123", 1);
  apply_seed_environment(s);
  EXPECT_EQ(s.experiment.base_seed, 123u);
  setenv("ROBANDIT_SEED", "abc", 1);
  EXPECT_THROW(apply_seed_environment(s), ConfigError);
  unsetenv("ROBANDIT_SEED");
}

TEST(ConfigSettings, BundledConfigsLoad) {
  for (const char* name : {"table1.toml", "null_calibration.toml", "consistency.toml"}) {
    const fs::path p = fs::path(ROBANDIT_SOURCE_DIR) / "configs" / name;
    EXPECT_NO_THROW(build_settings(load_config(p))) << name;
  }
  const RunSettings t1 = build_settings(load_config(fs::path(ROBANDIT_SOURCE_DIR) / "configs/table1.toml"));
  EXPECT_EQ(t1.experiment.horizon, 50);
  EXPECT_EQ(t1.experiment.repetitions, 100);
  EXPECT_DOUBLE_EQ(t1.experiment.env.noise_sd, 0.01);
  EXPECT_EQ(t1.experiment.agents.size(), 3u);
}

TEST_F(CliTest, ExperimentWritesDeterministicFiles) {
  const fs::path cfg = write("c.toml", small_config(2, 15));
  ASSERT_EQ(run_cli({"experiment", cfg.string(), "-o", (dir_ / "a").string()}), 0) << stderr_;
  ASSERT_EQ(run_cli({"experiment", cfg.string(), "-o", (dir_ / "b").string(), "--parallelism", "2"}), 0);
  for (const char* f : {"rejection_rates.csv", "cumulative_rewards.csv", "rejection_rates.json",
                        "rejection_table.txt"}) {
    const std::string a = slurp(dir_ / "a" / f);
    EXPECT_FALSE(a.empty()) << f;
    EXPECT_EQ(a, slurp(dir_ / "b" / f)) << f;
  }
  const auto meta = nlohmann::json::parse(slurp(dir_ / "a" / "metadata.json"));
  EXPECT_EQ(meta["config"]["run"]["repetitions"], 2);
  EXPECT_EQ(meta["repetition_seeds"].size(), 2u);
  EXPECT_TRUE(meta.contains("wall_time_seconds"));
  const std::string hash = meta["config_hash"];
  EXPECT_EQ(slurp(dir_ / "a" / "rejection_rates.csv").rfind("# config_hash: " + hash, 0), 0u);
  EXPECT_EQ(slurp(dir_ / "a" / "cumulative_rewards.csv").rfind("# config_hash: " + hash, 0), 0u);
}

TEST_F(CliTest, SingleRepetitionRatesAreBinary) {
  const fs::path cfg = write("c.toml", small_config(1, 15));
  ASSERT_EQ(run_cli({"experiment", cfg.string(), "-o", dir_.string()}), 0);
  std::istringstream csv(slurp(dir_ / "rejection_rates.csv"));
  std::string line;
  std::getline(csv, line);
  std::getline(csv, line);
  int rows = 0;
  while (std::getline(csv, line)) {
    std::stringstream fields(line);
    std::string agent, label, rate;
    std::getline(fields, agent, ',');
    std::getline(fields, label, ',');
    std::getline(fields, rate, ',');
    EXPECT_TRUE(rate == "0" || rate == "1") << line;
    ++rows;
  }
  EXPECT_EQ(rows, 8 + 4 + 4);
}

TEST_F(CliTest, SimulateThenTest) {
  const fs::path cfg = write("c.toml", small_config(1, 40));
  ASSERT_EQ(run_cli({"simulate", cfg.string(), "--agent", "proposed", "-o", dir_.string()}), 0);
  const fs::path log = dir_ / "proposed_log.csv";
  ASSERT_TRUE(fs::exists(log));
  ASSERT_EQ(run_cli({"test", log.string(), "-o", dir_.string()}), 0) << stderr_;
  const auto report = nlohmann::json::parse(slurp(dir_ / "test_report.json"));
  EXPECT_EQ(report["tests"].size(), 4u);
  EXPECT_EQ(report["t"], 40);

  // The recomputed estimates equal the final estimates the agent logged.
  std::ifstream in(log);
  const AgentLog run = read_agent_log_csv(in);
  for (int j = 0; j < 4; ++j) {
    EXPECT_NEAR(report["tests"][j]["estimate"].get<double>(), run.theta.back()(j), 1e-12);
  }

  ASSERT_EQ(run_cli({"test", log.string(), "--alpha", "1.0", "-o", dir_.string()}), 0);
  const auto all = nlohmann::json::parse(slurp(dir_ / "test_report.json"));
  for (const auto& e : all["tests"]) EXPECT_TRUE(e["reject"].get<bool>());
}

TEST_F(CliTest, ContrastOnStackedEightDimensions) {
  const fs::path cfg = write(
      "c.toml",
      small_config(1, 30, "dim = 8\nmean_reward = \"constant\"\n",
                   "[optimizer]\ngrid_points_per_axis = 2\n"));
  ASSERT_EQ(run_cli({"simulate", cfg.string(), "--agent", "proposed", "-o", dir_.string()}), 0)
      << stderr_;
  const int code = run_cli({"test", (dir_ / "proposed_log.csv").string(), "--contrast", "1,5",
                            "-o", dir_.string()});
  ASSERT_TRUE(code == 0 || code == 3) << stderr_;
  if (code == 0) {
    const auto report = nlohmann::json::parse(slurp(dir_ / "test_report.json"));
    EXPECT_EQ(report["tests"][0]["parameter"], "theta_1-theta_5");
  }
  EXPECT_EQ(run_cli({"test", (dir_ / "proposed_log.csv").string(), "--contrast", "1,9"}), 1);
}

TEST_F(CliTest, ShortLogIsInsufficientData) {
  const fs::path cfg = write("c.toml", small_config(1, 3));
  ASSERT_EQ(run_cli({"simulate", cfg.string(), "--agent", "proposed", "-o", dir_.string()}), 0);
  EXPECT_EQ(run_cli({"test", (dir_ / "proposed_log.csv").string(), "-o", dir_.string()}), 3);
  EXPECT_NE(stderr_.find("insufficient data for inference"), std::string::npos);
  const auto err = nlohmann::json::parse(stderr_);
  EXPECT_EQ(err["exit_code"], 3);
}

TEST_F(CliTest, ConfigErrorsExitOne) {
  EXPECT_EQ(run_cli({"experiment", (dir_ / "missing.toml").string()}), 1);
  const fs::path bad = write("bad.toml", "[run]\nhorizon = 0\n");
  EXPECT_EQ(run_cli({"experiment", bad.string()}), 1);
  const auto err = nlohmann::json::parse(stderr_);
  EXPECT_EQ(err["exit_code"], 1);
  EXPECT_EQ(run_cli({"frobnicate"}), 1);
}

TEST_F(CliTest, ReplayNeedsPropensityColumn) {
  const fs::path data = dir_ / "d.csv";
  ASSERT_EQ(run_cli({"generate", "--records", "300", "--logging", "0,0.5,0,0,0", "--reward-mu",
                     "0.3,0,0,0,-0.3,0,0,0", "--no-propensity", "--output", data.string()}),
            0);
  EXPECT_EQ(run_cli({"replay", data.string(), "--agent", "fixed", "--theta", "0,0,0,0,0,0,0,0",
                     "--target", "20", "-o", dir_.string()}),
            1);
  EXPECT_EQ(run_cli({"replay", data.string(), "--agent", "fixed", "--theta", "0,0,0,0,0,0,0,0",
                     "--target", "20", "--bootstrap", "3", "--fit-propensity", "-o", dir_.string()}),
            0)
      << stderr_;
  const auto summary = nlohmann::json::parse(slurp(dir_ / "replay_summary.json"));
  EXPECT_EQ(summary["n_resamples"], 3);
  EXPECT_TRUE(summary.contains("propensity_model"));
}

TEST_F(CliTest, GenerateReplayMatchesDirectSimulation) {
  const std::string logging = "0.2,0.6,-0.4,0.3,0.0";
  const std::string reward_mu = "0.5,-0.3,0.2,0.4,-0.4,0.3,0.6,-0.2";
  const Eigen::VectorXd theta = (Eigen::VectorXd(8) << 1.0, -0.5, 0.0, 0.5, -1.0, 0.5, 1.0, 0.0).finished();
  const int target = 500;
  const fs::path data = dir_ / "d.csv";
  ASSERT_EQ(run_cli({"generate", "--records", "3000", "--logging", logging, "--reward-mu", reward_mu,
                     "--seed", "11", "--output", data.string()}),
            0);
  ASSERT_EQ(run_cli({"replay", data.string(), "--agent", "fixed", "--theta", "1,-0.5,0,0.5,-1,0.5,1,0",
                     "--target", std::to_string(target), "--bootstrap", "30", "--seed", "3", "-o",
                     dir_.string()}),
            0)
      << stderr_;
  const auto summary = nlohmann::json::parse(slurp(dir_ / "replay_summary.json"));
  EXPECT_EQ(summary["partial_runs"], 0);

  // Direct simulation: expected reward of the fixed policy on fresh contexts from
  // the same generator, times the target length.
  LoggedDataSpec spec;
  spec.feature_dim = 4;
  spec.num_records = 200000;
  spec.logging_coefficients = (Eigen::VectorXd(5) << 0.2, 0.6, -0.4, 0.3, 0.0).finished();
  spec.reward_mu = (Eigen::VectorXd(8) << 0.5, -0.3, 0.2, 0.4, -0.4, 0.3, 0.6, -0.2).finished();
  spec.noise_sd = 0.0;
  spec.seed = 999;
  const LoggedDataset fresh = generate_logged_data(spec);
  double value = 0.0;
  for (const auto& r : fresh.records) {
    const Eigen::VectorXd p = softmax_policy(stack_contexts(r.x, 2).context, ActorParams{theta});
    value += p(0) * r.x.dot(spec.reward_mu.head(4)) + p(1) * r.x.dot(spec.reward_mu.tail(4));
  }
  const double oracle = target * value / static_cast<double>(fresh.records.size());
  const double mean = summary["mean"];
  const double sd = summary["sd"];
  EXPECT_LE(std::abs(mean - oracle), 3.0 * sd) << "mean " << mean << " oracle " << oracle;
}

TEST_F(CliTest, OracleWritesJson) {
  const fs::path cfg = write("c.toml", small_config());
  ASSERT_EQ(run_cli({"oracle", cfg.string(), "-o", dir_.string()}), 0) << stderr_;
  const auto doc = nlohmann::json::parse(slurp(dir_ / "oracle.json"));
  EXPECT_EQ(doc["theta_star"].size(), 4u);
  EXPECT_EQ(doc["mu_star"].size(), 4u);
  EXPECT_GT(doc["phi_squared"].get<double>(), 0.0);
}

TEST(Output, FormatNumber) {
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(format_number(1.0), "1");
  EXPECT_EQ(format_number(std::nan("")), "nan");
  EXPECT_EQ(format_number(-HUGE_VAL), "-inf");
}

}  // namespace
}  // namespace robandit::cli
