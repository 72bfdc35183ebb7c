#pragma once

// File formats written and read by the command-line tool. Every CSV starts
// with a `# config_hash: <hex>` comment line.

#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "robandit/inference.hpp"
#include "robandit/offline_eval.hpp"
#include "robandit/sim_env.hpp"

namespace robandit::cli {

/// Shortest decimal that round-trips; "inf", "-inf" and "nan" otherwise.
std::string format_number(double x);

void write_rejection_rates_csv(std::ostream& out, const ExperimentResult& result,
                               const std::string& hash);
nlohmann::json rejection_rates_json(const ExperimentResult& result, const std::string& hash);
void write_cumulative_rewards_csv(std::ostream& out, const ExperimentResult& result,
                                  const std::string& hash);

/// Side-by-side rejection-rate table: stacked coefficients per arm for
/// epsilon-greedy, actor coordinates per agent for the others.
std::string rejection_table(const ExperimentResult& result);

/// One serialized agent run.
struct AgentLog {
  AgentKind agent = AgentKind::kProposed;
  std::string config_hash;
  InteractionLog log;
  std::vector<Vector> theta;
  std::vector<Vector> mu;
};

/// Columns: t, arm (1-based), reward, propensity, b<i>_<j>, theta_<j>, mu_<k>.
void write_agent_log_csv(std::ostream& out, const AgentLog& run);
AgentLog read_agent_log_csv(std::istream& in);

nlohmann::json test_report_json(const TestReport& report);
std::string test_report_table(const TestReport& report);

}  // namespace robandit::cli
