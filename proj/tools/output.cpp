#include "output.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "robandit/errors.hpp"

namespace robandit::cli {

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

namespace {

nlohmann::json json_number(double x) {
  if (std::isfinite(x)) return x;
  return nullptr;
}

std::string fixed(double x, int digits) {
  if (!std::isfinite(x)) return format_number(x);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) {
    if (!field.empty() && field.back() == '\r') field.pop_back();
    fields.push_back(field);
  }
  return fields;
}

double parse_double(const std::string& text) {
  char* end = nullptr;
  const double value = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size()) {
    throw InvalidData("agent log: '" + text + "' is not a number");
  }
  return value;
}

}  // namespace

void write_rejection_rates_csv(std::ostream& out, const ExperimentResult& result,
                               const std::string& hash) {
  out << "# config_hash: " << hash << '\n';
  out << "agent,parameter,rate,ci_low,ci_high,rejections,repetitions,inference_unavailable\n";
  for (const auto& agent : result.agents) {
    for (const auto& rate : agent.rates) {
      out << to_string(agent.agent) << ',' << rate.label << ',' << format_number(rate.rate) << ','
          << format_number(rate.ci_low) << ',' << format_number(rate.ci_high) << ','
          << rate.rejections << ',' << result.repetitions << ',' << agent.inference_unavailable
          << '\n';
    }
  }
}

nlohmann::json rejection_rates_json(const ExperimentResult& result, const std::string& hash) {
  nlohmann::json agents = nlohmann::json::array();
  for (const auto& agent : result.agents) {
    nlohmann::json rates = nlohmann::json::array();
    for (const auto& rate : agent.rates) {
      rates.push_back({{"parameter", rate.label},
                       {"rate", rate.rate},
                       {"ci_low", rate.ci_low},
                       {"ci_high", rate.ci_high},
                       {"rejections", rate.rejections}});
    }
    agents.push_back({{"agent", to_string(agent.agent)},
                      {"rates", rates},
                      {"inference_unavailable", agent.inference_unavailable},
                      {"clipped_rewards", agent.clipped_rewards}});
  }
  return {{"config_hash", hash},
          {"repetitions", result.repetitions},
          {"alpha", result.alpha},
          {"agents", agents}};
}

void write_cumulative_rewards_csv(std::ostream& out, const ExperimentResult& result,
                                  const std::string& hash) {
  out << "# config_hash: " << hash << '\n';
  out << "agent,t,median,q1,q3\n";
  for (const auto& agent : result.agents) {
    for (const auto& row : agent.cumulative_reward) {
      out << to_string(agent.agent) << ',' << row.t << ',' << format_number(row.median) << ','
          << format_number(row.q1) << ',' << format_number(row.q3) << '\n';
    }
  }
}

std::string rejection_table(const ExperimentResult& result) {
  std::ostringstream out;
  const AgentSummary* greedy = nullptr;
  std::vector<const AgentSummary*> actors;
  for (const auto& agent : result.agents) {
    if (agent.agent == AgentKind::kEpsilonGreedy) {
      greedy = &agent;
    } else {
      actors.push_back(&agent);
    }
  }
  char line[256];
  out << "Rejection rates of H0 (" << result.repetitions << " repetitions, alpha = "
      << format_number(result.alpha) << ")\n\n";
  if (greedy != nullptr) {
    // Labels are mu^<arm>_<index>; one column per arm.
    std::map<std::string, std::vector<double>> by_arm;
    std::vector<std::string> arms;
    for (const auto& rate : greedy->rates) {
      const std::string arm = rate.label.substr(0, rate.label.find('_'));
      if (by_arm.find(arm) == by_arm.end()) arms.push_back(arm);
      by_arm[arm].push_back(rate.rate);
    }
    out << "epsilon-greedy\n";
    std::snprintf(line, sizeof line, "  %-16s", "Param.");
    out << line;
    for (std::size_t i = 0; i < arms.size(); ++i) {
      std::snprintf(line, sizeof line, " %8s", ("i=" + std::to_string(i + 1)).c_str());
      out << line;
    }
    out << '\n';
    const std::size_t rows = by_arm[arms.front()].size();
    for (std::size_t j = 0; j < rows; ++j) {
      std::snprintf(line, sizeof line, "  %-16s", ("mu^i_(i-1)d+" + std::to_string(j + 1)).c_str());
      out << line;
      for (const auto& arm : arms) {
        std::snprintf(line, sizeof line, " %8.2f", by_arm[arm][j]);
        out << line;
      }
      out << '\n';
    }
    if (greedy->inference_unavailable > 0) {
      out << "  (inference unavailable in " << greedy->inference_unavailable
          << " repetitions, counted as non-rejections)\n";
    }
    out << '\n';
  }
  if (!actors.empty()) {
    std::snprintf(line, sizeof line, "  %-16s", "Param.");
    out << line;
    for (const auto* agent : actors) {
      std::snprintf(line, sizeof line, " %8s", to_string(agent->agent).c_str());
      out << line;
    }
    out << '\n';
    for (std::size_t j = 0; j < actors.front()->rates.size(); ++j) {
      std::snprintf(line, sizeof line, "  %-16s", actors.front()->rates[j].label.c_str());
      out << line;
      for (const auto* agent : actors) {
        std::snprintf(line, sizeof line, " %8.2f", agent->rates[j].rate);
        out << line;
      }
      out << '\n';
    }
    for (const auto* agent : actors) {
      if (agent->inference_unavailable > 0) {
        out << "  (" << to_string(agent->agent) << ": inference unavailable in "
            << agent->inference_unavailable << " repetitions, counted as non-rejections)\n";
      }
    }
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Agent logs

void write_agent_log_csv(std::ostream& out, const AgentLog& run) {
  if (run.log.empty()) throw InvalidState("cannot serialize an empty agent log");
  const Eigen::Index n = run.log.num_arms();
  const Eigen::Index d = run.log.dim();
  const Eigen::Index mu_width = run.mu.empty() ? 0 : run.mu.front().size();
  out << "# config_hash: " << run.config_hash << '\n';
  out << "# agent: " << to_string(run.agent) << '\n';
  out << "t,arm,reward,propensity";
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) out << ",b" << i + 1 << '_' << j + 1;
  }
  for (Eigen::Index j = 0; j < d; ++j) out << ",theta_" << j + 1;
  for (Eigen::Index k = 0; k < mu_width; ++k) out << ",mu_" << k + 1;
  out << '\n';
  for (std::size_t t = 0; t < run.log.size(); ++t) {
    const InteractionRecord& r = run.log[t];
    out << t + 1 << ',' << r.arm + 1 << ',' << format_number(r.reward) << ','
        << format_number(r.propensity);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < d; ++j) out << ',' << format_number(r.context.arms()(i, j));
    }
    for (Eigen::Index j = 0; j < d; ++j) out << ',' << format_number(run.theta[t](j));
    for (Eigen::Index k = 0; k < mu_width; ++k) out << ',' << format_number(run.mu[t](k));
    out << '\n';
  }
}

AgentLog read_agent_log_csv(std::istream& in) {
  AgentLog run;
  std::string line;
  std::vector<std::string> header;
  bool agent_seen = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.rfind("# config_hash:", 0) == 0) {
      run.config_hash = line.substr(line.find(':') + 2);
    } else if (line.rfind("# agent:", 0) == 0) {
      run.agent = agent_kind_from_string(line.substr(line.find(':') + 2));
      agent_seen = true;
    } else if (line[0] != '#') {
      header = split(line);
      break;
    }
  }
  if (header.size() < 4 || header[0] != "t" || header[1] != "arm" || header[2] != "reward" ||
      header[3] != "propensity") {
    throw InvalidData("agent log header must start with t,arm,reward,propensity");
  }
  if (!agent_seen) throw InvalidData("agent log lacks the '# agent:' line");

  Eigen::Index n = 0;
  Eigen::Index d = 0;
  Eigen::Index theta_width = 0;
  Eigen::Index mu_width = 0;
  for (std::size_t c = 4; c < header.size(); ++c) {
    const std::string& name = header[c];
    if (name[0] == 'b' && name.find('_') != std::string::npos) {
      const int arm = std::atoi(name.substr(1, name.find('_') - 1).c_str());
      const int coord = std::atoi(name.substr(name.find('_') + 1).c_str());
      n = std::max<Eigen::Index>(n, arm);
      d = std::max<Eigen::Index>(d, coord);
    } else if (name.rfind("theta_", 0) == 0) {
      ++theta_width;
    } else if (name.rfind("mu_", 0) == 0) {
      ++mu_width;
    } else {
      throw InvalidData("agent log: unknown column '" + name + "'");
    }
  }
  if (n < 2 || d < 1 || static_cast<std::size_t>(4 + n * d + theta_width + mu_width) != header.size()) {
    throw InvalidData("agent log: inconsistent context columns");
  }
  if (theta_width != 0 && theta_width != d) throw InvalidData("agent log: theta width != d");

  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto fields = split(line);
    if (fields.size() != header.size()) {
      throw InvalidData("agent log row " + std::to_string(line_no) + " has " +
                        std::to_string(fields.size()) + " fields, expected " +
                        std::to_string(header.size()));
    }
    Matrix arms(n, d);
    std::size_t c = 4;
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < d; ++j) arms(i, j) = parse_double(fields[c++]);
    }
    Vector theta(theta_width);
    for (Eigen::Index j = 0; j < theta_width; ++j) theta(j) = parse_double(fields[c++]);
    Vector mu(mu_width);
    for (Eigen::Index k = 0; k < mu_width; ++k) mu(k) = parse_double(fields[c++]);
    const double arm = parse_double(fields[1]);
    run.log.append(InteractionRecord{ContextSet(std::move(arms)), static_cast<int>(arm) - 1,
                                     parse_double(fields[2]), parse_double(fields[3])});
    if (theta_width > 0) run.theta.push_back(std::move(theta));
    if (mu_width > 0) run.mu.push_back(std::move(mu));
  }
  if (run.log.empty()) throw InvalidData("agent log has no rows");
  return run;
}

// ---------------------------------------------------------------------------
// Test reports

nlohmann::json test_report_json(const TestReport& report) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : report.entries) {
    entries.push_back({{"parameter", e.label},
                       {"estimate", json_number(e.estimate)},
                       {"std_error", json_number(e.std_error)},
                       {"z", json_number(e.z_stat)},
                       {"p_value", json_number(e.p_value)},
                       {"reject", e.reject},
                       {"defined", e.defined}});
  }
  return {{"alpha", report.alpha}, {"t", report.t}, {"tests", entries}};
}

std::string test_report_table(const TestReport& report) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-18s %12s %12s %10s %10s  %s\n", "parameter", "estimate",
                "std.error", "z", "p-value", "H0");
  out << line;
  for (const auto& e : report.entries) {
    std::snprintf(line, sizeof line, "%-18s %12s %12s %10s %10s  %s\n", e.label.c_str(),
                  fixed(e.estimate, 4).c_str(), fixed(e.std_error, 4).c_str(),
                  fixed(e.z_stat, 3).c_str(), fixed(e.p_value, 4).c_str(),
                  !e.defined ? "undefined" : (e.reject ? "reject" : "keep"));
    out << line;
  }
  out << "t = " << report.t << ", alpha = " << format_number(report.alpha) << '\n';
  return out.str();
}

}  // namespace robandit::cli
