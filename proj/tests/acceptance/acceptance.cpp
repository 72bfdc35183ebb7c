// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits nonzero when any criterion fails.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "config.hpp"
#include "robandit/estimation.hpp"
#include "robandit/inference.hpp"
#include "robandit/offline_eval.hpp"
#include "robandit/sim_env.hpp"

namespace fs = std::filesystem;
using namespace robandit;

namespace {

constexpr double kFdRelTolerance = 1e-6;
constexpr double kCongruenceTolerance = 1e-10;
constexpr double kCompatibilityTolerance = 1e-15;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

std::string fixed(double x, int digits = 3) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(digits);
  s << x;
  return s.str();
}

cli::RunSettings bundled(const std::string& name) {
  cli::RunSettings settings =
      cli::build_settings(cli::load_config(fs::path(ROBANDIT_SOURCE_DIR) / "configs" / name));
  settings.experiment.parallelism = 0;
  settings.oracle.cache_dir = (fs::path(ROBANDIT_BINARY_DIR) / "oracle_cache").string();
  return settings;
}

void for_each_index(int count, const std::function<void(int)>& task) {
  const int workers = std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (int w = 0; w < std::min(workers, count); ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) {
        try {
          task(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

std::map<std::string, double> rates_by_label(const AgentSummary& s) {
  std::map<std::string, double> out;
  for (const auto& r : s.rates) out[r.label] = r.rate;
  return out;
}

const AgentSummary& summary_of(const ExperimentResult& r, AgentKind kind) {
  for (const auto& a : r.agents) {
    if (a.agent == kind) return a;
  }
  throw std::runtime_error("agent missing from experiment result");
}

double median_at(const AgentSummary& s, int t) {
  for (const auto& q : s.cumulative_reward) {
    if (q.t == t) return q.median;
  }
  throw std::runtime_error("round missing from cumulative reward summary");
}

// Criteria 1-4 share one run of the bundled table1.toml.
void table_criteria(std::vector<Outcome>& out) {
  const cli::RunSettings settings = bundled("table1.toml");
  const ExperimentResult result = rejection_rate_experiment(settings.experiment);
  const auto proposed = rates_by_label(summary_of(result, AgentKind::kProposed));
  const auto ac = rates_by_label(summary_of(result, AgentKind::kActorCritic));
  const auto greedy = rates_by_label(summary_of(result, AgentKind::kEpsilonGreedy));

  Outcome& c1 = out[0];
  for (int j = 1; j <= 4; ++j) {
    const std::string label = "theta_" + std::to_string(j);
    const double rate = proposed.at(label);
    c1.detail << " " << label << "=" << fixed(rate, 2);
    if (j < 4) {
      c1.require(rate >= 0.90, label + " >= 0.90");
    } else {
      c1.require(rate >= 0.03 && rate <= 0.16, label + " in [0.03, 0.16]");
    }
  }

  Outcome& c2 = out[1];
  for (int j = 1; j <= 3; ++j) {
    const std::string label = "theta_" + std::to_string(j);
    const double rate = ac.at(label);
    c2.detail << " " << label << "=" << fixed(rate, 2);
    c2.require(rate <= 0.85, label + " <= 0.85");
    c2.require(rate < proposed.at(label), label + " below proposed");
  }

  Outcome& c3 = out[2];
  const auto d = settings.experiment.env.dim;
  for (int i = 1; i <= 2; ++i) {
    const std::string label = "mu^" + std::to_string(i) + "_" + std::to_string((i - 1) * d + 4);
    const double rate = greedy.at(label);
    c3.detail << " " << label << "=" << fixed(rate, 2);
    c3.require(rate >= 0.40, label + " >= 0.40");
  }

  Outcome& c4 = out[3];
  const int horizon = settings.experiment.horizon;
  const double m_prop = median_at(summary_of(result, AgentKind::kProposed), horizon);
  const double m_ac = median_at(summary_of(result, AgentKind::kActorCritic), horizon);
  const double m_greedy = median_at(summary_of(result, AgentKind::kEpsilonGreedy), horizon);
  c4.detail << " median R_" << horizon << ": proposed=" << fixed(m_prop) << " ac=" << fixed(m_ac)
            << " egreedy=" << fixed(m_greedy);
  c4.require(m_prop >= m_ac, "proposed >= ac");
  c4.require(std::abs(m_prop - m_greedy) <= 0.10 * std::abs(m_greedy),
             "proposed within 10% of egreedy");
}

// Criteria 5 and 7 share the long proposed-agent episodes.
void long_run_criteria(std::vector<Outcome>& out) {
  const cli::RunSettings settings = bundled("consistency.toml");
  const ExperimentConfig& x = settings.experiment;
  const ActorParams theta_star =
      cached_oracle_theta_star(x.env, x.hyper.lambda, settings.oracle.mc_samples, x.opt,
                               settings.oracle.mc_seed, settings.oracle.cache_dir);
  const int reps = x.repetitions;
  const int half = x.horizon / 2;
  std::vector<double> error(reps), early(reps), late(reps);
  for_each_index(reps, [&](int rep) {
    auto agent = make_agent(AgentKind::kProposed, x.env.dim, x.env.num_arms, x.hyper, x.opt);
    const Episode e = run_episode(*agent, x.env, x.horizon, repetition_seed(x.base_seed, rep),
                                  theta_star);
    const auto r = static_cast<std::size_t>(rep);
    error[r] = (e.theta_trace.back() - theta_star.theta).norm();
    early[r] = e.regret.cumulative[static_cast<std::size_t>(half - 1)] / std::sqrt(half);
    late[r] = e.regret.cumulative.back() / std::sqrt(x.horizon);
  });

  const auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double a : v) s += a;
    return s / static_cast<double>(v.size());
  };

  Outcome& c5 = out[4];
  const double mean_error = mean(error);
  c5.detail << " mean ||theta_T - theta*||=" << fixed(mean_error) << " over " << reps
            << " seeds, T=" << x.horizon;
  c5.require(mean_error <= 0.15, "mean error <= 0.15");

  // Paired comparison: per-seed difference of the normalized regrets.
  Outcome& c7 = out[6];
  std::vector<double> diff(early.size());
  for (std::size_t k = 0; k < diff.size(); ++k) diff[k] = late[k] - early[k];
  const double m = mean(diff);
  double ss = 0.0;
  for (double a : diff) ss += (a - m) * (a - m);
  const double se = std::sqrt(ss / static_cast<double>(diff.size() - 1) /
                              static_cast<double>(diff.size()));
  c7.detail << " R/sqrt(T): T=" << half << " " << fixed(mean(early), 4) << ", T=" << x.horizon
            << " " << fixed(mean(late), 4) << ", paired se=" << fixed(se, 4);
  c7.require(m <= se, "non-increasing within one standard error");
}

void null_calibration(Outcome& c6) {
  const cli::RunSettings settings = bundled("null_calibration.toml");
  const ExperimentResult result = rejection_rate_experiment(settings.experiment);
  const double alpha = settings.experiment.hyper.alpha;
  const int n = settings.experiment.repetitions;
  const double half_width = 1.96 * std::sqrt(alpha * (1.0 - alpha) / n);
  c6.detail << " band [" << fixed(alpha - half_width, 4) << ", " << fixed(alpha + half_width, 4)
            << "]";
  for (const auto& rate : summary_of(result, AgentKind::kProposed).rates) {
    c6.detail << " " << rate.label << "=" << fixed(rate.rate);
    c6.require(rate.rate >= alpha - half_width && rate.rate <= alpha + half_width,
               rate.label + " in band");
  }
}

ContextSet draw_context(std::mt19937_64& rng, Eigen::Index arms, Eigen::Index dim) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix m(arms, dim);
  for (Eigen::Index i = 0; i < arms; ++i) {
    for (Eigen::Index j = 0; j < dim; ++j) m(i, j) = u(rng);
    const double norm = m.row(i).norm();
    if (norm > 1.0) m.row(i) /= norm;
  }
  return ContextSet(m);
}

InteractionLog draw_log(std::mt19937_64& rng, int t, Eigen::Index arms, Eigen::Index dim) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  InteractionLog log;
  for (int k = 0; k < t; ++k) {
    InteractionRecord r{draw_context(rng, arms, dim), 0, 0.0, 1.0};
    r.arm = static_cast<int>(rng() % static_cast<std::uint64_t>(arms));
    r.reward = 2.0 * u(rng) - 1.0;
    r.propensity = 0.2 + 0.6 * u(rng);
    log.append(std::move(r));
  }
  return log;
}

Vector draw_vector(std::mt19937_64& rng, Eigen::Index dim, double scale) {
  std::normal_distribution<double> n(0.0, scale);
  Vector v(dim);
  for (Eigen::Index j = 0; j < dim; ++j) v(j) = n(rng);
  return v;
}

double rel_gap(double a, double fd) { return std::abs(a - fd) / std::max(1.0, std::abs(fd)); }

void property_suites(Outcome& c8) {
  std::mt19937_64 rng(20240801);
  const double h = 1e-6;

  double compat = 0.0;
  double softmax_fd = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Index arms = 2 + trial % 4;
    const Eigen::Index dim = 1 + trial % 6;
    const ContextSet ctx = draw_context(rng, arms, dim);
    const Vector theta = draw_vector(rng, dim, 2.0);
    const Vector p = softmax_policy(ctx, ActorParams{theta});
    for (int a = 0; a < arms; ++a) {
      const Vector g = policy_gradient(ctx, ActorParams{theta}, a);
      compat = std::max(compat, (g - p(a) * advantage_features(ctx, ActorParams{theta}, a))
                                    .lpNorm<Eigen::Infinity>());
      for (Eigen::Index k = 0; k < dim; ++k) {
        Vector up = theta, down = theta;
        up(k) += h;
        down(k) -= h;
        const double fd = (softmax_policy(ctx, ActorParams{up})(a) -
                           softmax_policy(ctx, ActorParams{down})(a)) / (2 * h);
        softmax_fd = std::max(softmax_fd, rel_gap(g(k), fd));
      }
    }
  }
  c8.detail << " compat=" << compat << " dpi=" << softmax_fd;
  c8.require(compat <= kCompatibilityTolerance, "compatibility identity");
  c8.require(softmax_fd <= kFdRelTolerance, "policy gradient vs finite differences");

  double score_fd = 0.0;
  double hessian_fd = 0.0;
  double congruence = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::Index dim = 2 + trial % 4;
    const InteractionLog log = draw_log(rng, 40, 2 + trial % 3, dim);
    const CriticParams mu{draw_vector(rng, dim, 1.0)};
    const ActorParams theta{draw_vector(rng, dim, 1.5)};
    const double lambda = 0.001 * (1 + trial);
    const Vector scores = mean_scores(log, mu, theta, lambda);
    for (Eigen::Index k = 0; k < dim; ++k) {
      Vector up = mu.mu, down = mu.mu;
      up(k) += h;
      down(k) -= h;
      const double fd_u =
          (empirical_U(log, CriticParams{up}, theta) - empirical_U(log, CriticParams{down}, theta)) /
          (2 * h);
      score_fd = std::max(score_fd, rel_gap(scores(k), fd_u));
      up = theta.theta;
      down = theta.theta;
      up(k) += h;
      down(k) -= h;
      const double fd_j = (empirical_J(log, mu, ActorParams{up}, lambda) -
                           empirical_J(log, mu, ActorParams{down}, lambda)) / (2 * h);
      score_fd = std::max(score_fd, rel_gap(scores(dim + k), fd_j));
    }
    const SandwichCovariance cov = sandwich(log, mu, theta, lambda);
    hessian_fd = std::max(hessian_fd, lambda_hat(log, mu, theta, lambda).actor_hessian_discrepancy);
    const Matrix back = cov.lambda_hat * cov.psi_hat * cov.lambda_hat.transpose();
    congruence = std::max(congruence, (back - cov.v_hat).lpNorm<Eigen::Infinity>() /
                                          std::max(1.0, cov.v_hat.lpNorm<Eigen::Infinity>()));
  }
  c8.detail << " scores=" << score_fd << " hessian=" << hessian_fd << " congruence=" << congruence;
  c8.require(score_fd <= kFdRelTolerance, "scores vs finite differences");
  c8.require(hessian_fd <= kFdRelTolerance, "actor Hessian vs finite differences");
  c8.require(congruence <= kCongruenceTolerance, "sandwich congruence");

  // Constrained WLS against random points of the feasible ball.
  int dominated = 0;
  const int points = 1000;
  {
    const Eigen::Index dim = 4;
    WlsProblem problem;
    problem.features = Matrix(60, dim);
    problem.targets = Vector(60);
    problem.weights = Vector(60);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int r = 0; r < 60; ++r) {
      problem.features.row(r) = draw_vector(rng, dim, 0.5).transpose();
      problem.targets(r) = 2.0 * u(rng) - 1.0 + 3.0 * problem.features(r, 0);
      problem.weights(r) = 0.5 + 2.0 * u(rng);
    }
    const double cap = 0.3;
    const auto loss = [&](const Vector& m) {
      return (problem.weights.array() *
              (problem.targets - problem.features * m).array().square()).sum();
    };
    const Vector best = constrained_wls(problem, cap).mu;
    const double best_loss = loss(best);
    for (int k = 0; k < points; ++k) {
      Vector candidate = draw_vector(rng, dim, 1.0);
      candidate *= cap * std::pow(u(rng), 1.0 / dim) / candidate.norm();
      if (best_loss <= loss(candidate) * (1.0 + 1e-12)) ++dominated;
    }
    c8.detail << " wls=" << dominated << "/" << points;
    c8.require(best.norm() <= cap * (1.0 + 1e-10) && dominated == points, "WLS dominance");
  }

  // Replay of a fixed policy against direct simulation from the same generator.
  LoggedDataSpec spec;
  spec.feature_dim = 4;
  spec.num_records = 3000;
  spec.logging_coefficients = (Vector(5) << 0.2, 0.6, -0.4, 0.3, 0.0).finished();
  spec.reward_mu = (Vector(8) << 0.5, -0.3, 0.2, 0.4, -0.4, 0.3, 0.6, -0.2).finished();
  spec.seed = 11;
  const LoggedDataset data = generate_logged_data(spec);
  const ActorParams policy{(Vector(8) << 1.0, -0.5, 0.0, 0.5, -1.0, 0.5, 1.0, 0.0).finished()};
  const int target = 500;
  const BootstrapReplay replay = bootstrap_replay(
      data, [&] { return std::make_unique<FixedPolicyAgent>(policy); }, target, 30, 3);

  LoggedDataSpec fresh_spec = spec;
  fresh_spec.num_records = 200000;
  fresh_spec.noise_sd = 0.0;
  fresh_spec.seed = 999;
  const LoggedDataset fresh = generate_logged_data(fresh_spec);
  double value = 0.0;
  for (const auto& r : fresh.records) {
    const Vector p = softmax_policy(stack_contexts(r.x, 2).context, policy);
    value += p(0) * r.x.dot(spec.reward_mu.head(4)) + p(1) * r.x.dot(spec.reward_mu.tail(4));
  }
  const double oracle = target * value / static_cast<double>(fresh.records.size());
  c8.detail << " replay=" << fixed(replay.summary.mean) << "+-" << fixed(replay.summary.sd)
            << " oracle=" << fixed(oracle);
  c8.require(std::abs(replay.summary.mean - oracle) <= 2.0 * replay.summary.sd,
             "replay within 2 standard errors");
}

}  // namespace

int main() {
  std::vector<Outcome> outcomes(8);
  const auto guarded = [&](const std::vector<int>& ids, const std::function<void()>& body) {
    try {
      body();
    } catch (const std::exception& e) {
      for (int id : ids) outcomes[static_cast<std::size_t>(id - 1)].require(false, e.what());
    }
  };
  guarded({1, 2, 3, 4}, [&] { table_criteria(outcomes); });
  guarded({5, 7}, [&] { long_run_criteria(outcomes); });
  guarded({6}, [&] { null_calibration(outcomes[5]); });
  guarded({8}, [&] { property_suites(outcomes[7]); });

  bool all = true;
  for (std::size_t k = 0; k < outcomes.size(); ++k) {
    std::cout << "criterion " << (k + 1) << ": " << (outcomes[k].pass ? "PASS" : "FAIL")
              << outcomes[k].detail.str() << "\n";
    all = all && outcomes[k].pass;
  }
  return all ? 0 : 1;
}
