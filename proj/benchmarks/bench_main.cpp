#include <benchmark/benchmark.h>

#include <memory>

#include "robandit/agents.hpp"
#include "robandit/estimation.hpp"
#include "robandit/inference.hpp"
#include "robandit/offline_eval.hpp"
#include "robandit/seeding.hpp"
#include "robandit/sim_env.hpp"

namespace {

using namespace robandit;

InteractionLog simulated_log(int rounds) {
  const EnvironmentSpec env = misspecified_reward_environment();
  Rng rng(derive_seed(17, static_cast<std::uint64_t>(rounds)));
  InteractionLog log;
  for (int t = 0; t < rounds; ++t) {
    const RoundSample s = sample_round(env, rng);
    const int arm = uniform01(rng) < 0.5 ? 0 : 1;
    log.append({s.context, arm, s.rewards(arm), 0.5});
  }
  return log;
}

void BM_SoftmaxPolicy(benchmark::State& state) {
  const auto arms = state.range(0);
  Rng rng(1);
  Matrix m(arms, 8);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = standard_normal(rng);
  m.rowwise().normalize();
  const ContextSet ctx(m);
  const ActorParams theta{Vector::Constant(8, 0.5)};
  for (auto _ : state) benchmark::DoNotOptimize(softmax_policy(ctx, theta));
}
BENCHMARK(BM_SoftmaxPolicy)->Arg(2)->Arg(16)->Arg(128);

void BM_ConstrainedWls(benchmark::State& state) {
  const InteractionLog log = simulated_log(static_cast<int>(state.range(0)));
  const WlsProblem problem = build_wls_problem(log, ActorParams{Vector::Constant(4, 0.2)});
  for (auto _ : state) benchmark::DoNotOptimize(constrained_wls(problem, 0.5));
}
BENCHMARK(BM_ConstrainedWls)->Arg(50)->Arg(400)->Arg(5000);

void BM_Sandwich(benchmark::State& state) {
  const InteractionLog log = simulated_log(static_cast<int>(state.range(0)));
  const ActorParams theta{Vector::Constant(4, 0.2)};
  const CriticParams mu = constrained_wls(build_wls_problem(log, theta));
  for (auto _ : state) benchmark::DoNotOptimize(sandwich(log, mu, theta, 0.001));
}
BENCHMARK(BM_Sandwich)->Arg(50)->Arg(400);

// One update of a learning agent after `range(1)` rounds of history.
void BM_AgentUpdate(benchmark::State& state) {
  const auto kind = static_cast<AgentKind>(state.range(0));
  const InteractionLog log = simulated_log(static_cast<int>(state.range(1)) + 1);
  for (auto _ : state) {
    state.PauseTiming();
    auto agent = make_agent(kind, 4, 2, HyperParams{}, OptimizerConfig{});
    for (std::size_t t = 0; t + 1 < log.size(); ++t) {
      InteractionRecord r = log[t];
      r.propensity = agent->probabilities(r.context)(r.arm);
      agent->update(r);
    }
    InteractionRecord last = log.back();
    last.propensity = agent->probabilities(last.context)(last.arm);
    state.ResumeTiming();
    agent->update(last);
  }
}
BENCHMARK(BM_AgentUpdate)
    ->Args({static_cast<int>(AgentKind::kProposed), 50})
    ->Args({static_cast<int>(AgentKind::kActorCritic), 50})
    ->Args({static_cast<int>(AgentKind::kEpsilonGreedy), 50})
    ->Unit(benchmark::kMillisecond)
    ->Iterations(5);

void BM_ReplayFixedPolicy(benchmark::State& state) {
  LoggedDataSpec spec;
  spec.num_records = static_cast<int>(state.range(0));
  spec.logging_coefficients = Vector::Zero(5);
  spec.reward_mu = Vector::Constant(8, 0.1);
  const LoggedDataset data = generate_logged_data(spec);
  const ActorParams theta{Vector::Constant(8, 0.3)};
  const AgentFactory factory = [&] { return std::make_unique<FixedPolicyAgent>(theta); };
  for (auto _ : state) benchmark::DoNotOptimize(replay_evaluate(data, factory, spec.num_records, 5));
}
BENCHMARK(BM_ReplayFixedPolicy)->Arg(1000)->Arg(20000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
