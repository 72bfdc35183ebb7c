#include "robandit/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "robandit/errors.hpp"

namespace robandit {

namespace {

double condition_number(const Eigen::SelfAdjointEigenSolver<Matrix>& eig) {
  const Vector& values = eig.eigenvalues();
  const double largest = values.cwiseAbs().maxCoeff();
  const double smallest = values.minCoeff();
  if (!(smallest > 0.0)) return std::numeric_limits<double>::infinity();
  return largest / smallest;
}

}  // namespace

void validate_problem(const WlsProblem& problem) {
  const auto rows = problem.features.rows();
  if (rows == 0) throw InvalidState("weighted least squares needs at least one record");
  if (problem.targets.size() != rows || problem.weights.size() != rows) {
    throw std::invalid_argument("features, targets and weights disagree in length");
  }
  if (!problem.features.allFinite() || !problem.targets.allFinite() ||
      !problem.weights.allFinite()) {
    throw InvalidData("weighted least squares inputs must be finite");
  }
  if ((problem.weights.array() <= 0.0).any()) {
    throw InvalidData("weights must be positive");
  }
}

NormalEquations weighted_normal_equations(const WlsProblem& problem) {
  validate_problem(problem);
  const Vector w = problem.weights / problem.weights.mean();
  NormalEquations eq;
  eq.gram = problem.features.transpose() * w.asDiagonal() * problem.features;
  eq.moment = problem.features.transpose() * w.cwiseProduct(problem.targets);
  return eq;
}

CriticParams unconstrained_wls(const WlsProblem& problem) {
  NormalEquations eq = weighted_normal_equations(problem);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(eq.gram);
  if (condition_number(eig) > kGramConditionLimit) {
    eq.gram.diagonal().array() += kStabilizingRidge;
  }
  return {eq.gram.ldlt().solve(eq.moment)};
}

CriticParams constrained_wls(const WlsProblem& problem, double norm_cap) {
  if (!(norm_cap > 0.0)) throw std::invalid_argument("norm cap must be positive");
  CriticParams free_solution = unconstrained_wls(problem);
  if (free_solution.mu.norm() <= norm_cap) return free_solution;

  // Boundary: ||(G + rho I)^{-1} h|| = C. In the eigenbasis of G the norm is
  // sum_k c_k^2 / (g_k + rho)^2, strictly decreasing in rho.
  const NormalEquations eq = weighted_normal_equations(problem);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(eq.gram);
  const Vector eigenvalues = eig.eigenvalues().cwiseMax(0.0);
  const Vector coords = eig.eigenvectors().transpose() * eq.moment;
  auto norm_at = [&](double rho) {
    return (coords.array() / (eigenvalues.array() + rho)).matrix().norm();
  };

  double lo = 0.0;
  double hi = eq.moment.norm() / norm_cap;  // ||(G + hi I)^{-1} h|| <= ||h|| / hi = C
  while (norm_at(hi) > norm_cap) hi *= 2.0;
  for (int iter = 0; iter < 400 && (hi - lo) > kBoundaryRelTolerance * hi; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (norm_at(mid) > norm_cap) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const Vector scaled = (coords.array() / (eigenvalues.array() + hi)).matrix();
  return {eig.eigenvectors() * scaled};
}

WlsProblem build_wls_problem(const InteractionLog& log, const ActorParams& theta) {
  if (log.empty()) throw InvalidState("cannot build a least-squares problem from an empty log");
  const auto t = static_cast<Eigen::Index>(log.size());
  WlsProblem problem{Matrix(t, log.dim()), Vector(t), Vector(t)};
  for (Eigen::Index tau = 0; tau < t; ++tau) {
    const auto& record = log[static_cast<std::size_t>(tau)];
    if (!(record.propensity > 0.0)) throw InvalidData("zero behavior propensity");
    const Vector probs = softmax_policy(record.context, theta);
    const Vector mean_context = record.context.arms().transpose() * probs;
    problem.features.row(tau) = (record.context.arm(record.arm) - mean_context).transpose();
    problem.targets(tau) = record.reward;
    problem.weights(tau) = probs(record.arm) / record.propensity;
  }
  return problem;
}

RidgeState RidgeState::initial(Eigen::Index dim, double ridge_scale) {
  if (!(ridge_scale > 0.0)) throw std::invalid_argument("ridge scale must be positive");
  return {ridge_scale * Matrix::Identity(dim, dim), Vector::Zero(dim), ridge_scale};
}

CriticParams ridge_solution(const RidgeState& state) {
  return {state.gram.ldlt().solve(state.moment)};
}

RidgeUpdate ridge_update(const RidgeState& state, const Vector& context_row, double reward) {
  if (context_row.size() != state.moment.size()) {
    throw std::invalid_argument("ridge_update: context dimension mismatch");
  }
  if (!context_row.allFinite() || !std::isfinite(reward)) {
    throw InvalidData("ridge_update: non-finite input");
  }
  RidgeState next = state;
  next.gram.noalias() += context_row * context_row.transpose();
  next.moment += reward * context_row;
  CriticParams mu = ridge_solution(next);
  return {std::move(next), std::move(mu)};
}

double truncate_reward_estimate(double raw) {
  return std::max(-kRewardEstimateBound, std::min(kRewardEstimateBound, raw));
}

Vector stack_arm_contexts(const ContextSet& context) {
  Vector stacked(context.num_arms() * context.dim());
  for (Eigen::Index i = 0; i < context.num_arms(); ++i) {
    stacked.segment(i * context.dim(), context.dim()) = context.arm(i);
  }
  return stacked;
}

WlsProblem epsilon_greedy_problem(const InteractionLog& log, int arm) {
  if (log.empty()) throw InvalidState("epsilon-greedy fit on an empty log");
  const Eigen::Index width = log.num_arms() * log.dim();
  Eigen::Index count = 0;
  for (const auto& record : log) count += record.arm == arm ? 1 : 0;

  WlsProblem problem{Matrix(count, width), Vector(count), Vector(count)};
  Eigen::Index row = 0;
  for (const auto& record : log) {
    if (record.arm != arm) continue;
    if (!(record.propensity > 0.0)) throw InvalidData("zero behavior propensity");
    problem.features.row(row) = stack_arm_contexts(record.context).transpose();
    problem.targets(row) = record.reward;
    problem.weights(row) = 1.0 / record.propensity;
    ++row;
  }
  return problem;
}

CriticParams epsilon_greedy_wlse(const InteractionLog& log, int arm, Eigen::Index num_arms) {
  if (arm < 0 || arm >= num_arms) throw std::invalid_argument("arm index out of range");
  if (!log.empty() && log.num_arms() != num_arms) {
    throw std::invalid_argument("arm count does not match the log");
  }
  WlsProblem problem = epsilon_greedy_problem(log, arm);
  const Eigen::Index needed = log.dim();
  if (problem.features.rows() < needed) {
    throw InvalidState("arm " + std::to_string(arm) + " has " +
                       std::to_string(problem.features.rows()) + " records, needs " +
                       std::to_string(needed));
  }
  // Fewer than N*d records leaves the design rank deficient; the stabilizing
  // ridge then gives the near-minimal-norm fit.
  return unconstrained_wls(problem);
}

}  // namespace robandit
