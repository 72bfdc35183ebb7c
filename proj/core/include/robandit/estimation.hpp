#pragma once

// Critic-side estimators: norm-constrained importance-weighted least squares,
// the ridge critic of the linear actor-critic baseline, and the stacked-context
// weighted least squares of the epsilon-greedy comparator.

#include <limits>

#include "robandit/policy_core.hpp"

namespace robandit {

/// Rows are regressors x_tau, paired with targets r_tau and positive weights w_tau.
struct WlsProblem {
  Matrix features;
  Vector targets;
  Vector weights;
};

void validate_problem(const WlsProblem& problem);

/// Weighted Gram matrix and moment after normalizing the weights to mean 1.
struct NormalEquations {
  Matrix gram;
  Vector moment;
};

NormalEquations weighted_normal_equations(const WlsProblem& problem);

inline constexpr double kStabilizingRidge = 1e-8;
inline constexpr double kGramConditionLimit = 1e12;
inline constexpr double kBoundaryRelTolerance = 1e-10;

/// Unconstrained weighted least squares. A ridge of kStabilizingRidge * I is
/// added when the (weight-normalized) Gram matrix has condition number above
/// kGramConditionLimit, which yields the near-minimal-norm solution for
/// rank-deficient designs.
CriticParams unconstrained_wls(const WlsProblem& problem);

/// argmin over ||mu||_2 <= C of sum_tau w_tau (r_tau - x_tau^T mu)^2.
///
/// When the unconstrained solution already lies in the ball it is returned
/// unchanged. Otherwise the boundary solution (G + rho I)^{-1} h with
/// ||.||_2 = C is found by bisection on rho >= 0; the returned point is the
/// feasible end of the final bracket.
CriticParams constrained_wls(const WlsProblem& problem,
                             double norm_cap = std::numeric_limits<double>::infinity());

/// Row tau = advantage features of the chosen arm at theta, target = reward,
/// weight = pi_theta(b_tau, a_tau) / behavior propensity.
WlsProblem build_wls_problem(const InteractionLog& log, const ActorParams& theta);

/// Gram matrix B, moment y and the ridge scale xi it was initialized with.
struct RidgeState {
  Matrix gram;
  Vector moment;
  double ridge_scale = 1.0;

  static RidgeState initial(Eigen::Index dim, double ridge_scale);
};

struct RidgeUpdate {
  RidgeState state;
  CriticParams mu;
};

/// B += b b^T, y += b r, mu = B^{-1} y.
RidgeUpdate ridge_update(const RidgeState& state, const Vector& context_row, double reward);

/// mu = B^{-1} y for the current state.
CriticParams ridge_solution(const RidgeState& state);

inline constexpr double kRewardEstimateBound = 2.0;

/// Clamps a linear reward estimate to [-2, 2].
double truncate_reward_estimate(double raw);

/// Concatenates the arm rows of a context set into one N*d vector.
Vector stack_arm_contexts(const ContextSet& context);

/// Inverse-propensity weighted least squares of rewards on stacked contexts,
/// restricted to records whose chosen arm is `arm`. Returns the N*d
/// coefficient vector. Throws InvalidState when fewer than d such records
/// exist; between d and N*d records the fit is the stabilized (near
/// minimal-norm) solution.
CriticParams epsilon_greedy_wlse(const InteractionLog& log, int arm, Eigen::Index num_arms);

/// The design behind epsilon_greedy_wlse: stacked contexts, rewards and
/// 1/propensity weights of one arm's records.
WlsProblem epsilon_greedy_problem(const InteractionLog& log, int arm);

}  // namespace robandit
