#pragma once

// Plug-in sandwich inference for the actor-critic estimating equations and
// Z-tests on actor coordinates.
//
// Parameters are stacked as (mu, theta), so the covariance is 2d x 2d and the
// actor block starts at offset d.

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "robandit/policy_core.hpp"

namespace robandit {

inline constexpr double kDefaultFdStep = 1e-5;
inline constexpr double kLambdaConditionLimit = 1e12;

/// Per-record critic and actor scores.
struct ScorePair {
  Vector u_mu;
  Vector j_theta;

  Vector stacked() const;
};

/// u_mu = -2 (r - m_{mu,theta}(b_a)) x_a pi_theta(b, a) / propensity,
/// j_theta = sum_i b_i^T mu grad pi_theta(b, i) - 2 lambda theta.
ScorePair score_pair(const InteractionRecord& record, const CriticParams& mu,
                     const ActorParams& theta, double lambda);

/// Empirical mean of the stacked scores over the log.
Vector mean_scores(const InteractionLog& log, const CriticParams& mu, const ActorParams& theta,
                   double lambda);

/// Analytic d^2/dtheta^2 of the empirical actor objective.
Matrix actor_hessian_analytic(const InteractionLog& log, const CriticParams& mu,
                              const ActorParams& theta, double lambda);

struct LambdaHat {
  Matrix matrix;
  /// Analytic actor Hessian, for cross-checking the finite-difference block.
  Matrix actor_hessian_analytic;
  /// max |FD - analytic| / max(1, max |analytic|) over the actor block.
  double actor_hessian_discrepancy = 0.0;
};

/// Jacobian of the mean scores in (mu, theta). The mu-columns are analytic;
/// the theta-columns are central finite differences with step `fd_step`.
LambdaHat lambda_hat(const InteractionLog& log, const CriticParams& mu, const ActorParams& theta,
                     double lambda, double fd_step = kDefaultFdStep);

/// (1/t) sum_tau s_tau s_tau^T of the stacked, uncentered scores.
Matrix v_hat(const InteractionLog& log, const CriticParams& mu, const ActorParams& theta,
             double lambda);

struct SandwichCovariance {
  Matrix lambda_hat;
  Matrix v_hat;
  Matrix psi_hat;
  int t = 0;
  double condition_number = 0.0;
};

/// psi = Lambda^{-1} V Lambda^{-T}. Throws InferenceUnavailable when Lambda's
/// condition number reaches kLambdaConditionLimit.
SandwichCovariance sandwich_from(Matrix lambda_hat, Matrix v_hat, int t);

SandwichCovariance sandwich(const InteractionLog& log, const CriticParams& mu,
                            const ActorParams& theta, double lambda,
                            double fd_step = kDefaultFdStep);

/// Sandwich for the linear actor-critic baseline: ridge-critic scores on raw
/// chosen-arm contexts and actor scores on truncated reward estimates.
SandwichCovariance linear_ac_sandwich(const InteractionLog& log, const CriticParams& mu,
                                      const ActorParams& theta, double lambda,
                                      double fd_step = kDefaultFdStep);

/// Inverse-propensity weighted sandwich for one arm's stacked-context LSE:
/// bread (1/t) sum w x x^T, meat (1/t) sum w^2 e^2 x x^T.
SandwichCovariance epsilon_greedy_sandwich(const InteractionLog& log, int arm,
                                           const Vector& coefficients);

/// Minimum eigenvalue of (1/t) sum_tau sum_i pi_i (b_i - bbar)(b_i - bbar)^T.
double phi_squared_estimate(const InteractionLog& log, const ActorParams& theta);

/// Standard normal CDF.
double normal_cdf(double z);

/// Two-sided p-value 2 (1 - Phi(|z|)).
double two_sided_p_value(double z);

struct TestEntry {
  std::string label;
  double estimate = 0.0;
  double std_error = 0.0;
  double z_stat = 0.0;
  double p_value = 1.0;
  bool reject = false;
  /// False when the variance is zero or non-finite; the statistic is then NaN.
  bool defined = true;
};

struct TestReport {
  std::vector<TestEntry> entries;
  double alpha = 0.05;
  int t = 0;
};

/// Z-test of each coordinate of `estimate` against zero, using the diagonal of
/// `cov.psi_hat` starting at `offset` and the scale 1/t.
TestReport z_test_block(const Vector& estimate, const SandwichCovariance& cov,
                        Eigen::Index offset, double alpha,
                        const std::vector<std::string>& labels = {});

/// Z-test on actor coordinates: Z_j = theta_j / sqrt(psi_{d+j,d+j} / t).
TestReport z_test(const ActorParams& theta, const SandwichCovariance& cov, double alpha);

/// Tests theta_j - theta_k = 0 for each (j, k) pair (0-based).
TestReport contrast_test(const ActorParams& theta, const SandwichCovariance& cov,
                         const std::vector<std::pair<int, int>>& pairs, double alpha);

}  // namespace robandit
