#pragma once

// Softmax actor, advantage-form critic, and the empirical objectives built
// from an interaction log.
//
// Arm indices are 0-based throughout the library. All free functions here are
// pure and may be called concurrently.

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <vector>

namespace robandit {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kContextNormTolerance = 1e-12;
inline constexpr double kProbabilityFloor = 1e-300;

/// Per-round arm features: row i is the context vector of arm i.
/// Requires at least two arms and every row with L2 norm <= 1.
class ContextSet {
 public:
  explicit ContextSet(Matrix arms);

  const Matrix& arms() const noexcept { return arms_; }
  Eigen::Index num_arms() const noexcept { return arms_.rows(); }
  Eigen::Index dim() const noexcept { return arms_.cols(); }
  Vector arm(Eigen::Index i) const { return arms_.row(i).transpose(); }

  friend bool operator==(const ContextSet& a, const ContextSet& b) {
    return a.arms_ == b.arms_;
  }

 private:
  Matrix arms_;
};

struct ActorParams {
  Vector theta;
};

struct CriticParams {
  Vector mu;
};

/// One round of bandit feedback. `propensity` is the probability with which
/// `arm` was drawn when the record was logged.
struct InteractionRecord {
  ContextSet context;
  int arm = 0;
  double reward = 0.0;
  double propensity = 1.0;
};

/// Throws InvalidData / std::invalid_argument when the record breaks its
/// invariants (arm range, |reward| <= 1, propensity in (0, 1]).
void validate_record(const InteractionRecord& record);

/// Time-ordered, append-only sequence of records sharing N and d.
class InteractionLog {
 public:
  InteractionLog() = default;

  void append(InteractionRecord record);

  std::span<const InteractionRecord> records() const noexcept { return records_; }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }
  const InteractionRecord& operator[](std::size_t i) const { return records_[i]; }
  const InteractionRecord& back() const { return records_.back(); }

  auto begin() const noexcept { return records_.begin(); }
  auto end() const noexcept { return records_.end(); }

  Eigen::Index num_arms() const;
  Eigen::Index dim() const;

 private:
  std::vector<InteractionRecord> records_;
};

/// Softmax action probabilities, computed with max-subtraction and floored at
/// kProbabilityFloor.
Vector softmax_policy(const ContextSet& context, const ActorParams& theta);

/// d/dtheta of pi_theta(b, arm) = pi(arm) * (b_arm - sum_j pi(j) b_j).
Vector policy_gradient(const ContextSet& context, const ActorParams& theta, int arm);

/// b_arm minus the policy-weighted mean context. Equal to
/// policy_gradient / pi(arm), which is the compatibility condition.
Vector advantage_features(const ContextSet& context, const ActorParams& theta, int arm);

double critic_predict(const ContextSet& context, const ActorParams& theta,
                      const CriticParams& mu, int arm);

/// (1/t) sum_tau sum_i b_{tau,i}^T mu pi_theta(b_tau, i) - lambda theta^T theta,
/// over the full context set of every record.
double empirical_J(const InteractionLog& log, const CriticParams& mu,
                   const ActorParams& theta, double lambda);

/// Importance-weighted residual mean square of the advantage critic, using
/// only the chosen arm of each record.
double empirical_U(const InteractionLog& log, const CriticParams& mu,
                   const ActorParams& theta);

/// Smallest action probability the policy assigns across all logged contexts.
double min_policy_probability(const InteractionLog& log, const ActorParams& theta);

/// Fast evaluator of (1/t) sum_tau sum_i v_{tau,i} pi_theta(b_tau, i) - lambda theta^T theta
/// for a fixed table of per-arm values v. This is the actor objective in its
/// optimizer-facing form; it stacks every context once so each evaluation is
/// a single matrix-vector product.
class PenalizedPolicyValue {
 public:
  /// `stacked_arms` has t*N rows (record-major); `values` has t*N entries.
  PenalizedPolicyValue(Matrix stacked_arms, Vector values, Eigen::Index num_arms,
                       double lambda);

  /// Values v_{tau,i} = b_{tau,i}^T mu: the proposed agent's objective.
  static PenalizedPolicyValue from_critic(const InteractionLog& log,
                                          const CriticParams& mu, double lambda);

  /// Caller-supplied values (e.g. truncated reward estimates), t x N.
  static PenalizedPolicyValue from_values(const InteractionLog& log,
                                          const Matrix& values, double lambda);

  double operator()(const Vector& theta) const;

  Eigen::Index dim() const noexcept { return stacked_arms_.cols(); }

 private:
  Matrix stacked_arms_;
  Vector values_;
  Eigen::Index num_arms_;
  Eigen::Index num_rounds_;
  double lambda_;
};

/// Stacks the contexts of every record into a (t*N) x d matrix.
Matrix stack_log_contexts(const InteractionLog& log);

}  // namespace robandit
