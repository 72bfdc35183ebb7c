#include "robandit/policy_core.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include "robandit/errors.hpp"

namespace robandit {

namespace {

void check_dims(const ContextSet& context, const Vector& params, const char* what) {
  if (params.size() != context.dim()) {
    throw std::invalid_argument(std::string(what) + ": parameter dimension " +
                                std::to_string(params.size()) +
                                " does not match context dimension " +
                                std::to_string(context.dim()));
  }
}

void check_arm(const ContextSet& context, int arm) {
  if (arm < 0 || arm >= context.num_arms()) {
    throw std::invalid_argument("arm index " + std::to_string(arm) + " out of range [0, " +
                                std::to_string(context.num_arms()) + ")");
  }
}

// Softmax over a score vector, in place.
void softmax_inplace(Eigen::Ref<Vector> scores) {
  const double shift = scores.maxCoeff();
  scores = (scores.array() - shift).exp();
  scores /= scores.sum();
  scores = scores.cwiseMax(kProbabilityFloor);
}

}  // namespace

ContextSet::ContextSet(Matrix arms) : arms_(std::move(arms)) {
  if (arms_.rows() < 2) {
    throw std::invalid_argument("context set needs at least 2 arms");
  }
  if (arms_.cols() < 1) {
    throw std::invalid_argument("context dimension must be at least 1");
  }
  if (!arms_.allFinite()) {
    throw InvalidData("context set contains non-finite entries");
  }
  for (Eigen::Index i = 0; i < arms_.rows(); ++i) {
    const double norm = arms_.row(i).norm();
    if (norm > 1.0 + kContextNormTolerance) {
      throw InvalidData("arm " + std::to_string(i) + " context has L2 norm " +
                        std::to_string(norm) + " > 1");
    }
  }
}

void validate_record(const InteractionRecord& record) {
  check_arm(record.context, record.arm);
  if (!std::isfinite(record.reward) || std::abs(record.reward) > 1.0) {
    throw InvalidData("reward " + std::to_string(record.reward) + " outside [-1, 1]");
  }
  if (!(record.propensity > 0.0) || record.propensity > 1.0) {
    throw InvalidData("propensity " + std::to_string(record.propensity) +
                      " outside (0, 1]");
  }
}

void InteractionLog::append(InteractionRecord record) {
  validate_record(record);
  if (!records_.empty()) {
    const auto& first = records_.front().context;
    if (record.context.num_arms() != first.num_arms() ||
        record.context.dim() != first.dim()) {
      throw std::invalid_argument("record shape does not match the log");
    }
  }
  records_.push_back(std::move(record));
}

Eigen::Index InteractionLog::num_arms() const {
  if (records_.empty()) throw InvalidState("empty log has no arm count");
  return records_.front().context.num_arms();
}

Eigen::Index InteractionLog::dim() const {
  if (records_.empty()) throw InvalidState("empty log has no dimension");
  return records_.front().context.dim();
}

Vector softmax_policy(const ContextSet& context, const ActorParams& theta) {
  check_dims(context, theta.theta, "softmax_policy");
  Vector probs = context.arms() * theta.theta;
  softmax_inplace(probs);
  return probs;
}

Vector advantage_features(const ContextSet& context, const ActorParams& theta, int arm) {
  check_arm(context, arm);
  const Vector probs = softmax_policy(context, theta);
  const Vector mean_context = context.arms().transpose() * probs;
  return context.arm(arm) - mean_context;
}

Vector policy_gradient(const ContextSet& context, const ActorParams& theta, int arm) {
  check_arm(context, arm);
  const Vector probs = softmax_policy(context, theta);
  const Vector mean_context = context.arms().transpose() * probs;
  return probs(arm) * (context.arm(arm) - mean_context);
}

double critic_predict(const ContextSet& context, const ActorParams& theta,
                      const CriticParams& mu, int arm) {
  check_dims(context, mu.mu, "critic_predict");
  return advantage_features(context, theta, arm).dot(mu.mu);
}

double empirical_J(const InteractionLog& log, const CriticParams& mu,
                   const ActorParams& theta, double lambda) {
  if (log.empty()) throw InvalidState("empirical_J on an empty log");
  double total = 0.0;
  for (const auto& record : log) {
    check_dims(record.context, mu.mu, "empirical_J");
    const Vector probs = softmax_policy(record.context, theta);
    const Vector arm_values = record.context.arms() * mu.mu;
    total += arm_values.dot(probs);
  }
  return total / static_cast<double>(log.size()) - lambda * theta.theta.squaredNorm();
}

double empirical_U(const InteractionLog& log, const CriticParams& mu,
                   const ActorParams& theta) {
  if (log.empty()) throw InvalidState("empirical_U on an empty log");
  double total = 0.0;
  for (const auto& record : log) {
    if (!(record.propensity > 0.0)) {
      throw InvalidData("empirical_U: zero behavior propensity");
    }
    const Vector probs = softmax_policy(record.context, theta);
    const double residual =
        record.reward - critic_predict(record.context, theta, mu, record.arm);
    total += residual * residual * probs(record.arm) / record.propensity;
  }
  return total / static_cast<double>(log.size());
}

double min_policy_probability(const InteractionLog& log, const ActorParams& theta) {
  double lowest = 1.0;
  for (const auto& record : log) {
    lowest = std::min(lowest, softmax_policy(record.context, theta).minCoeff());
  }
  return lowest;
}

Matrix stack_log_contexts(const InteractionLog& log) {
  if (log.empty()) throw InvalidState("cannot stack contexts of an empty log");
  const Eigen::Index n = log.num_arms();
  Matrix stacked(static_cast<Eigen::Index>(log.size()) * n, log.dim());
  Eigen::Index row = 0;
  for (const auto& record : log) {
    stacked.middleRows(row, n) = record.context.arms();
    row += n;
  }
  return stacked;
}

PenalizedPolicyValue::PenalizedPolicyValue(Matrix stacked_arms, Vector values,
                                           Eigen::Index num_arms, double lambda)
    : stacked_arms_(std::move(stacked_arms)),
      values_(std::move(values)),
      num_arms_(num_arms),
      num_rounds_(num_arms > 0 ? stacked_arms_.rows() / num_arms : 0),
      lambda_(lambda) {
  if (num_arms_ < 2 || num_rounds_ * num_arms_ != stacked_arms_.rows() ||
      values_.size() != stacked_arms_.rows() || num_rounds_ == 0) {
    throw std::invalid_argument("PenalizedPolicyValue: inconsistent shapes");
  }
}

PenalizedPolicyValue PenalizedPolicyValue::from_critic(const InteractionLog& log,
                                                       const CriticParams& mu,
                                                       double lambda) {
  Matrix stacked = stack_log_contexts(log);
  if (mu.mu.size() != stacked.cols()) {
    throw std::invalid_argument("critic dimension does not match the log");
  }
  Vector values = stacked * mu.mu;
  return {std::move(stacked), std::move(values), log.num_arms(), lambda};
}

PenalizedPolicyValue PenalizedPolicyValue::from_values(const InteractionLog& log,
                                                       const Matrix& values,
                                                       double lambda) {
  Matrix stacked = stack_log_contexts(log);
  if (values.rows() != static_cast<Eigen::Index>(log.size()) ||
      values.cols() != log.num_arms()) {
    throw std::invalid_argument("value table must be t x N");
  }
  // Row-major flattening matches the record-major stacking.
  Vector flat(values.size());
  for (Eigen::Index tau = 0; tau < values.rows(); ++tau) {
    flat.segment(tau * values.cols(), values.cols()) = values.row(tau).transpose();
  }
  return {std::move(stacked), std::move(flat), log.num_arms(), lambda};
}

double PenalizedPolicyValue::operator()(const Vector& theta) const {
  if (theta.size() != stacked_arms_.cols()) {
    throw std::invalid_argument("PenalizedPolicyValue: theta has wrong dimension");
  }
  Vector scores = stacked_arms_ * theta;
  double total = 0.0;
  for (Eigen::Index tau = 0; tau < num_rounds_; ++tau) {
    auto block = scores.segment(tau * num_arms_, num_arms_);
    softmax_inplace(block);
    total += block.dot(values_.segment(tau * num_arms_, num_arms_));
  }
  return total / static_cast<double>(num_rounds_) - lambda_ * theta.squaredNorm();
}

}  // namespace robandit
