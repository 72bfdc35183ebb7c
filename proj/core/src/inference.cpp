#include "robandit/inference.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "robandit/errors.hpp"
#include "robandit/estimation.hpp"

namespace robandit {

namespace {

struct PolicyTerms {
  Vector probs;
  Vector mean_context;
};

PolicyTerms policy_terms(const ContextSet& context, const ActorParams& theta) {
  PolicyTerms terms{softmax_policy(context, theta), Vector()};
  terms.mean_context = context.arms().transpose() * terms.probs;
  return terms;
}

// sum_i pi_i (b_i - bbar) b_i^T = B^T diag(pi) B - bbar bbar^T.
Matrix weighted_context_covariance(const ContextSet& context, const PolicyTerms& terms) {
  const Matrix& arms = context.arms();
  return arms.transpose() * terms.probs.asDiagonal() * arms -
         terms.mean_context * terms.mean_context.transpose();
}

// sum_i v_i grad pi_i = B^T (pi .* v) - bbar (pi^T v).
Vector value_weighted_policy_gradient(const ContextSet& context, const PolicyTerms& terms,
                                      const Vector& values) {
  return context.arms().transpose() * terms.probs.cwiseProduct(values) -
         terms.mean_context * terms.probs.dot(values);
}

void require_nonempty(const InteractionLog& log, const char* what) {
  if (log.empty()) throw InvalidState(std::string(what) + " on an empty log");
}

// Central differences of a vector-valued function of theta; one column per
// theta coordinate.
template <typename F>
Matrix theta_jacobian_fd(F&& f, const Vector& theta, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("finite-difference step must be > 0");
  const Eigen::Index d = theta.size();
  Matrix jac;
  for (Eigen::Index c = 0; c < d; ++c) {
    Vector plus = theta;
    Vector minus = theta;
    plus(c) += step;
    minus(c) -= step;
    const Vector column = (f(plus) - f(minus)) / (2.0 * step);
    if (jac.size() == 0) jac.resize(column.size(), d);
    jac.col(c) = column;
  }
  return jac;
}

Matrix outer_product_mean(const std::vector<Vector>& scores) {
  const Eigen::Index p = scores.front().size();
  Matrix v = Matrix::Zero(p, p);
  for (const auto& s : scores) v.selfadjointView<Eigen::Lower>().rankUpdate(s);
  v = v.selfadjointView<Eigen::Lower>();
  return v / static_cast<double>(scores.size());
}

// Scores of the linear actor-critic baseline.
Vector linear_ac_score(const InteractionRecord& record, const CriticParams& mu,
                       const ActorParams& theta, double lambda) {
  const Eigen::Index d = mu.mu.size();
  const ContextSet& context = record.context;
  const Vector chosen = context.arm(record.arm);
  const PolicyTerms terms = policy_terms(context, theta);
  const Vector estimates = (context.arms() * mu.mu).unaryExpr(&truncate_reward_estimate);
  Vector s(2 * d);
  s.head(d) = -2.0 * (record.reward - chosen.dot(mu.mu)) * chosen;
  s.tail(d) = value_weighted_policy_gradient(context, terms, estimates) - 2.0 * lambda * theta.theta;
  return s;
}

Vector linear_ac_mean_actor_score(const InteractionLog& log, const CriticParams& mu,
                                  const ActorParams& theta, double lambda) {
  const Eigen::Index d = mu.mu.size();
  Vector total = Vector::Zero(d);
  for (const auto& record : log) total += linear_ac_score(record, mu, theta, lambda).tail(d);
  return total / static_cast<double>(log.size());
}

}  // namespace

Vector ScorePair::stacked() const {
  Vector s(u_mu.size() + j_theta.size());
  s << u_mu, j_theta;
  return s;
}

ScorePair score_pair(const InteractionRecord& record, const CriticParams& mu,
                     const ActorParams& theta, double lambda) {
  if (!(record.propensity > 0.0)) throw InvalidData("score_pair: zero propensity");
  const ContextSet& context = record.context;
  if (mu.mu.size() != context.dim() || theta.theta.size() != context.dim()) {
    throw std::invalid_argument("score_pair: parameter dimension mismatch");
  }
  const PolicyTerms terms = policy_terms(context, theta);
  const Vector features = context.arm(record.arm) - terms.mean_context;
  const double residual = record.reward - features.dot(mu.mu);
  const double weight = terms.probs(record.arm) / record.propensity;

  ScorePair scores;
  scores.u_mu = -2.0 * residual * weight * features;
  scores.j_theta = value_weighted_policy_gradient(context, terms, context.arms() * mu.mu) -
                   2.0 * lambda * theta.theta;
  return scores;
}

Vector mean_scores(const InteractionLog& log, const CriticParams& mu, const ActorParams& theta,
                   double lambda) {
  require_nonempty(log, "mean_scores");
  Vector total = Vector::Zero(2 * mu.mu.size());
  for (const auto& record : log) total += score_pair(record, mu, theta, lambda).stacked();
  return total / static_cast<double>(log.size());
}

Matrix actor_hessian_analytic(const InteractionLog& log, const CriticParams& mu,
                              const ActorParams& theta, double lambda) {
  require_nonempty(log, "actor_hessian_analytic");
  const Eigen::Index d = theta.theta.size();
  Matrix total = Matrix::Zero(d, d);
  for (const auto& record : log) {
    const ContextSet& context = record.context;
    const PolicyTerms terms = policy_terms(context, theta);
    const Vector values = context.arms() * mu.mu;
    const Matrix centered =
        context.arms().rowwise() - terms.mean_context.transpose();  // N x d
    const Matrix spread = centered.transpose() * terms.probs.asDiagonal() * centered;
    const Vector value_probs = values.cwiseProduct(terms.probs);
    total += centered.transpose() * value_probs.asDiagonal() * centered -
             value_probs.sum() * spread;
  }
  total /= static_cast<double>(log.size());
  total.diagonal().array() -= 2.0 * lambda;
  return total;
}

LambdaHat lambda_hat(const InteractionLog& log, const CriticParams& mu, const ActorParams& theta,
                     double lambda, double fd_step) {
  require_nonempty(log, "lambda_hat");
  const Eigen::Index d = theta.theta.size();
  const double t = static_cast<double>(log.size());

  Matrix u_mu_mu = Matrix::Zero(d, d);
  Matrix j_theta_mu = Matrix::Zero(d, d);
  for (const auto& record : log) {
    const ContextSet& context = record.context;
    const PolicyTerms terms = policy_terms(context, theta);
    const Vector features = context.arm(record.arm) - terms.mean_context;
    const double weight = terms.probs(record.arm) / record.propensity;
    u_mu_mu.noalias() += 2.0 * weight * features * features.transpose();
    j_theta_mu += weighted_context_covariance(context, terms);
  }

  const Matrix theta_columns = theta_jacobian_fd(
      [&](const Vector& th) { return mean_scores(log, mu, ActorParams{th}, lambda); },
      theta.theta, fd_step);

  LambdaHat out;
  out.matrix.resize(2 * d, 2 * d);
  out.matrix.topLeftCorner(d, d) = u_mu_mu / t;
  out.matrix.bottomLeftCorner(d, d) = j_theta_mu / t;
  out.matrix.rightCols(d) = theta_columns;
  out.actor_hessian_analytic = actor_hessian_analytic(log, mu, theta, lambda);
  const Matrix fd_block = out.matrix.bottomRightCorner(d, d);
  const double scale = std::max(1.0, out.actor_hessian_analytic.cwiseAbs().maxCoeff());
  out.actor_hessian_discrepancy =
      (fd_block - out.actor_hessian_analytic).cwiseAbs().maxCoeff() / scale;
  return out;
}

Matrix v_hat(const InteractionLog& log, const CriticParams& mu, const ActorParams& theta,
             double lambda) {
  require_nonempty(log, "v_hat");
  std::vector<Vector> scores;
  scores.reserve(log.size());
  for (const auto& record : log) scores.push_back(score_pair(record, mu, theta, lambda).stacked());
  return outer_product_mean(scores);
}

SandwichCovariance sandwich_from(Matrix lambda_hat, Matrix v_hat, int t) {
  if (lambda_hat.rows() != lambda_hat.cols() || v_hat.rows() != lambda_hat.rows() ||
      v_hat.cols() != v_hat.rows()) {
    throw std::invalid_argument("sandwich: bread and meat must be square and the same size");
  }
  if (t <= 0) throw std::invalid_argument("sandwich: t must be positive");
  const Eigen::JacobiSVD<Matrix> svd(lambda_hat);
  const Vector& sv = svd.singularValues();
  const double smallest = sv(sv.size() - 1);
  const double condition =
      smallest > 0.0 ? sv(0) / smallest : std::numeric_limits<double>::infinity();
  if (!(condition < kLambdaConditionLimit)) {
    throw InferenceUnavailable(
        "insufficient data for inference: bread matrix condition number " +
            std::to_string(condition),
        condition);
  }
  const Eigen::PartialPivLU<Matrix> lu(lambda_hat);
  const Matrix left = lu.solve(v_hat);                              // Lambda^{-1} V
  const Matrix psi = lu.solve(left.transpose()).transpose();       // (Lambda^{-1} V) Lambda^{-T}
  return {std::move(lambda_hat), std::move(v_hat), psi, t, condition};
}

SandwichCovariance sandwich(const InteractionLog& log, const CriticParams& mu,
                            const ActorParams& theta, double lambda, double fd_step) {
  const LambdaHat bread = lambda_hat(log, mu, theta, lambda, fd_step);
  return sandwich_from(bread.matrix, v_hat(log, mu, theta, lambda), static_cast<int>(log.size()));
}

SandwichCovariance linear_ac_sandwich(const InteractionLog& log, const CriticParams& mu,
                                      const ActorParams& theta, double lambda, double fd_step) {
  require_nonempty(log, "linear_ac_sandwich");
  const Eigen::Index d = theta.theta.size();
  const double t = static_cast<double>(log.size());

  Matrix gram = Matrix::Zero(d, d);
  Matrix j_theta_mu = Matrix::Zero(d, d);
  std::vector<Vector> scores;
  scores.reserve(log.size());
  for (const auto& record : log) {
    const ContextSet& context = record.context;
    const Vector chosen = context.arm(record.arm);
    gram.noalias() += 2.0 * chosen * chosen.transpose();
    const PolicyTerms terms = policy_terms(context, theta);
    const Vector raw = context.arms() * mu.mu;
    for (Eigen::Index i = 0; i < context.num_arms(); ++i) {
      if (std::abs(raw(i)) >= kRewardEstimateBound) continue;  // clamped: zero slope in mu
      const Vector grad = terms.probs(i) * (context.arm(i) - terms.mean_context);
      j_theta_mu.noalias() += grad * context.arm(i).transpose();
    }
    scores.push_back(linear_ac_score(record, mu, theta, lambda));
  }

  Matrix bread = Matrix::Zero(2 * d, 2 * d);
  bread.topLeftCorner(d, d) = gram / t;
  bread.bottomLeftCorner(d, d) = j_theta_mu / t;
  bread.bottomRightCorner(d, d) = theta_jacobian_fd(
      [&](const Vector& th) { return linear_ac_mean_actor_score(log, mu, ActorParams{th}, lambda); },
      theta.theta, fd_step);
  return sandwich_from(std::move(bread), outer_product_mean(scores),
                       static_cast<int>(log.size()));
}

SandwichCovariance epsilon_greedy_sandwich(const InteractionLog& log, int arm,
                                           const Vector& coefficients) {
  require_nonempty(log, "epsilon_greedy_sandwich");
  const Eigen::Index width = log.num_arms() * log.dim();
  if (coefficients.size() != width) {
    throw std::invalid_argument("coefficient vector must have N*d entries");
  }
  Matrix bread = Matrix::Zero(width, width);
  Matrix meat = Matrix::Zero(width, width);
  for (const auto& record : log) {
    if (record.arm != arm) continue;
    const Vector x = stack_arm_contexts(record.context);
    const double w = 1.0 / record.propensity;
    const double e = record.reward - x.dot(coefficients);
    bread.noalias() += w * x * x.transpose();
    meat.noalias() += w * w * e * e * x * x.transpose();
  }
  const double t = static_cast<double>(log.size());
  return sandwich_from(bread / t, meat / t, static_cast<int>(log.size()));
}

double phi_squared_estimate(const InteractionLog& log, const ActorParams& theta) {
  require_nonempty(log, "phi_squared_estimate");
  const Eigen::Index d = theta.theta.size();
  Matrix total = Matrix::Zero(d, d);
  for (const auto& record : log) {
    total += weighted_context_covariance(record.context, policy_terms(record.context, theta));
  }
  total /= static_cast<double>(log.size());
  return Eigen::SelfAdjointEigenSolver<Matrix>(total, Eigen::EigenvaluesOnly).eigenvalues()(0);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double two_sided_p_value(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

namespace {

TestEntry make_entry(std::string label, double estimate, double variance, int t, double alpha) {
  TestEntry entry;
  entry.label = std::move(label);
  entry.estimate = estimate;
  const double scaled = variance / static_cast<double>(t);
  if (!(scaled > 0.0) || !std::isfinite(scaled)) {
    entry.defined = false;
    entry.std_error = std::numeric_limits<double>::quiet_NaN();
    entry.z_stat = std::numeric_limits<double>::quiet_NaN();
    entry.p_value = std::numeric_limits<double>::quiet_NaN();
    entry.reject = false;
    return entry;
  }
  entry.std_error = std::sqrt(scaled);
  entry.z_stat = estimate / entry.std_error;
  entry.p_value = two_sided_p_value(entry.z_stat);
  entry.reject = entry.p_value < alpha;
  return entry;
}

void check_alpha(double alpha) {
  if (!(alpha > 0.0) || alpha > 1.0) throw std::invalid_argument("alpha must be in (0, 1]");
}

}  // namespace

TestReport z_test_block(const Vector& estimate, const SandwichCovariance& cov,
                        Eigen::Index offset, double alpha,
                        const std::vector<std::string>& labels) {
  check_alpha(alpha);
  if (cov.t <= 0) throw std::invalid_argument("z_test: covariance has no rounds");
  if (offset < 0 || offset + estimate.size() > cov.psi_hat.rows()) {
    throw std::invalid_argument("z_test: block exceeds the covariance");
  }
  if (!labels.empty() && static_cast<Eigen::Index>(labels.size()) != estimate.size()) {
    throw std::invalid_argument("z_test: label count mismatch");
  }
  TestReport report;
  report.alpha = alpha;
  report.t = cov.t;
  for (Eigen::Index j = 0; j < estimate.size(); ++j) {
    std::string label = labels.empty() ? "theta_" + std::to_string(j + 1)
                                       : labels[static_cast<std::size_t>(j)];
    report.entries.push_back(make_entry(std::move(label), estimate(j),
                                        cov.psi_hat(offset + j, offset + j), cov.t, alpha));
  }
  return report;
}

TestReport z_test(const ActorParams& theta, const SandwichCovariance& cov, double alpha) {
  const Eigen::Index d = theta.theta.size();
  if (cov.psi_hat.rows() != 2 * d) {
    throw std::invalid_argument("z_test: covariance must be 2d x 2d");
  }
  return z_test_block(theta.theta, cov, d, alpha);
}

TestReport contrast_test(const ActorParams& theta, const SandwichCovariance& cov,
                         const std::vector<std::pair<int, int>>& pairs, double alpha) {
  check_alpha(alpha);
  const Eigen::Index d = theta.theta.size();
  if (cov.psi_hat.rows() != 2 * d) {
    throw std::invalid_argument("contrast_test: covariance must be 2d x 2d");
  }
  if (cov.t <= 0) throw std::invalid_argument("contrast_test: covariance has no rounds");
  TestReport report;
  report.alpha = alpha;
  report.t = cov.t;
  for (const auto& [j, k] : pairs) {
    if (j < 0 || k < 0 || j >= d || k >= d) {
      throw std::invalid_argument("contrast_test: index out of range");
    }
    const Matrix& psi = cov.psi_hat;
    const double variance = psi(d + j, d + j) + psi(d + k, d + k) - 2.0 * psi(d + j, d + k);
    report.entries.push_back(make_entry(
        "theta_" + std::to_string(j + 1) + "-theta_" + std::to_string(k + 1),
        theta.theta(j) - theta.theta(k), variance, cov.t, alpha));
  }
  return report;
}

}  // namespace robandit
