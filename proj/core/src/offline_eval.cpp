#include "robandit/offline_eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "parallel.hpp"
#include "robandit/errors.hpp"

namespace robandit {

void LoggedDataset::validate() const {
  if (num_actions < 2) throw InvalidData("logged data needs at least 2 actions");
  if (feature_dim < 1) throw InvalidData("logged data needs at least 1 feature");
  for (std::size_t k = 0; k < records.size(); ++k) {
    const LoggedRecord& r = records[k];
    const std::string where = " (record " + std::to_string(k + 1) + ")";
    if (r.x.size() != feature_dim) throw InvalidData("feature count mismatch" + where);
    if (!r.x.allFinite()) throw InvalidData("non-finite feature" + where);
    if (r.action < 0 || r.action >= num_actions) throw InvalidData("action out of range" + where);
    if (!(std::abs(r.reward) <= 1.0)) throw InvalidData("reward outside [-1, 1]" + where);
    if (r.propensity && !(*r.propensity > 0.0 && *r.propensity <= 1.0)) {
      throw InvalidData("propensity outside (0, 1]" + where);
    }
  }
}

bool LoggedDataset::has_propensities() const {
  return std::all_of(records.begin(), records.end(),
                     [](const LoggedRecord& r) { return r.propensity.has_value(); });
}

double LoggedDataset::min_propensity() const {
  if (records.empty() || !has_propensities()) {
    throw InvalidData("every record needs a logging propensity");
  }
  double lowest = 1.0;
  for (const auto& r : records) lowest = std::min(lowest, *r.propensity);
  return lowest;
}

StackedContext stack_contexts(const Vector& x, Eigen::Index num_arms) {
  if (num_arms < 2) throw std::invalid_argument("stacking needs N >= 2");
  if (x.size() < 1) throw std::invalid_argument("stacking needs at least one feature");
  const Eigen::Index width = x.size();
  const double norm = x.norm();
  const double scale = norm > 1.0 ? 1.0 / norm : 1.0;
  Matrix arms = Matrix::Zero(num_arms, num_arms * width);
  for (Eigen::Index i = 0; i < num_arms; ++i) {
    arms.block(i, i * width, 1, width) = scale * x.transpose();
  }
  return {ContextSet(std::move(arms)), scale};
}

// ---------------------------------------------------------------------------
// Logit propensity model

double PropensityModel::probability_second(const Vector& x) const {
  const double eta = coefficients(0) + coefficients.tail(coefficients.size() - 1).dot(x);
  return 1.0 / (1.0 + std::exp(-eta));
}

namespace {

double log_sigmoid(double z) { return z >= 0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z)); }

// Mean log-likelihood of labels y under linear predictor Z beta.
double mean_log_likelihood(const Matrix& design, const Vector& labels, const Vector& beta) {
  const Vector eta = design * beta;
  double total = 0.0;
  for (Eigen::Index k = 0; k < eta.size(); ++k) {
    total += labels(k) > 0.5 ? log_sigmoid(eta(k)) : log_sigmoid(-eta(k));
  }
  return total / static_cast<double>(eta.size());
}

}  // namespace

PropensityModel fit_logging_propensity(LoggedDataset& data) {
  data.validate();
  if (data.num_actions != 2) throw FitFailed("logit propensity model needs exactly 2 actions");
  const auto n = static_cast<Eigen::Index>(data.records.size());
  const Eigen::Index p = data.feature_dim + 1;
  Matrix design(n, p);
  Vector labels(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const LoggedRecord& r = data.records[static_cast<std::size_t>(k)];
    design(k, 0) = 1.0;
    design.row(k).tail(p - 1) = r.x.transpose();
    labels(k) = r.action == 1 ? 1.0 : 0.0;
  }
  const double ones = labels.sum();
  if (ones == 0.0 || ones == static_cast<double>(n)) {
    throw FitFailed("only one action occurs in the logged data");
  }

  PropensityModel model;
  Vector beta = Vector::Zero(p);
  double loglik = mean_log_likelihood(design, labels, beta);
  Matrix hessian;
  for (int iter = 1; iter <= kLogitMaxIterations; ++iter) {
    const Vector probs = (1.0 + (-(design * beta)).array().exp()).inverse().matrix();
    const Vector gradient = design.transpose() * (labels - probs) / static_cast<double>(n);
    const Vector curvature = probs.array() * (1.0 - probs.array());
    hessian = design.transpose() * curvature.asDiagonal() * design / static_cast<double>(n);
    model.gradient_norm = gradient.norm();
    model.iterations = iter - 1;
    if (model.gradient_norm <= kLogitGradientTolerance) break;

    const Vector step = hessian.completeOrthogonalDecomposition().solve(gradient);
    double damping = 1.0;
    Vector candidate = beta + step;
    double candidate_loglik = mean_log_likelihood(design, labels, candidate);
    while (candidate_loglik < loglik && damping > 1e-10) {
      damping *= 0.5;
      candidate = beta + damping * step;
      candidate_loglik = mean_log_likelihood(design, labels, candidate);
    }
    beta = candidate;
    loglik = candidate_loglik;
    if (!beta.allFinite() || beta.cwiseAbs().maxCoeff() > 1e4) {
      throw FitFailed("logit coefficients diverge: the actions are (quasi-)separated by the features");
    }
  }
  if (model.gradient_norm > kLogitGradientTolerance) {
    throw FitFailed("logit fit did not converge (gradient norm " +
                    std::to_string(model.gradient_norm) + "); the data may be separated");
  }
  // At a finite maximizer stretching beta lowers the likelihood; under separation it keeps rising.
  if (beta.norm() > 0.0 && mean_log_likelihood(design, labels, 2.0 * beta) > loglik) {
    throw FitFailed("logged actions are perfectly separated by the features");
  }

  model.coefficients = beta;
  const Matrix covariance =
      hessian.completeOrthogonalDecomposition().pseudoInverse() / static_cast<double>(n);
  model.standard_errors = covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
  for (auto& r : data.records) {
    const double p2 = model.probability_second(r.x);
    r.propensity = r.action == 1 ? p2 : 1.0 - p2;
  }
  return model;
}

// ---------------------------------------------------------------------------
// Replay

ReplayResult replay_evaluate(const LoggedDataset& data, const AgentFactory& make_agent,
                             int target_rounds, std::uint64_t seed,
                             std::optional<double> ratio_bound) {
  if (target_rounds < 1) throw std::invalid_argument("target rounds must be >= 1");
  data.validate();
  const double bound = ratio_bound ? *ratio_bound : 1.0 / data.min_propensity();
  if (!(bound > 0.0) || !std::isfinite(bound)) {
    throw std::invalid_argument("ratio bound M must be positive and finite");
  }
  if (!data.has_propensities()) throw InvalidData("every record needs a logging propensity");

  std::unique_ptr<Agent> agent = make_agent();
  Rng rng(mix64(seed));
  ReplayResult result;
  for (const LoggedRecord& record : data.records) {
    if (result.rounds_used >= target_rounds) break;
    ++result.records_consumed;
    const double u = uniform01(rng);
    StackedContext stacked = stack_contexts(record.x, data.num_actions);
    const Vector probs = agent->probabilities(stacked.context);
    const double target_prob = probs(record.action);
    const double ratio = target_prob / *record.propensity;
    if (ratio > bound * (1.0 + 1e-12)) {
      throw EvaluationInvalid("importance ratio " + std::to_string(ratio) +
                              " exceeds the bound M = " + std::to_string(bound) + " at record " +
                              std::to_string(result.records_consumed));
    }
    if (u >= ratio / bound) continue;
    agent->update(InteractionRecord{std::move(stacked.context), record.action, record.reward,
                                    target_prob});
    result.cumulative_reward += record.reward;
    ++result.rounds_used;
  }
  result.partial = result.rounds_used < target_rounds;
  return result;
}

LoggedDataset bootstrap_resample(const LoggedDataset& data, Rng& rng) {
  if (data.records.empty()) throw InvalidData("cannot resample an empty dataset");
  LoggedDataset copy;
  copy.num_actions = data.num_actions;
  copy.feature_dim = data.feature_dim;
  copy.records.reserve(data.records.size());
  const auto n = static_cast<double>(data.records.size());
  for (std::size_t k = 0; k < data.records.size(); ++k) {
    const auto pick = std::min(static_cast<std::size_t>(uniform01(rng) * n),
                               data.records.size() - 1);
    copy.records.push_back(data.records[pick]);
  }
  return copy;
}

BootstrapSummary bootstrap_summary(const std::vector<double>& values) {
  if (values.size() < 2) throw std::invalid_argument("bootstrap summary needs >= 2 values");
  BootstrapSummary out;
  out.n = static_cast<int>(values.size());
  for (double v : values) out.mean += v;
  out.mean /= static_cast<double>(values.size());
  double squares = 0.0;
  for (double v : values) squares += (v - out.mean) * (v - out.mean);
  out.sd = std::sqrt(squares / static_cast<double>(values.size() - 1));
  return out;
}

BootstrapReplay bootstrap_replay(const LoggedDataset& data, const AgentFactory& make_agent,
                                 int target_rounds, int resamples, std::uint64_t seed,
                                 std::optional<double> ratio_bound, int parallelism) {
  if (resamples < 2) throw std::invalid_argument("bootstrap needs >= 2 resamples");
  data.validate();
  // A resample can only raise the minimum propensity, so one bound serves all.
  const double bound = ratio_bound ? *ratio_bound : 1.0 / data.min_propensity();
  BootstrapReplay out;
  out.runs.resize(static_cast<std::size_t>(resamples));
  detail::parallel_for(resamples, parallelism, [&](int b) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(b)));
    const LoggedDataset resample = bootstrap_resample(data, rng);
    out.runs[static_cast<std::size_t>(b)] =
        replay_evaluate(resample, make_agent, target_rounds, rng(), bound);
  });
  std::vector<double> totals;
  totals.reserve(out.runs.size());
  for (const auto& run : out.runs) totals.push_back(run.cumulative_reward);
  out.summary = bootstrap_summary(totals);
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic data

LoggedDataset generate_logged_data(const LoggedDataSpec& spec) {
  const Eigen::Index dp = spec.feature_dim;
  if (dp < 1) throw std::invalid_argument("feature_dim must be >= 1");
  if (spec.num_records < 1) throw std::invalid_argument("num_records must be >= 1");
  if (spec.logging_coefficients.size() != dp + 1) {
    throw std::invalid_argument("logging coefficients need d' + 1 entries");
  }
  if (spec.reward_mu.size() != 2 * dp) throw std::invalid_argument("reward_mu needs 2 d' entries");
  if (!(spec.noise_sd >= 0.0)) throw std::invalid_argument("noise_sd must be >= 0");

  Rng rng(mix64(spec.seed));
  LoggedDataset data;
  data.num_actions = 2;
  data.feature_dim = dp;
  data.records.reserve(static_cast<std::size_t>(spec.num_records));
  for (int k = 0; k < spec.num_records; ++k) {
    Vector x(dp);
    for (Eigen::Index j = 0; j < dp; ++j) x(j) = standard_normal(rng);
    if (const double norm = x.norm(); norm > 1.0) x /= norm;
    const double eta = spec.logging_coefficients(0) + spec.logging_coefficients.tail(dp).dot(x);
    const double p_second = 1.0 / (1.0 + std::exp(-eta));
    const int action = uniform01(rng) < p_second ? 1 : 0;
    const double mean = x.dot(spec.reward_mu.segment(action * dp, dp));
    const double reward = std::clamp(mean + spec.noise_sd * standard_normal(rng), -1.0, 1.0);
    LoggedRecord record{std::move(x), action, reward, std::nullopt};
    if (spec.include_propensity) record.propensity = action == 1 ? p_second : 1.0 - p_second;
    data.records.push_back(std::move(record));
  }
  return data;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) {
    const auto first = field.find_first_not_of(" \t\r");
    const auto last = field.find_last_not_of(" \t\r");
    fields.push_back(first == std::string::npos ? "" : field.substr(first, last - first + 1));
  }
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double parse_number(const std::string& text, std::size_t line_no) {
  char* end = nullptr;
  const double value = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size()) {
    throw InvalidData("line " + std::to_string(line_no) + ": '" + text + "' is not a number");
  }
  return value;
}

}  // namespace

LoggedDataset read_logged_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    header = split_csv_line(line);
    break;
  }
  if (header.empty()) throw InvalidData("logged CSV has no header row");
  if (header.front() != "t") throw InvalidData("logged CSV header must start with 't'");

  std::size_t col = 1;
  while (col < header.size() && header[col] == "x_" + std::to_string(col)) ++col;
  const auto feature_dim = static_cast<Eigen::Index>(col - 1);
  if (feature_dim < 1) throw InvalidData("logged CSV header has no x_1.. columns");
  if (col + 2 > header.size() || header[col] != "action" || header[col + 1] != "reward") {
    throw InvalidData("logged CSV header must continue with 'action,reward' after the features");
  }
  const bool with_propensity = col + 2 < header.size();
  if (with_propensity && (header[col + 2] != "propensity" || col + 3 != header.size())) {
    throw InvalidData("logged CSV header may only end with an optional 'propensity' column");
  }

  LoggedDataset data;
  data.num_actions = 2;
  data.feature_dim = feature_dim;
  int max_action = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#' || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw InvalidData("line " + std::to_string(line_no) + ": expected " +
                        std::to_string(header.size()) + " fields, got " +
                        std::to_string(fields.size()));
    }
    LoggedRecord record;
    record.x.resize(feature_dim);
    for (Eigen::Index j = 0; j < feature_dim; ++j) {
      record.x(j) = parse_number(fields[static_cast<std::size_t>(j) + 1], line_no);
    }
    const double action = parse_number(fields[col], line_no);
    if (action != std::floor(action) || action < 1) {
      throw InvalidData("line " + std::to_string(line_no) + ": action must be an integer >= 1");
    }
    record.action = static_cast<int>(action) - 1;
    max_action = std::max(max_action, record.action + 1);
    record.reward = parse_number(fields[col + 1], line_no);
    if (with_propensity) record.propensity = parse_number(fields[col + 2], line_no);
    data.records.push_back(std::move(record));
  }
  data.num_actions = std::max(2, max_action);
  data.validate();
  return data;
}

LoggedDataset read_logged_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidData("cannot open logged data file '" + path + "'");
  return read_logged_csv(in);
}

void write_logged_csv(std::ostream& out, const LoggedDataset& data) {
  const bool with_propensity = !data.records.empty() && data.has_propensities();
  out << 't';
  for (Eigen::Index j = 0; j < data.feature_dim; ++j) out << ",x_" << j + 1;
  out << ",action,reward" << (with_propensity ? ",propensity" : "") << '\n';
  char buf[32];
  for (std::size_t k = 0; k < data.records.size(); ++k) {
    const LoggedRecord& r = data.records[k];
    out << k + 1;
    for (Eigen::Index j = 0; j < r.x.size(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", r.x(j));
      out << ',' << buf;
    }
    std::snprintf(buf, sizeof buf, "%.17g", r.reward);
    out << ',' << r.action + 1 << ',' << buf;
    if (with_propensity) {
      std::snprintf(buf, sizeof buf, "%.17g", *r.propensity);
      out << ',' << buf;
    }
    out << '\n';
  }
}

}  // namespace robandit
