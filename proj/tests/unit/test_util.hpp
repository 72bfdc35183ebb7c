#pragma once

#include <random>

#include "robandit/policy_core.hpp"

namespace robandit::testing {

inline Matrix rows(std::initializer_list<std::initializer_list<double>> values) {
  Matrix m(static_cast<Eigen::Index>(values.size()),
           static_cast<Eigen::Index>(values.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& row : values) {
    Eigen::Index j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

inline Vector vec(std::initializer_list<double> values) {
  Vector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v(i++) = x;
  return v;
}

// Context set with rows drawn uniformly in the unit ball's cube, then
// shrunk to norm <= 1.
inline ContextSet random_context(std::mt19937_64& rng, Eigen::Index arms, Eigen::Index dim) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix m(arms, dim);
  for (Eigen::Index i = 0; i < arms; ++i) {
    for (Eigen::Index j = 0; j < dim; ++j) m(i, j) = u(rng);
    const double n = m.row(i).norm();
    if (n > 1.0) m.row(i) /= n;
  }
  return ContextSet(m);
}

// Log of `t` records with arbitrary arms, rewards in [-1, 1] and propensities
// in [0.2, 0.8].
inline InteractionLog random_log(std::mt19937_64& rng, int t, Eigen::Index arms, Eigen::Index dim) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  InteractionLog log;
  for (int k = 0; k < t; ++k) {
    InteractionRecord r{random_context(rng, arms, dim), 0, 0.0, 1.0};
    r.arm = static_cast<int>(rng() % static_cast<std::uint64_t>(arms));
    r.reward = 2.0 * u(rng) - 1.0;
    r.propensity = 0.2 + 0.6 * u(rng);
    log.append(std::move(r));
  }
  return log;
}

inline Vector random_vector(std::mt19937_64& rng, Eigen::Index dim, double scale) {
  std::normal_distribution<double> n(0.0, scale);
  Vector v(dim);
  for (Eigen::Index j = 0; j < dim; ++j) v(j) = n(rng);
  return v;
}

}  // namespace robandit::testing
