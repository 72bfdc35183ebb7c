#include "robandit/optimization.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "robandit/errors.hpp"

namespace robandit {

namespace {

constexpr double kReflect = 1.0;
constexpr double kExpand = 2.0;
constexpr double kContract = 0.5;
constexpr double kShrink = 0.5;

double finite_or_neg_inf(double value) {
  return std::isfinite(value) ? value : -std::numeric_limits<double>::infinity();
}

// Better = larger value, then lexicographically smaller point.
bool better(double value_a, const Vector& a, double value_b, const Vector& b) {
  if (value_a != value_b) return value_a > value_b;
  return lexicographic_less(a, b);
}

}  // namespace

void OptimizerConfig::validate() const {
  if (!(grid_radius > 0.0)) throw std::invalid_argument("grid_radius must be positive");
  if (grid_points_per_axis < 1) throw std::invalid_argument("grid_points_per_axis must be >= 1");
  if (nm_max_iters < 0) throw std::invalid_argument("nm_max_iters must be >= 0");
  if (!(nm_xatol > 0.0) || !(nm_fatol > 0.0)) {
    throw std::invalid_argument("Nelder-Mead tolerances must be positive");
  }
  if (!(nm_initial_step > 0.0)) throw std::invalid_argument("nm_initial_step must be positive");
  if (num_seeds < 1) throw std::invalid_argument("num_seeds must be >= 1");
}

bool lexicographic_less(const Vector& a, const Vector& b) {
  return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(),
                                      b.data() + b.size());
}

std::vector<Vector> make_grid(Eigen::Index dim, double radius, int points_per_axis) {
  if (dim < 1) throw std::invalid_argument("grid dimension must be >= 1");
  if (points_per_axis < 1) throw std::invalid_argument("points_per_axis must be >= 1");
  std::vector<double> axis(static_cast<std::size_t>(points_per_axis));
  if (points_per_axis == 1) {
    axis[0] = 0.0;
  } else {
    for (int k = 0; k < points_per_axis; ++k) {
      axis[static_cast<std::size_t>(k)] =
          -radius + 2.0 * radius * k / static_cast<double>(points_per_axis - 1);
    }
  }

  std::size_t total = 1;
  for (Eigen::Index j = 0; j < dim; ++j) total *= axis.size();
  std::vector<Vector> grid;
  grid.reserve(total);
  std::vector<std::size_t> index(static_cast<std::size_t>(dim), 0);
  for (std::size_t n = 0; n < total; ++n) {
    Vector point(dim);
    for (Eigen::Index j = 0; j < dim; ++j) point(j) = axis[index[static_cast<std::size_t>(j)]];
    grid.push_back(std::move(point));
    for (std::size_t j = index.size(); j-- > 0;) {
      if (++index[j] < axis.size()) break;
      index[j] = 0;
    }
  }
  return grid;
}

OptimizationResult nelder_mead_maximize(const Objective& objective, const Vector& start,
                                        const OptimizerConfig& config) {
  const Eigen::Index n = start.size();
  int evaluations = 0;
  // Minimize the negated objective.
  auto cost = [&](const Vector& x) {
    ++evaluations;
    return -finite_or_neg_inf(objective(x));
  };

  std::vector<Vector> simplex(static_cast<std::size_t>(n + 1), start);
  std::vector<double> costs(static_cast<std::size_t>(n + 1));
  for (Eigen::Index k = 0; k < n; ++k) {
    simplex[static_cast<std::size_t>(k + 1)](k) += config.nm_initial_step;
  }
  for (std::size_t k = 0; k < simplex.size(); ++k) costs[k] = cost(simplex[k]);

  std::vector<std::size_t> order(simplex.size());
  auto sort_simplex = [&]() {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return costs[a] < costs[b]; });
    std::vector<Vector> sorted_simplex;
    std::vector<double> sorted_costs;
    sorted_simplex.reserve(simplex.size());
    sorted_costs.reserve(simplex.size());
    for (std::size_t k : order) {
      sorted_simplex.push_back(std::move(simplex[k]));
      sorted_costs.push_back(costs[k]);
    }
    simplex = std::move(sorted_simplex);
    costs = std::move(sorted_costs);
  };

  const std::size_t worst = static_cast<std::size_t>(n);
  for (int iter = 0; iter < config.nm_max_iters; ++iter) {
    sort_simplex();

    double x_spread = 0.0;
    double f_spread = 0.0;
    for (std::size_t k = 1; k < simplex.size(); ++k) {
      x_spread = std::max(x_spread, (simplex[k] - simplex[0]).cwiseAbs().maxCoeff());
      f_spread = std::max(f_spread, std::abs(costs[k] - costs[0]));
    }
    if (x_spread <= config.nm_xatol && f_spread <= config.nm_fatol) break;

    Vector centroid = Vector::Zero(n);
    for (std::size_t k = 0; k < worst; ++k) centroid += simplex[k];
    centroid /= static_cast<double>(n);

    const Vector reflected = centroid + kReflect * (centroid - simplex[worst]);
    const double f_reflected = cost(reflected);

    if (f_reflected < costs[0]) {
      const Vector expanded = centroid + kReflect * kExpand * (centroid - simplex[worst]);
      const double f_expanded = cost(expanded);
      if (f_expanded < f_reflected) {
        simplex[worst] = expanded;
        costs[worst] = f_expanded;
      } else {
        simplex[worst] = reflected;
        costs[worst] = f_reflected;
      }
      continue;
    }
    if (f_reflected < costs[worst - 1]) {
      simplex[worst] = reflected;
      costs[worst] = f_reflected;
      continue;
    }

    bool accepted = false;
    if (f_reflected < costs[worst]) {
      const Vector outside = centroid + kContract * kReflect * (centroid - simplex[worst]);
      const double f_outside = cost(outside);
      if (f_outside <= f_reflected) {
        simplex[worst] = outside;
        costs[worst] = f_outside;
        accepted = true;
      }
    } else {
      const Vector inside = centroid - kContract * (centroid - simplex[worst]);
      const double f_inside = cost(inside);
      if (f_inside < costs[worst]) {
        simplex[worst] = inside;
        costs[worst] = f_inside;
        accepted = true;
      }
    }
    if (!accepted) {
      for (std::size_t k = 1; k < simplex.size(); ++k) {
        simplex[k] = simplex[0] + kShrink * (simplex[k] - simplex[0]);
        costs[k] = cost(simplex[k]);
      }
    }
  }
  sort_simplex();

  // Best vertex; equal-cost vertices resolve to the lexicographically smallest.
  std::size_t best = 0;
  for (std::size_t k = 1; k < simplex.size(); ++k) {
    if (costs[k] == costs[best] && lexicographic_less(simplex[k], simplex[best])) best = k;
  }
  return {simplex[best], -costs[best], evaluations};
}

OptimizationResult maximize_from_candidates(const Objective& objective,
                                            std::vector<Vector> candidates,
                                            const OptimizerConfig& config) {
  config.validate();
  if (candidates.empty()) throw std::invalid_argument("no candidate points");

  struct Scored {
    Vector point;
    double value;
  };
  std::vector<Scored> scored;
  scored.reserve(candidates.size());
  for (auto& candidate : candidates) {
    const double value = finite_or_neg_inf(objective(candidate));
    scored.push_back({std::move(candidate), value});
  }
  int evaluations = static_cast<int>(scored.size());
  std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
    return better(a.value, a.point, b.value, b.point);
  });
  if (!std::isfinite(scored.front().value)) {
    throw OptimizationFailed("objective is non-finite at every candidate point");
  }

  OptimizationResult best{scored.front().point, scored.front().value, 0};
  int seeds_used = 0;
  const Vector* previous_seed = nullptr;
  for (const auto& seed : scored) {
    if (seeds_used >= config.num_seeds || !std::isfinite(seed.value)) break;
    if (previous_seed != nullptr && seed.point == *previous_seed) continue;
    previous_seed = &seed.point;
    ++seeds_used;
    OptimizationResult refined = nelder_mead_maximize(objective, seed.point, config);
    evaluations += refined.evaluations;
    if (better(refined.value, refined.point, best.value, best.point)) {
      best.point = std::move(refined.point);
      best.value = refined.value;
    }
  }
  best.evaluations = evaluations;
  return best;
}

OptimizationResult maximize(const Objective& objective, Eigen::Index dim,
                            const OptimizerConfig& config) {
  config.validate();
  std::vector<Vector> candidates = make_grid(dim, config.grid_radius, config.grid_points_per_axis);
  if (config.warm_start) {
    if (config.warm_start->size() != dim) {
      throw std::invalid_argument("warm start has the wrong dimension");
    }
    candidates.push_back(*config.warm_start);
  }
  return maximize_from_candidates(objective, std::move(candidates), config);
}

double actor_norm_bound(double norm_cap, double lambda, std::optional<double> phi_squared,
                        double fallback) {
  if (!phi_squared || !(*phi_squared > 0.0) || !(lambda > 0.0)) return fallback;
  const double bound = std::sqrt(2.0 * norm_cap / (lambda * *phi_squared));
  return std::isfinite(bound) ? bound : fallback;
}

}  // namespace robandit
