#pragma once

// Derivative-free maximizer for the actor objective: grid seeding followed by
// Nelder-Mead from the best few grid points.

#include <functional>
#include <optional>
#include <vector>

#include "robandit/policy_core.hpp"

namespace robandit {

struct OptimizerConfig {
  double grid_radius = 5.0;
  int grid_points_per_axis = 3;
  int nm_max_iters = 2000;
  double nm_xatol = 1e-6;
  double nm_fatol = 1e-10;
  /// Edge length of the initial Nelder-Mead simplex around each seed.
  double nm_initial_step = 0.5;
  int num_seeds = 3;
  std::optional<Vector> warm_start;

  void validate() const;
};

using Objective = std::function<double(const Vector&)>;

struct OptimizationResult {
  Vector point;
  double value = 0.0;
  int evaluations = 0;
};

/// Lexicographic ordering of equal-length vectors; breaks value ties.
bool lexicographic_less(const Vector& a, const Vector& b);

/// Regular grid on [-radius, radius]^dim with `points_per_axis` points per axis.
/// A single point per axis yields the origin.
std::vector<Vector> make_grid(Eigen::Index dim, double radius, int points_per_axis);

/// Nelder-Mead (reflection 1, expansion 2, contraction 0.5, shrink 0.5)
/// maximizing `objective` from `start`. Non-finite values count as -inf.
OptimizationResult nelder_mead_maximize(const Objective& objective, const Vector& start,
                                        const OptimizerConfig& config);

/// Evaluates every candidate, refines the best `config.num_seeds` of them with
/// Nelder-Mead and returns the overall best point. The result does not depend
/// on the order of `candidates`. Throws OptimizationFailed when every
/// candidate evaluates to a non-finite value.
OptimizationResult maximize_from_candidates(const Objective& objective,
                                            std::vector<Vector> candidates,
                                            const OptimizerConfig& config);

/// Grid over [-grid_radius, grid_radius]^dim plus the optional warm start,
/// then maximize_from_candidates.
OptimizationResult maximize(const Objective& objective, Eigen::Index dim,
                            const OptimizerConfig& config);

/// Radius sqrt(2C / (lambda phi^2)) bounding every maximizer of the actor
/// objective, or `fallback` when phi^2 is unavailable or the bound is not finite.
double actor_norm_bound(double norm_cap, double lambda, std::optional<double> phi_squared,
                        double fallback = 5.0);

}  // namespace robandit
