#pragma once

#include "odaa/allocation.hpp"
#include "odaa/mixture_model.hpp"
#include "odaa/simulation.hpp"

#include <Eigen/Dense>

#include <vector>

namespace odaa {

struct FrontierPoint {
    double target_return = 0.0;
    Eigen::VectorXd allocation;
    double variance = 0.0;
};

struct ReturnRange {
    double r_min = 0.0;  ///< return of the global minimum-variance feasible portfolio
    double r_max = 0.0;  ///< largest feasible expected return
};

/// Minimizes u^T sigma u subject to u^T mu = r_bar and the constraint set.
///
/// Budget and per-asset bounds are handled exactly by enumerating active
/// bound sets and solving each equality-constrained KKT system; the
/// volatility cap, when present, is checked on the result. Throws InputError
/// with the feasible range when r_bar cannot be attained.
[[nodiscard]] FrontierPoint min_variance_for_target(const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma,
                                                    double r_bar, const ConstraintSet& cs);

[[nodiscard]] ReturnRange feasible_return_range(const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma,
                                                const ConstraintSet& cs);

/// n_points targets evenly spaced over [r_min, r_max].
[[nodiscard]] std::vector<FrontierPoint> efficient_frontier(const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma,
                                                            const ConstraintSet& cs, int n_points);

struct SelectionResult {
    std::size_t index = 0;  ///< position in the frontier
    Eigen::VectorXd allocation;
    double probability = 0.0;
    double standard_error = 0.0;
    std::vector<double> probabilities;  ///< one per frontier point
};

/// Simulates every frontier allocation as a static policy and keeps the one
/// with the highest success probability (first one on ties).
[[nodiscard]] SelectionResult select_max_success(const std::vector<FrontierPoint>& frontier, const MixtureModel& mm,
                                                 const TargetSequence& ts, double x0, const SimulationConfig& cfg,
                                                 StaticMode mode = StaticMode::kConstantMix);

}  // namespace odaa
