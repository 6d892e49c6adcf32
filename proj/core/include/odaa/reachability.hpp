#pragma once

#include "odaa/allocation.hpp"
#include "odaa/mixture_model.hpp"

#include <Eigen/Dense>

#include <memory>
#include <optional>
#include <vector>

namespace odaa {

/// Log-uniform grid of portfolio values.
class StateGrid {
public:
    StateGrid(double lo, double hi, int size);

    [[nodiscard]] int size() const { return static_cast<int>(nodes_.size()); }
    [[nodiscard]] double lo() const { return nodes_.front(); }
    [[nodiscard]] double hi() const { return nodes_.back(); }
    [[nodiscard]] double log_step() const { return log_step_; }
    [[nodiscard]] double node(int i) const { return nodes_[static_cast<std::size_t>(i)]; }
    [[nodiscard]] const std::vector<double>& nodes() const { return nodes_; }

    /// Nearest node in log distance, clamped to the grid.
    [[nodiscard]] int nearest(double x) const;
    /// Index i with node(i) <= x < node(i+1); -1 below the grid, size()-1 at or above hi.
    [[nodiscard]] int segment(double x) const;

    /// Same node count and log spacing, every node multiplied by factor.
    [[nodiscard]] StateGrid scaled(double factor) const;

private:
    std::vector<double> nodes_;
    double log_step_;
};

/// J_k sampled at the grid nodes; piecewise linear in between, 0 below the
/// grid and constant (the top node value) above it.
struct ValueFunction {
    int stage = 0;
    std::shared_ptr<const StateGrid> grid;
    std::vector<double> values;

    [[nodiscard]] double operator()(double x) const;
};

/// Per-stage optimal allocations u_k(x) at every node of the stage grid.
struct PolicyMap {
    std::vector<std::shared_ptr<const StateGrid>> grids;  ///< stage k -> grid
    std::vector<Eigen::MatrixXd> allocations;             ///< stage k -> (grid size x m)

    [[nodiscard]] int horizon() const { return static_cast<int>(allocations.size()); }
    [[nodiscard]] Eigen::Index assets() const { return allocations.empty() ? 0 : allocations.front().cols(); }
};

struct SolverConfig {
    int grid_size = 1200;
    double grid_lo = 0.4;
    double grid_hi = 2.5;
    double coarse_step = 0.025;
    std::vector<double> refine_steps{0.005, 0.001};
    double truncation_sd = 8.0;
    double tie_tolerance = 1e-9;
    int threads = 1;
    /// Per-period growth g of the state grid: stage k uses the base grid times
    /// (1 + g)^k, so an allocation earning g maps nodes onto nodes. Defaults to
    /// the mean return of the minimum-variance lattice allocation.
    std::optional<double> drift;
    /// Adjust the log step so the finite terminal bound falls on a node.
    bool align_target = true;

    void validate() const;
};

struct SolveResult {
    PolicyMap policy;
    std::vector<ValueFunction> values;  ///< J_0 .. J_N
    double p_star = 0.0;
    double drift = 0.0;  ///< grid growth actually used
    double seconds = 0.0;
    long evaluations = 0;  ///< stage-value evaluations across all stages
};

struct NodeOptimum {
    Eigen::VectorXd allocation;
    double value = 0.0;
};

struct PolicyQuery {
    Eigen::VectorXd allocation;
    int node = 0;
    bool clamped = false;  ///< x fell outside the grid
};

/// J_N(x) = 1 on X_N, 0 elsewhere, at every node.
[[nodiscard]] ValueFunction terminal_values(std::shared_ptr<const StateGrid> grid, const Interval& target);

/// Integral over X_next of J_next(z) against the law of z = x (1 + u^T w),
/// evaluated in closed form per grid segment and mixture component (Gaussian
/// CDF/PDF), truncated at +/- truncation_sd component standard deviations.
[[nodiscard]] double stage_value(double x, const Eigen::VectorXd& u, const ValueFunction& next,
                                 const Interval& next_target, const MixtureModel& mm,
                                 double truncation_sd = 8.0);

/// Best allocation at one state: coarse lattice enumeration, then local
/// refinement rounds, with the deterministic tie-break of select_candidate().
[[nodiscard]] NodeOptimum optimize_stage_node(double x, const ValueFunction& next, const Interval& next_target,
                                              const ConstraintSet& cs, const MixtureModel& mm,
                                              const SolverConfig& cfg);

/// Backward recursion J_N .. J_0 and the optimal Markov policy; p_star = J_0(x0).
[[nodiscard]] SolveResult solve(const TargetSequence& ts, const ConstraintSet& cs, const MixtureModel& mm,
                                double x0, const SolverConfig& cfg);

/// Allocation stored at the node nearest to x (no interpolation).
[[nodiscard]] PolicyQuery query_policy(const PolicyMap& pm, int stage, double x);

/// Annualized volatility cap from a parametric VaR: var * sqrt(12 / months) / multiplier.
[[nodiscard]] double var_to_sigma_max(double var_level, double horizon_months, double confidence_multiplier);

/// Converts an annual volatility to a per-period one by sqrt-time scaling.
[[nodiscard]] double per_period_sigma(double annual_sigma, int periods_per_year);

}  // namespace odaa
