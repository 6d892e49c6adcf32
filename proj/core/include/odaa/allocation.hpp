#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace odaa {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Closed interval [lower, upper]; upper may be +infinity.
struct Interval {
    double lower = 0.0;
    double upper = kInfinity;

    [[nodiscard]] bool contains(double x) const { return x >= lower && x <= upper; }
    [[nodiscard]] bool upward_unbounded() const { return upper == kInfinity; }
};

/// Target sets X_0..X_N on portfolio value.
struct TargetSequence {
    std::vector<Interval> sets;  ///< N + 1 entries

    [[nodiscard]] int horizon() const { return static_cast<int>(sets.size()) - 1; }
    [[nodiscard]] const Interval& at(int k) const { return sets.at(static_cast<std::size_t>(k)); }

    /// X_0 = {x0}, X_1..X_{N-1} = [0, inf), X_N = [terminal_lower, inf).
    [[nodiscard]] static TargetSequence terminal_goal(int horizon, double terminal_lower, double x0 = 1.0);

    /// Throws InputError unless N >= 1, every set is nonempty with lower >= 0, and x0 lies in X_0.
    void validate(double x0) const;
};

/// Feasible allocation set U_k.
struct ConstraintSet {
    bool budget = true;     ///< weights sum to one
    bool long_only = true;  ///< no short positions
    std::optional<double> sigma_max;  ///< per-period volatility cap; disabled when empty
    std::vector<double> lower_bounds;  ///< optional per-asset bounds
    std::vector<double> upper_bounds;
    double risk_tolerance = 1e-6;  ///< slack on the volatility cap

    [[nodiscard]] double lower(Eigen::Index j) const;
    [[nodiscard]] double upper(Eigen::Index j) const;

    /// Checks every constraint against `risk_cov` within `tol` (budget/bounds) and risk_tolerance (volatility).
    [[nodiscard]] bool admits(const Eigen::VectorXd& u, const Eigen::MatrixXd& risk_cov, double tol = 1e-8) const;

    /// Human-readable list of the constraints u violates; empty when feasible.
    [[nodiscard]] std::string violations(const Eigen::VectorXd& u, const Eigen::MatrixXd& risk_cov,
                                         double tol = 1e-8) const;
};

/// Point of an integer allocation lattice: weight_j = units_j / resolution.
using LatticeKey = std::vector<int>;

/// Enumerates feasible allocations on regular weight lattices.
///
/// All lattices share one base resolution (e.g. 1000 units = 0.1% steps) so
/// points from coarse and refinement rounds compare exactly.
class AllocationLattice {
public:
    AllocationLattice(ConstraintSet cs, Eigen::MatrixXd risk_cov, int resolution);

    [[nodiscard]] Eigen::Index assets() const { return risk_cov_.rows(); }
    [[nodiscard]] int resolution() const { return resolution_; }
    [[nodiscard]] const ConstraintSet& constraints() const { return cs_; }
    [[nodiscard]] const Eigen::MatrixXd& risk_covariance() const { return risk_cov_; }

    [[nodiscard]] Eigen::VectorXd weights(const LatticeKey& key) const;
    [[nodiscard]] double variance(const LatticeKey& key) const;
    [[nodiscard]] bool feasible(const LatticeKey& key) const;

    /// Every feasible point whose units are multiples of step_units.
    [[nodiscard]] std::vector<LatticeKey> grid(int step_units) const;

    /// Feasible points at step_units spacing within radius_units (per coordinate) of center.
    [[nodiscard]] std::vector<LatticeKey> neighborhood(const LatticeKey& center, int step_units,
                                                       int radius_units) const;

    /// Converts a weight step (e.g. 0.025) into lattice units; throws unless it divides the resolution.
    [[nodiscard]] int units_for(double step) const;

    /// Explains why grid(step_units) is empty.
    [[nodiscard]] std::string diagnose_empty(int step_units) const;

private:
    void enumerate(std::vector<LatticeKey>& out, LatticeKey& cur, Eigen::Index j, int remaining,
                   const std::vector<int>& lo, const std::vector<int>& hi, int step) const;

    ConstraintSet cs_;
    Eigen::MatrixXd risk_cov_;
    int resolution_;
    std::vector<int> lo_units_;
    std::vector<int> hi_units_;
};

/// One evaluated candidate in an allocation search.
struct Candidate {
    LatticeKey key;
    double value = 0.0;
    double variance = 0.0;
};

/// Selection rule shared by the solver and its oracles: among candidates whose
/// value lies within tie_tolerance of the best, take the smallest variance, then
/// the lexicographically smallest key. Returns the index into `cands`.
[[nodiscard]] std::size_t select_candidate(const std::vector<Candidate>& cands, double tie_tolerance);

}  // namespace odaa
