#pragma once

#include "odaa/allocation.hpp"
#include "odaa/econometrics.hpp"
#include "odaa/mixture_model.hpp"
#include "odaa/reachability.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

namespace odaa {

/// Bin edges (n_bins + 1) and counts (n_bins).
struct Histogram {
    std::vector<double> edges;
    std::vector<long> counts;
};

struct SimulationResult {
    long n_paths = 0;
    long success_count = 0;
    double probability = 0.0;
    double standard_error = 0.0;  ///< sqrt(p (1 - p) / n)
    Histogram histogram;          ///< terminal portfolio values

    /// Normal-approximation interval p +/- z se, clipped to [0, 1].
    [[nodiscard]] std::pair<double, double> interval(double z = 1.959963984540054) const;
};

/// How a static allocation is held between periods.
enum class StaticMode {
    kConstantMix,  ///< rebalanced to the weights every period
    kBuyAndHold,   ///< bought once at k = 0 and left to drift
};

struct SimulationConfig {
    long n_paths = 1000000;
    std::uint64_t seed = 1;
    int threads = 1;
    int histogram_bins = 100;
    /// Histogram range; defaults to the observed min/max of terminal values.
    std::optional<std::pair<double, double>> histogram_range;
};

/// Seed of path `index`'s private stream (splitmix64 of seed and index).
[[nodiscard]] std::uint64_t path_seed(std::uint64_t seed, std::uint64_t index);

/// Paths x_{k+1} = x_k (1 + u_k(x_k)^T w_{k+1}) under the dynamic policy, looked up
/// with query_policy(). A path succeeds when x_k lies in X_k for every k = 1..N.
[[nodiscard]] SimulationResult simulate(const PolicyMap& policy, const MixtureModel& mm, const TargetSequence& ts,
                                        double x0, const SimulationConfig& cfg);

/// Same for one fixed allocation.
[[nodiscard]] SimulationResult simulate(const Eigen::VectorXd& allocation, const MixtureModel& mm,
                                        const TargetSequence& ts, double x0, const SimulationConfig& cfg,
                                        StaticMode mode = StaticMode::kConstantMix);

/// Three independent columns: Gamma(1, rho), 2 rho - Gamma(1, rho), Normal(rho, rho).
[[nodiscard]] ReturnSeries synthetic_three_asset(long n, double rho, std::uint64_t seed);

/// Equal-width bins over [lo, hi]; values outside fall into the edge bins.
[[nodiscard]] Histogram histogram(const std::vector<double>& values, int n_bins, double lo, double hi);

}  // namespace odaa
