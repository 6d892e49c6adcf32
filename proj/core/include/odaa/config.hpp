#pragma once

#include "odaa/allocation.hpp"
#include "odaa/mixture_model.hpp"
#include "odaa/reachability.hpp"
#include "odaa/simulation.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace odaa {

/// Target sets for stages [first, last].
struct TargetSpec {
    int first = 1;
    int last = 1;
    double lower = 0.0;
    double upper = kInfinity;
};

/// Parametric VaR budget: sigma_max (annual) = level sqrt(12 / months) / multiplier.
struct VarBudget {
    double level = 0.07;
    double horizon_months = 1.0;
    double multiplier = 2.3263;
};

struct RiskSpec {
    bool budget = true;
    bool long_only = true;
    std::optional<VarBudget> var;
    std::optional<double> sigma_max_annual;  ///< used when var is absent
    std::vector<double> lower_bounds;
    std::vector<double> upper_bounds;
    double risk_tolerance = 1e-6;
};

struct FrontierSpec {
    int n_points = 21;
    StaticMode mode = StaticMode::kConstantMix;
    bool annualize = true;  ///< frontier in annual ER/covariance units
};

struct SimulateSpec {
    bool dynamic = true;               ///< simulate the solved policy
    std::vector<double> allocation;    ///< static allocation when !dynamic
    StaticMode mode = StaticMode::kConstantMix;
};

/// Everything one run needs; loaded from a JSON document whose relative
/// paths resolve against the document's directory.
struct RunConfig {
    std::filesystem::path source;  ///< config file, empty when built in code

    std::optional<std::filesystem::path> prices;
    std::optional<std::filesystem::path> returns;
    std::optional<std::filesystem::path> model;
    std::optional<std::filesystem::path> moments;  ///< fit targets
    int periods_per_year = 52;

    int horizon = 1;
    double x0 = 1.0;
    std::vector<TargetSpec> targets;
    RiskSpec risk;
    SolverConfig solver;
    SimulationConfig monte_carlo;
    FitConfig fit;
    FrontierSpec frontier;
    SimulateSpec simulate;
    double confidence_level = 0.95;

    std::filesystem::path output = "out";
    int threads = 1;

    /// Expands the stage ranges into X_0..X_N (X_0 = {x0}). Throws InputError
    /// unless the ranges cover 1..N exactly once.
    [[nodiscard]] TargetSequence target_sequence() const;

    /// Constraint set with sigma_max converted to per-period units.
    [[nodiscard]] ConstraintSet constraints() const;

    /// Annual volatility cap, if any.
    [[nodiscard]] std::optional<double> sigma_max_annual() const;

    /// Pretty JSON; loading it back yields the same configuration.
    [[nodiscard]] std::string to_json() const;
};

[[nodiscard]] RunConfig config_from_json(const std::string& text, const std::filesystem::path& base_dir = {});
[[nodiscard]] RunConfig load_config(const std::filesystem::path& path);

}  // namespace odaa
