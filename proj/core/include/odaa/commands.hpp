#pragma once

#include "odaa/config.hpp"
#include "odaa/errors.hpp"
#include "odaa/reachability.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>

namespace odaa {

/// Moments, Jarque-Bera statistics and regions of the configured return data.
/// Writes moments.csv, regions.csv, correlation.csv and moments.json.
void cmd_analyze(const RunConfig& cfg, std::ostream& log);

/// Fits the mixture to the configured moment targets (or to the data).
/// Writes model.json and fit.json.
void cmd_fit(const RunConfig& cfg, std::ostream& log);

/// Solves the reachability problem. Writes policy/stage_KKK.csv,
/// values/stage_KKK.csv and summary.json.
void cmd_solve(const RunConfig& cfg, std::ostream& log);

/// Efficient frontier plus max-success selection. Writes frontier.csv and markowitz.json.
void cmd_frontier(const RunConfig& cfg, std::ostream& log);

/// Monte Carlo of the solved policy (read back from policy/) or a static
/// allocation. Writes simulation.json and histogram.csv.
void cmd_simulate(const RunConfig& cfg, std::ostream& log);

/// Reads summary.json and markowitz.json and writes comparison.json / comparison.csv.
void cmd_compare(const RunConfig& cfg, std::ostream& log);

/// Dispatches by name and maps failures to exit codes, printing the message to err.
[[nodiscard]] int run_command(const std::string& name, const RunConfig& cfg, std::ostream& log, std::ostream& err);

/// Exit code for the exception currently being handled.
[[nodiscard]] int exit_code_for_current_exception(std::ostream& err);

/// Rebuilds a PolicyMap from the per-stage CSV exports in dir.
[[nodiscard]] PolicyMap load_policy(const std::filesystem::path& dir, int horizon, Eigen::Index assets);

}  // namespace odaa
