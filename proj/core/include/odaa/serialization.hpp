#pragma once

#include "odaa/econometrics.hpp"
#include "odaa/mixture_model.hpp"

#include <filesystem>
#include <string>

namespace odaa {

/// JSON text for a mixture: labels, weights, and per-component mean and covariance.
[[nodiscard]] std::string mixture_to_json(const MixtureModel& mm, int periods_per_year = 52);

/// Accepts components given as {mean, cov} or as {mean, sd, corr}; a top-level
/// "corr" applies to every component that has "sd" but no "corr".
[[nodiscard]] MixtureModel mixture_from_json(const std::string& text);

[[nodiscard]] MixtureModel load_mixture(const std::filesystem::path& path);
void save_mixture(const std::filesystem::path& path, const MixtureModel& mm, int periods_per_year = 52);

/// Moment table as JSON; "scale" is "per_period" or "annual".
[[nodiscard]] std::string moments_to_json(const MomentSummary& ms);

/// Reads a moment table. SD may be omitted when "cov" is present and vice
/// versa; "corr" defaults to the identity.
[[nodiscard]] MomentSummary moments_from_json(const std::string& text);

[[nodiscard]] MomentSummary load_moments(const std::filesystem::path& path);

[[nodiscard]] std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace odaa
