#pragma once

#include <numbers>

namespace odaa::gaussian {

inline constexpr double kInvSqrt2Pi = 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;

/// Standard normal density.
[[nodiscard]] double pdf(double d) noexcept;

/// Standard normal distribution function, accurate in both tails.
[[nodiscard]] double cdf(double d) noexcept;

/// Upper tail 1 - cdf(d) without cancellation.
[[nodiscard]] double sf(double d) noexcept;

/// Density of N(mean, sd^2) at y. Requires sd > 0.
[[nodiscard]] double pdf(double y, double mean, double sd) noexcept;

}  // namespace odaa::gaussian
