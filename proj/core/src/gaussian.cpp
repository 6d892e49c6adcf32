#include "odaa/gaussian.hpp"

#include <cmath>

namespace odaa::gaussian {

double pdf(double d) noexcept { return kInvSqrt2Pi * std::exp(-0.5 * d * d); }

double cdf(double d) noexcept { return 0.5 * std::erfc(-d * std::numbers::sqrt2 * 0.5); }

double sf(double d) noexcept { return 0.5 * std::erfc(d * std::numbers::sqrt2 * 0.5); }

double pdf(double y, double mean, double sd) noexcept {
    const double d = (y - mean) / sd;
    return pdf(d) / sd;
}

}  // namespace odaa::gaussian
