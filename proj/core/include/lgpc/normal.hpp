#pragma once

#include <cmath>
#include <numbers>

namespace lgpc {

inline constexpr double kInvSqrt2Pi = 0.3989422804014327;  // 1/sqrt(2*pi)

[[nodiscard]] inline double norm_pdf(double x) noexcept {
    return kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

[[nodiscard]] inline double norm_cdf(double x) noexcept {
    return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

/// Standard normal quantile; p must lie in (0,1).
[[nodiscard]] double norm_quantile(double p);

}  // namespace lgpc
