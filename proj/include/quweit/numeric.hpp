#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace quweit {

/// Round half to even (banker's rounding), pinned independently of the
/// floating-point environment.
inline long long round_half_even(double v) {
    const double fl = std::floor(v);
    const double frac = v - fl;
    if (frac > 0.5) return static_cast<long long>(fl) + 1;
    if (frac < 0.5) return static_cast<long long>(fl);
    const long long lo = static_cast<long long>(fl);
    return (lo % 2 == 0) ? lo : lo + 1;
}

/// Q8.8 signed fixed point used at the hardware boundary: 16-bit total,
/// 8 fraction bits.
namespace fixed {

constexpr int kFractionBits = 8;
constexpr double kScale = 256.0;
constexpr int32_t kMin = -32768;
constexpr int32_t kMax = 32767;

inline std::int16_t from_real(double v) {
    long long raw = round_half_even(v * kScale);
    if (raw < kMin) raw = kMin;
    if (raw > kMax) raw = kMax;
    return static_cast<std::int16_t>(raw);
}

inline double to_real(std::int16_t raw) { return static_cast<double>(raw) / kScale; }

inline bool representable(double v) {
    const double scaled = v * kScale;
    return scaled == std::floor(scaled) && scaled >= kMin && scaled <= kMax;
}

}  // namespace fixed
}  // namespace quweit
