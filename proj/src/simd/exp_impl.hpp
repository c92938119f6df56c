#pragma once

// Shared constants for the deterministic exp used by every SIMD variant.

namespace aggdiff::simd::detail {

inline constexpr double kLog2e = 1.4426950408889634;
// Cody-Waite split of ln 2 (the high part has trailing zero bits so n * kLn2Hi is exact).
inline constexpr double kLn2Hi = 6.93147180369123816490e-01;
inline constexpr double kLn2Lo = 1.90821492927058770002e-10;
inline constexpr double kExpUnderflow = -708.0;

// Taylor coefficients 1/k!, k = 13 down to 2; |r| <= ln2/2 keeps the
// truncation error below 1e-17.
inline constexpr double kExpCoeff[] = {
    1.0 / 6227020800.0, 1.0 / 479001600.0, 1.0 / 39916800.0, 1.0 / 3628800.0,
    1.0 / 362880.0,     1.0 / 40320.0,     1.0 / 5040.0,     1.0 / 720.0,
    1.0 / 120.0,        1.0 / 24.0,        1.0 / 6.0,        1.0 / 2.0,
};

}  // namespace aggdiff::simd::detail
