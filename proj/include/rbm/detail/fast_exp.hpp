#pragma once

#include <bit>
#include <cstdint>

namespace rbm::detail {

// Branch-free exp for arguments <= 0, written so that GCC/Clang vectorize it
// inside the pair loops (libm exp is an opaque call and blocks that).
// Relative error is within ~2 ulp of std::exp on [-708, 0]; inputs below
// -708 are clamped, so the result never underflows to a denormal.
inline double exp_nonpositive(double x)
{
    constexpr double kLog2e = 1.4426950408889634;
    constexpr double kLn2Hi = 6.93147180369123816490e-01;
    constexpr double kLn2Lo = 1.90821492927058770002e-10;
    constexpr double kRound = 6755399441055744.0;  // 1.5 * 2^52

    x = x < -708.0 ? -708.0 : x;
    const double n = (x * kLog2e + kRound) - kRound;
    const double r = (x - n * kLn2Hi) - n * kLn2Lo;

    // Taylor polynomial of degree 12 on |r| <= ln(2)/2
    double q = 1.0 / 479001600.0;
    q = q * r + 1.0 / 39916800.0;
    q = q * r + 1.0 / 3628800.0;
    q = q * r + 1.0 / 362880.0;
    q = q * r + 1.0 / 40320.0;
    q = q * r + 1.0 / 5040.0;
    q = q * r + 1.0 / 720.0;
    q = q * r + 1.0 / 120.0;
    q = q * r + 1.0 / 24.0;
    q = q * r + 1.0 / 6.0;
    q = q * r + 0.5;
    q = q * r + 1.0;
    q = q * r + 1.0;

    const std::int64_t biased = (static_cast<std::int64_t>(n) + 1023) << 52;
    return q * std::bit_cast<double>(biased);
}

}  // namespace rbm::detail
