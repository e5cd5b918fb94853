#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace rbm {

//---------------------------------------------------------------------------//
/*!
 * Philox4x32-10 block function (Salmon et al., "Parallel random numbers: as
 * easy as 1, 2, 3", SC 2011). Maps a 128-bit counter and 64-bit key to 128
 * pseudo-random bits; no state.
 */
namespace philox {

using Counter = std::array<std::uint32_t, 4>;
using Key = std::array<std::uint32_t, 2>;

inline constexpr std::uint32_t kMul0 = 0xD2511F53u;
inline constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
inline constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
inline constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

constexpr Counter round(const Counter& c, const Key& k)
{
    const std::uint64_t p0 = std::uint64_t{kMul0} * c[0];
    const std::uint64_t p1 = std::uint64_t{kMul1} * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
}

constexpr Counter block(Counter c, Key k)
{
    for (int r = 0; r < 10; ++r) {
        if (r > 0) {
            k[0] += kWeyl0;
            k[1] += kWeyl1;
        }
        c = round(c, k);
    }
    return c;
}

}  // namespace philox

/// Purpose tags keep the streams used for different random quantities apart.
enum class StreamPurpose : std::uint32_t {
    Partition = 1,
    Noise = 2,
    Initial = 3,
    Weights = 4,
    Sampling = 5,
};

struct StreamId {
    StreamPurpose purpose = StreamPurpose::Sampling;
    std::uint32_t realization = 0;
    std::uint32_t step = 0;
};

//---------------------------------------------------------------------------//
/*!
 * Counter-based random stream keyed by (master seed, purpose, realization,
 * step). Two streams with the same key produce the same sequence regardless
 * of which thread draws them or in which order; distinct keys give
 * independent sequences.
 *
 * Satisfies UniformRandomBitGenerator.
 */
class RngStream {
  public:
    using result_type = std::uint64_t;

    RngStream(std::uint64_t master_seed, StreamId id)
        : key_{static_cast<std::uint32_t>(master_seed),
               static_cast<std::uint32_t>(master_seed >> 32)},
          id_(id)
    {
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max()
    {
        return std::numeric_limits<result_type>::max();
    }

    StreamId id() const { return id_; }

    /// 128 random bits for block `index` of this stream (random access).
    philox::Counter block(std::uint32_t index) const
    {
        return philox::block({index, id_.step, id_.realization,
                              static_cast<std::uint32_t>(id_.purpose)},
                             key_);
    }

    result_type operator()()
    {
        if (lane_ == 2) {
            buffer_ = block(next_block_++);
            lane_ = 0;
        }
        const std::uint64_t lo = buffer_[2 * lane_];
        const std::uint64_t hi = buffer_[2 * lane_ + 1];
        ++lane_;
        return lo | (hi << 32);
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return to_unit((*this)()); }

    /// Uniform integer in [0, bound) by Lemire's multiply-and-reject method.
    std::uint64_t below(std::uint64_t bound)
    {
        __uint128_t m = static_cast<__uint128_t>((*this)()) * bound;
        auto low = static_cast<std::uint64_t>(m);
        if (low < bound) {
            const std::uint64_t threshold = (0 - bound) % bound;
            while (low < threshold) {
                m = static_cast<__uint128_t>((*this)()) * bound;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    double normal()
    {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const auto [z0, z1] = box_muller((*this)(), (*this)());
        spare_ = z1;
        has_spare_ = true;
        return z0;
    }

    static double to_unit(std::uint64_t bits)
    {
        return static_cast<double>(bits >> 11) * 0x1.0p-53;
    }

    /// Two independent standard normals from two 64-bit words.
    static std::array<double, 2> box_muller(std::uint64_t a, std::uint64_t b)
    {
        // u1 in (0, 1] keeps the logarithm finite
        const double u1 = (static_cast<double>(a >> 11) + 1.0) * 0x1.0p-53;
        const double u2 = to_unit(b);
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        return {radius * std::cos(angle), radius * std::sin(angle)};
    }

  private:
    philox::Key key_;
    StreamId id_;
    std::uint32_t next_block_ = 0;
    philox::Counter buffer_{};
    int lane_ = 2;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace rbm
