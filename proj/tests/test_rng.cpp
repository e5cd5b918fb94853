#include <doctest.h>

#include <cmath>
#include <vector>
#include <set>

#include "rbm/detail/fast_exp.hpp"
#include "rbm/rng.hpp"

using namespace rbm;

TEST_CASE("philox4x32-10 known-answer vectors")
{
    // Published Random123 test vectors
    CHECK(philox::block({0, 0, 0, 0}, {0, 0}) ==
          philox::Counter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
    CHECK(philox::block({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                        {0xffffffffu, 0xffffffffu}) ==
          philox::Counter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
    CHECK(philox::block({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                        {0xa4093822u, 0x299f31d0u}) ==
          philox::Counter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("streams are reproducible and keyed by every id component")
{
    const StreamId id{StreamPurpose::Partition, 3, 7};
    RngStream a(42, id), b(42, id);
    for (int i = 0; i < 100; ++i) CHECK(a() == b());

    std::set<std::uint64_t> firsts;
    firsts.insert(RngStream(42, id)());
    firsts.insert(RngStream(43, id)());
    firsts.insert(RngStream(42, {StreamPurpose::Noise, 3, 7})());
    firsts.insert(RngStream(42, {StreamPurpose::Partition, 4, 7})());
    firsts.insert(RngStream(42, {StreamPurpose::Partition, 3, 8})());
    firsts.insert(RngStream(1ull << 40, id)());
    CHECK(firsts.size() == 6);
}

TEST_CASE("sequential draws walk the blocks in order")
{
    RngStream s(5, {StreamPurpose::Sampling, 1, 2});
    const RngStream ref(5, {StreamPurpose::Sampling, 1, 2});
    for (std::uint32_t blk = 0; blk < 4; ++blk) {
        const auto c = ref.block(blk);
        CHECK(s() == (std::uint64_t{c[0]} | std::uint64_t{c[1]} << 32));
        CHECK(s() == (std::uint64_t{c[2]} | std::uint64_t{c[3]} << 32));
    }
}

TEST_CASE("uniform and normal moments")
{
    RngStream s(11, {StreamPurpose::Sampling, 0, 0});
    const int n = 200000;
    double su = 0, su2 = 0, sz = 0, sz2 = 0, sz4 = 0;
    for (int i = 0; i < n; ++i) {
        const double u = s.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        su += u;
        su2 += u * u;
        const double z = s.normal();
        sz += z;
        sz2 += z * z;
        sz4 += z * z * z * z;
    }
    // 5 sigma bands
    CHECK(std::abs(su / n - 0.5) < 5 * std::sqrt(1.0 / 12 / n));
    CHECK(std::abs(su2 / n - 1.0 / 3) < 5 * std::sqrt(4.0 / 45 / n));
    CHECK(std::abs(sz / n) < 5 / std::sqrt(double(n)));
    CHECK(std::abs(sz2 / n - 1.0) < 5 * std::sqrt(2.0 / n));
    CHECK(std::abs(sz4 / n - 3.0) < 5 * std::sqrt(96.0 / n));
}

TEST_CASE("bounded integers are uniform")
{
    RngStream s(3, {StreamPurpose::Sampling, 0, 0});
    const int n = 60000, bound = 6;
    std::vector<int> counts(bound, 0);
    for (int i = 0; i < n; ++i) {
        const auto v = s.below(bound);
        REQUIRE(v < std::uint64_t(bound));
        ++counts[v];
    }
    double stat = 0;
    for (int c : counts) stat += (c - 10000.0) * (c - 10000.0) / 10000.0;
    CHECK(stat < 20.515);  // chi-square, 5 dof, 0.001
    CHECK(s.below(1) == 0);
}

TEST_CASE("box-muller stays finite on extreme words")
{
    for (std::uint64_t a : {0ull, ~0ull}) {
        for (std::uint64_t b : {0ull, ~0ull}) {
            const auto z = RngStream::box_muller(a, b);
            CHECK(std::isfinite(z[0]));
            CHECK(std::isfinite(z[1]));
        }
    }
}

TEST_CASE("vectorizable exp matches libm")
{
    double worst = 0.0;
    for (int i = 0; i <= 200000; ++i) {
        const double x = -708.0 * i / 200000.0;
        const double want = std::exp(x);
        worst = std::max(worst, std::abs(detail::exp_nonpositive(x) - want) / want);
    }
    CHECK(worst < 1e-15);
    CHECK(detail::exp_nonpositive(0.0) == 1.0);
    CHECK(detail::exp_nonpositive(-1e6) > 0.0);
    CHECK(detail::exp_nonpositive(-1e6) == doctest::Approx(std::exp(-708.0)));
}
