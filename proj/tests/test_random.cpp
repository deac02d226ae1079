#include "doctest.h"

#include "tkdv/random.hpp"

#include <cmath>
#include <set>

using namespace tkdv;

TEST_CASE("Philox4x32-10 known answers") {
    using A4 = std::array<std::uint32_t, 4>;
    CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) == A4{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
    CHECK(philox4x32({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}) ==
          A4{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
    CHECK(philox4x32({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}) ==
          A4{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("streams are reproducible and distinct") {
    CounterRng a(42, Stream::jitter, 7, 3), b(42, Stream::jitter, 7, 3);
    for (int i = 0; i < 100; ++i) CHECK(a.normal() == b.normal());

    std::set<double> firsts;
    for (std::uint64_t major : {0ull, 1ull, 1ull << 33})
        for (std::uint64_t minor : {0ull, 1ull, 1ull << 33})
            for (auto s : {Stream::jitter, Stream::resample, Stream::prior})
                firsts.insert(CounterRng(42, s, major, minor).uniform());
    CHECK(firsts.size() == 27);
    CHECK(CounterRng(1, Stream::prior, 0).uniform() != CounterRng(2, Stream::prior, 0).uniform());
}

TEST_CASE("uniform and normal moments") {
    CounterRng rng(5, Stream::toy_process, 0);
    const int n = 200000;
    double su = 0, sz = 0, szz = 0, sz4 = 0;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        CHECK_UNARY(u > 0.0);
        CHECK_UNARY(u < 1.0);
        su += u;
    }
    for (int i = 0; i < n; ++i) {
        const double z = rng.normal();
        sz += z;
        szz += z * z;
        sz4 += z * z * z * z;
    }
    CHECK(su / n == doctest::Approx(0.5).epsilon(0.01));
    CHECK(std::abs(sz / n) < 0.01);
    CHECK(szz / n == doctest::Approx(1.0).epsilon(0.01));
    CHECK(sz4 / n == doctest::Approx(3.0).epsilon(0.03));
}
