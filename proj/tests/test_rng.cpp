#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "covlat/rng.hpp"

using namespace covlat;

TEST_CASE("philox4x32-10 known answers") {
    // reference vectors of the published keyed block function
    const auto z = Philox4x32::block({0, 0, 0, 0}, {0, 0});
    CHECK(z[0] == 0x6627e8d5u);
    CHECK(z[1] == 0xe169c58du);
    CHECK(z[2] == 0xbc57ac4cu);
    CHECK(z[3] == 0x9b00dbd8u);

    const auto f = Philox4x32::block({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                                     {0xffffffffu, 0xffffffffu});
    CHECK(f[0] == 0x408f276du);
    CHECK(f[1] == 0x41c83b0eu);
    CHECK(f[2] == 0xa20bc7c6u);
    CHECK(f[3] == 0x6d5451fdu);

    const auto p = Philox4x32::block({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                                     {0xa4093822u, 0x299f31d0u});
    CHECK(p[0] == 0xd16cfe09u);
    CHECK(p[1] == 0x94fdccebu);
    CHECK(p[2] == 0x5001e420u);
    CHECK(p[3] == 0x24126ea1u);
}

TEST_CASE("streams are deterministic and independent") {
    Philox4x32 a(1234, 0), b(1234, 0), c(1234, 1), d(4321, 0);
    bool all_equal_c = true, all_equal_d = true;
    for (int i = 0; i < 1000; ++i) {
        const auto va = a.next_u32();
        CHECK(va == b.next_u32());
        all_equal_c = all_equal_c && (va == c.next_u32());
        all_equal_d = all_equal_d && (va == d.next_u32());
    }
    CHECK_FALSE(all_equal_c);
    CHECK_FALSE(all_equal_d);
}

TEST_CASE("uniform and normal moments") {
    Philox4x32 rng(777, 3);
    const int N = 200000;
    double su = 0, su2 = 0, sn = 0, sn2 = 0, sn4 = 0;
    for (int i = 0; i < N; ++i) {
        const double u = rng.uniform01();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        su += u;
        su2 += u * u;
        const double z = rng.normal();
        sn += z;
        sn2 += z * z;
        sn4 += z * z * z * z;
    }
    const double mu = su / N;
    const double var_u = su2 / N - mu * mu;
    CHECK(std::abs(mu - 0.5) < 0.005);
    CHECK(std::abs(var_u - 1.0 / 12) < 0.005);
    CHECK(std::abs(sn / N) < 0.01);
    CHECK(std::abs(sn2 / N - 1.0) < 0.02);
    CHECK(std::abs(sn4 / N - 3.0) < 0.1); // Gaussian kurtosis
}

TEST_CASE("open-below uniform never returns zero under log") {
    Philox4x32 rng(5, 9);
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.uniform01_open_below();
        CHECK(u > 0.0);
        CHECK(u <= 1.0);
        CHECK(std::isfinite(std::log(u)));
    }
}
