#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "covlat/geometry.hpp"
#include "support.hpp"

using namespace covlat;
using namespace covlat::testing;

namespace {

Embedding tilted_slice(const Lattice& lat, double amp = 0.5) {
    std::vector<double> t0(static_cast<std::size_t>(lat.n));
    for (int i = 0; i < lat.n; ++i)
        t0[static_cast<std::size_t>(i)] = amp * std::sin(lat.sites[static_cast<std::size_t>(i)]);
    return {std::move(t0), lat.sites};
}
} // namespace

TEST_CASE("identity slice geometry") {
    const Lattice lat(64);
    const auto g = slice_geometry(Embedding::identity(lat), lat);
    for (int i = 0; i < lat.n; ++i) {
        const auto iu = static_cast<std::size_t>(i);
        CHECK(g.q11[iu] == Catch::Approx(1.0));
        CHECK(g.normal_up[iu][0] == Catch::Approx(1.0));
        CHECK(g.normal_up[iu][1] == Catch::Approx(0.0).margin(1e-15));
        CHECK(g.normal_down[iu][0] == Catch::Approx(-1.0));
    }
}

TEST_CASE("tilted slice matches the closed form with the stencil factor") {
    const Lattice lat(64);
    const auto g = slice_geometry(tilted_slice(lat), lat);
    const double s = std::sin(lat.spacing) / lat.spacing;
    // at x = 0 (site 0): tau' = (0.5 s, 1)
    const double a = 0.5 * s;
    const double q = 1.0 - a * a;
    CHECK(g.q11[0] == Catch::Approx(q).margin(1e-14));
    CHECK(g.normal_up[0][0] == Catch::Approx(1.0 / std::sqrt(q)).margin(1e-14));
    CHECK(g.normal_up[0][1] == Catch::Approx(a / std::sqrt(q)).margin(1e-14));
    // continuum values 0.75 and (1.15470, 0.57735) are approached as n grows
    const Lattice fine(1024);
    const auto gf = slice_geometry(tilted_slice(fine), fine);
    CHECK(gf.q11[0] == Catch::Approx(0.75).margin(1e-5));
    CHECK(gf.normal_up[0][0] == Catch::Approx(1.15470).margin(1e-4));
    CHECK(gf.normal_up[0][1] == Catch::Approx(0.57735).margin(1e-4));
}

TEST_CASE("normal normalization, orthogonality, orientation") {
    const Lattice lat(64);
    Philox4x32 rng(5, 0);
    for (int trial = 0; trial < 25; ++trial) {
        const PhasePoint st = random_state(rng, lat);
        const auto g = slice_geometry(st.tau, lat);
        for (int i = 0; i < lat.n; ++i) {
            const auto iu = static_cast<std::size_t>(i);
            CHECK(std::abs(mink_dot(g.normal_up[iu], g.normal_up[iu]) + 1.0) < 1e-12);
            CHECK(std::abs(mink_dot(g.normal_up[iu], g.tangent[iu])) < 1e-12);
            CHECK(g.normal_up[iu][0] > 0.0);
        }
    }
}

TEST_CASE("timelike data is rejected") {
    const Lattice lat(64);
    // tau1 constant: tau'^1 vanishes away from the seam while tau'^0 is order
    // one, so Q11 <= 0 and construction fails
    std::vector<double> t0(64), t1(64, 0.0);
    for (int i = 0; i < 64; ++i)
        t0[static_cast<std::size_t>(i)] = 2.0 * std::sin(lat.sites[static_cast<std::size_t>(i)]);
    CHECK_THROWS_AS(slice_geometry(Embedding{t0, t1}, lat), GeometryError);
    // super-luminal tilt of a winding slice fails as well
    std::vector<double> steep(64);
    for (int i = 0; i < 64; ++i)
        steep[static_cast<std::size_t>(i)] = 3.0 * std::sin(lat.sites[static_cast<std::size_t>(i)]);
    CHECK_THROWS_AS(slice_geometry(Embedding{steep, lat.sites}, lat), GeometryError);
    try {
        slice_geometry(Embedding{steep, lat.sites}, lat);
    } catch (const GeometryError& e) {
        CHECK(e.site() >= 0); // offending site index is reported
    }
}

TEST_CASE("lapse/shift decomposition") {
    const Lattice lat(64);
    SECTION("pure normal on the identity slice") {
        const auto xi = SpacetimeVectorField::parse("1", "0");
        const auto [N, N1] = decompose_lapse_shift(xi, Embedding::identity(lat), lat);
        for (double v : N) CHECK(v == Catch::Approx(1.0));
        for (double v : N1) CHECK(std::abs(v) < 1e-14);
    }
    SECTION("pure tangent on the identity slice") {
        const auto xi = SpacetimeVectorField::parse("0", "1");
        const auto [N, N1] = decompose_lapse_shift(xi, Embedding::identity(lat), lat);
        for (double v : N) CHECK(std::abs(v) < 1e-14);
        for (double v : N1) CHECK(v == Catch::Approx(1.0));
    }
    SECTION("tilted slice closed form at x = 0") {
        const Lattice fine(2048);
        const auto xi = SpacetimeVectorField::parse("1", "0");
        const auto [N, N1] = decompose_lapse_shift(xi, tilted_slice(fine), fine);
        CHECK(N[0] == Catch::Approx(1.0 / std::sqrt(0.75)).margin(1e-5));
        CHECK(N1[0] == Catch::Approx(-0.5 / 0.75).margin(1e-5));
    }
}

TEST_CASE("reconstruction property") {
    const Lattice lat(64);
    Philox4x32 rng(6, 0);
    const auto xi = SpacetimeVectorField::parse("1 + 0.3*cos(x) + 0.1*sin(t)", "0.4*sin(x)*cos(t)");
    for (int trial = 0; trial < 25; ++trial) {
        const PhasePoint st = random_state(rng, lat);
        const auto g = slice_geometry(st.tau, lat);
        const auto [N, N1] = decompose_lapse_shift(xi, st.tau, lat);
        for (int i = 0; i < lat.n; ++i) {
            const auto iu = static_cast<std::size_t>(i);
            const Vec2 v = xi.value(st.tau.tau0[iu], st.tau.tau1[iu]);
            for (int mu = 0; mu < 2; ++mu) {
                const double rec = N[iu] * g.normal_up[iu][mu] + N1[iu] * g.tangent[iu][mu];
                CHECK(std::abs(rec - v[mu]) < 1e-12);
            }
        }
    }
}

TEST_CASE("pushforward of spatial fields") {
    const Lattice lat(64);
    SECTION("zero field") {
        const auto out =
            pushforward_spatial(std::vector<double>(64, 0.0), Embedding::identity(lat), lat);
        for (const auto& v : out) {
            CHECK(v[0] == 0.0);
            CHECK(v[1] == 0.0);
        }
    }
    SECTION("unit tangent on the identity slice") {
        const auto out =
            pushforward_spatial(std::vector<double>(64, 1.0), Embedding::identity(lat), lat);
        for (const auto& v : out) {
            CHECK(std::abs(v[0]) < 1e-15);
            CHECK(v[1] == Catch::Approx(1.0));
        }
    }
    SECTION("tilted slice at x = 0") {
        std::vector<double> zeta(64);
        for (int i = 0; i < 64; ++i)
            zeta[static_cast<std::size_t>(i)] = std::cos(lat.sites[static_cast<std::size_t>(i)]);
        const auto out = pushforward_spatial(zeta, tilted_slice(lat), lat);
        const double s = std::sin(lat.spacing) / lat.spacing;
        CHECK(out[0][0] == Catch::Approx(0.5 * s).margin(1e-14)); // tau'^0(0) zeta(0)
        CHECK(out[0][1] == Catch::Approx(1.0));
    }
    SECTION("pushforward has no normal part") {
        Philox4x32 rng(7, 0);
        for (int trial = 0; trial < 10; ++trial) {
            const PhasePoint st = random_state(rng, lat);
            const auto g = slice_geometry(st.tau, lat);
            std::vector<double> zeta(64);
            for (auto& z : zeta) z = rng.normal();
            const auto out = pushforward_spatial(zeta, st.tau, lat);
            for (int i = 0; i < lat.n; ++i) {
                const auto iu = static_cast<std::size_t>(i);
                const double N = -mink_dot(out[iu], g.normal_up[iu]);
                CHECK(std::abs(N) < 1e-12);
            }
        }
    }
}

TEST_CASE("local temperature") {
    const Lattice lat(32);
    const Embedding id = Embedding::identity(lat);
    SECTION("unit flow") {
        const auto T = local_temperature(SpacetimeVectorField::parse("1", "0"), id, lat);
        for (double v : T) CHECK(v == Catch::Approx(1.0));
    }
    SECTION("global rescale") {
        const auto T = local_temperature(SpacetimeVectorField::parse("2", "0"), id, lat);
        for (double v : T) CHECK(v == Catch::Approx(0.5));
    }
    SECTION("null flow keeps a finite Euclidean temperature") {
        const auto T = local_temperature(SpacetimeVectorField::parse("1", "1"), id, lat);
        for (double v : T) CHECK(v == Catch::Approx(1.0 / std::sqrt(2.0)));
    }
    SECTION("vanishing generator is an error") {
        CHECK_THROWS_AS(local_temperature(SpacetimeVectorField::parse("0", "0"), id, lat),
                        GeometryError);
    }
}

TEST_CASE("winding derivative of the embedding") {
    const Lattice lat(32);
    // tau1 = x + 0.2 sin x: tangent 1 + 0.2 cos(x) s at every site, seam included
    std::vector<double> t0(32, 0.0), t1(32);
    for (int i = 0; i < 32; ++i) {
        const double x = lat.sites[static_cast<std::size_t>(i)];
        t1[static_cast<std::size_t>(i)] = x + 0.2 * std::sin(x);
    }
    const Embedding tau{t0, t1};
    const auto tp = tau.tangent(lat);
    const double s = std::sin(lat.spacing) / lat.spacing;
    for (int i = 0; i < 32; ++i) {
        const auto iu = static_cast<std::size_t>(i);
        CHECK(tp[iu][1] == Catch::Approx(1.0 + 0.2 * std::cos(lat.sites[iu]) * s).margin(1e-13));
    }
}

TEST_CASE("vector field periodicity validation") {
    CHECK_THROWS_AS(SpacetimeVectorField::parse("x", "0"), Error);
    CHECK_NOTHROW(SpacetimeVectorField::parse("sin(x)", "cos(2*x) + t"));
}
