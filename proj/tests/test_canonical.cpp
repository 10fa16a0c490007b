#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "covlat/canonical.hpp"
#include "support.hpp"

using namespace covlat;
using namespace covlat::testing;

namespace {
constexpr double pi = std::numbers::pi;

double stencil(const Lattice& lat) { return std::sin(lat.spacing) / lat.spacing; }

PhasePoint sine_state(const Lattice& lat) {
    PhasePoint st = PhasePoint::vacuum(lat);
    for (int i = 0; i < lat.n; ++i)
        st.phi[static_cast<std::size_t>(i)] = std::sin(lat.sites[static_cast<std::size_t>(i)]);
    return st;
}

/// Central finite difference of a smeared value with respect to one site
/// value, step scaled by the state magnitude.
template <class Build, class Mutate>
double fd_of_value(const PhasePoint& st, Build build, Mutate mutate, double scale) {
    const double h = 1e-6 * std::max(1.0, scale);
    PhasePoint sp = st, sm = st;
    mutate(sp, +h);
    mutate(sm, -h);
    return (build(sp) - build(sm)) / (2 * h);
}

double state_scale(const PhasePoint& st) {
    double s = 1.0;
    for (double v : st.phi) s = std::max(s, std::abs(v));
    for (double v : st.pi) s = std::max(s, std::abs(v));
    for (double v : st.tau.tau0) s = std::max(s, std::abs(v));
    for (const auto& v : st.p) s = std::max({s, std::abs(v[0]), std::abs(v[1])});
    return s;
}

} // namespace

TEST_CASE("constraint densities") {
    const Lattice lat(64);
    SECTION("vacuum vanishes") {
        const auto [hp, hq] = constraint_densities(PhasePoint::vacuum(lat), 1.0, lat);
        for (double v : hp) CHECK(v == 0.0);
        for (double v : hq) CHECK(v == 0.0);
    }
    SECTION("sine field on the identity slice") {
        const auto [hp, hq] = constraint_densities(sine_state(lat), 0.0, lat);
        const double s = stencil(lat);
        for (int i = 0; i < lat.n; ++i) {
            const double c = std::cos(lat.sites[static_cast<std::size_t>(i)]);
            CHECK(hp[static_cast<std::size_t>(i)] == Catch::Approx(c * c * s * s / 2).margin(1e-14));
            CHECK(hq[static_cast<std::size_t>(i)] == 0.0);
        }
    }
    SECTION("pure kinetic density") {
        PhasePoint st = PhasePoint::vacuum(lat);
        st.pi.assign(st.pi.size(), 1.0);
        const auto [hp, hq] = constraint_densities(st, 0.0, lat);
        for (double v : hp) CHECK(v == Catch::Approx(0.5));
        for (double v : hq) CHECK(v == 0.0);
    }
}

TEST_CASE("full constraints") {
    const Lattice lat(64);
    SECTION("vacuum with constant P is linear in P") {
        PhasePoint st = PhasePoint::vacuum(lat);
        st.p.assign(st.p.size(), Vec2{1.0, 0.0});
        const auto h = full_constraints(st, 1.0, lat);
        for (const auto& v : h) {
            CHECK(v[0] == Catch::Approx(1.0));
            CHECK(v[1] == 0.0);
        }
    }
    SECTION("sine field: H_0 is the transverse density on the flat slice") {
        const auto h = full_constraints(sine_state(lat), 0.0, lat);
        const auto [hp, hq] = constraint_densities(sine_state(lat), 0.0, lat);
        for (int i = 0; i < lat.n; ++i) {
            const auto iu = static_cast<std::size_t>(i);
            CHECK(h[iu][0] == Catch::Approx(hp[iu]).margin(1e-14));
            CHECK(std::abs(h[iu][1]) < 1e-14);
        }
    }
    SECTION("decomposition identity sitewise") {
        Philox4x32 rng(41, 0);
        const auto xi =
            SpacetimeVectorField::parse("1 + 0.3*cos(x) - 0.2*sin(t)", "0.5*sin(x)*cos(t)");
        for (int trial = 0; trial < 20; ++trial) {
            const PhasePoint st = random_state(rng, lat);
            const auto h = full_constraints(st, 0.8, lat);
            const auto [hp, hq] = constraint_densities(st, 0.8, lat);
            const auto [N, N1] = decompose_lapse_shift(xi, st.tau, lat);
            for (int i = 0; i < lat.n; ++i) {
                const auto iu = static_cast<std::size_t>(i);
                const Vec2 v = xi.value(st.tau.tau0[iu], st.tau.tau1[iu]);
                const double lhs = v[0] * (h[iu][0] - st.p[iu][0]) + v[1] * (h[iu][1] - st.p[iu][1]);
                const double rhs = N[iu] * hp[iu] + N1[iu] * hq[iu];
                CHECK(std::abs(lhs - rhs) < 1e-12 * std::max(1.0, std::abs(rhs)));
            }
        }
    }
}

TEST_CASE("comomentum values") {
    const Lattice lat(64);
    SECTION("on-shell point gives zero") {
        PhasePoint st = sine_state(lat);
        // set P = -Hphi so that H = 0
        const auto h = full_constraints(st, 0.0, lat);
        for (std::size_t i = 0; i < st.p.size(); ++i)
            st.p[i] = {st.p[i][0] - h[i][0], st.p[i][1] - h[i][1]};
        const auto xi = SpacetimeVectorField::parse("1 + 0.1*cos(x)", "0.2*sin(x)");
        CHECK(std::abs(comomentum(st, xi, 0.0, lat).value) < 1e-13);
    }
    SECTION("closed-form lattice sum for the sine field") {
        const auto xi = SpacetimeVectorField::parse("1", "0");
        const double s = stencil(lat);
        const SmearedFunctional H = comomentum(sine_state(lat), xi, 0.0, lat);
        CHECK(H.value == Catch::Approx(pi / 2 * s * s).margin(1e-13));
        CHECK(comomentum_value(sine_state(lat), xi, 0.0, lat) == Catch::Approx(H.value));
    }
    SECTION("linearity in xi") {
        Philox4x32 rng(43, 0);
        const auto xi = SpacetimeVectorField::parse("1 + 0.2*cos(x)", "0.1*sin(x)");
        const auto xi2 = SpacetimeVectorField::parse("2*(1 + 0.2*cos(x))", "2*(0.1*sin(x))");
        for (int trial = 0; trial < 10; ++trial) {
            const PhasePoint st = random_state(rng, lat);
            CHECK(comomentum(st, xi2, 1.0, lat).value ==
                  Catch::Approx(2.0 * comomentum(st, xi, 1.0, lat).value));
        }
    }
}

TEST_CASE("gradient fidelity of smeared functionals") {
    const Lattice lat(16);
    Philox4x32 rng(47, 0);
    const double m = 0.8;
    const auto xi =
        SpacetimeVectorField::parse("1 + 0.3*cos(x) + 0.2*sin(t)", "0.4*sin(x) + 0.1*cos(t)");
    std::vector<double> Nf(static_cast<std::size_t>(lat.n)), N1f(Nf.size()), zf(Nf.size());
    for (int i = 0; i < lat.n; ++i) {
        const double x = lat.sites[static_cast<std::size_t>(i)];
        Nf[static_cast<std::size_t>(i)] = 1.0 + 0.4 * std::cos(x);
        N1f[static_cast<std::size_t>(i)] = 0.3 * std::sin(2 * x);
        zf[static_cast<std::size_t>(i)] = 0.7 + 0.2 * std::cos(x);
    }

    using Builder = std::function<SmearedFunctional(const PhasePoint&)>;
    const std::vector<std::pair<std::string, Builder>> builders = {
        {"comomentum", [&](const PhasePoint& s) { return comomentum(s, xi, m, lat); }},
        {"smear_lapse", [&](const PhasePoint& s) { return smear_lapse(s, Nf, m, lat); }},
        {"smear_shift", [&](const PhasePoint& s) { return smear_shift(s, N1f, m, lat); }},
        {"spatial_momentum_map",
         [&](const PhasePoint& s) { return spatial_momentum_map(s, zf, m, lat); }},
    };

    for (const auto& [name, build] : builders) {
        INFO("functional: " << name);
        int states_checked = 0;
        for (int trial = 0; trial < 50; ++trial) {
            const PhasePoint st = random_state(rng, lat);
            const SmearedFunctional F = build(st);
            const double scale = state_scale(st);
            auto value = [&](const PhasePoint& s) { return build(s).value; };
            for (int i = 0; i < lat.n; i += 3) {
                const auto iu = static_cast<std::size_t>(i);
                const double fd_phi = fd_of_value(
                    st, value, [&](PhasePoint& s, double h) { s.phi[iu] += h; }, scale);
                CHECK(std::abs(F.grad_phi[iu] - fd_phi) <=
                      1e-6 * std::max(1.0, std::abs(F.grad_phi[iu])));
                const double fd_pi = fd_of_value(
                    st, value, [&](PhasePoint& s, double h) { s.pi[iu] += h; }, scale);
                CHECK(std::abs(F.grad_pi[iu] - fd_pi) <=
                      1e-6 * std::max(1.0, std::abs(F.grad_pi[iu])));
                const double fd_t0 = fd_of_value(
                    st, value, [&](PhasePoint& s, double h) { s.tau.tau0[iu] += h; }, scale);
                CHECK(std::abs(F.grad_tau[iu][0] - fd_t0) <=
                      1e-6 * std::max(1.0, std::abs(F.grad_tau[iu][0])));
                const double fd_t1 = fd_of_value(
                    st, value, [&](PhasePoint& s, double h) { s.tau.tau1[iu] += h; }, scale);
                CHECK(std::abs(F.grad_tau[iu][1] - fd_t1) <=
                      1e-6 * std::max(1.0, std::abs(F.grad_tau[iu][1])));
                for (int mu = 0; mu < 2; ++mu) {
                    const double fd_p = fd_of_value(
                        st, value, [&](PhasePoint& s, double h) { s.p[iu][mu] += h; }, scale);
                    CHECK(std::abs(F.grad_p[iu][mu] - fd_p) <=
                          1e-6 * std::max(1.0, std::abs(F.grad_p[iu][mu])));
                }
            }
            ++states_checked;
        }
        CHECK(states_checked == 50);
    }
}

TEST_CASE("poisson bracket basics") {
    const Lattice lat(32);
    Philox4x32 rng(53, 0);
    const PhasePoint st = random_state(rng, lat);
    const auto xi = SpacetimeVectorField::parse("1 + 0.2*cos(x)", "0.1*sin(x)");
    const SmearedFunctional F = comomentum(st, xi, 1.0, lat);

    SECTION("antisymmetry: {F, F} = 0") { CHECK(poisson_bracket(F, F, lat) == 0.0); }

    SECTION("canonical pair of smeared coordinates") {
        // F = integral f phi, G = integral g Pi -> {F, G} = integral f g
        std::vector<double> f(static_cast<std::size_t>(lat.n)), g(f.size());
        for (int i = 0; i < lat.n; ++i) {
            const double x = lat.sites[static_cast<std::size_t>(i)];
            f[static_cast<std::size_t>(i)] = std::cos(x);
            g[static_cast<std::size_t>(i)] = 1.0 + std::sin(2 * x);
        }
        SmearedFunctional Ff, Gg;
        Ff.state_token = Gg.state_token = st.token();
        const auto n = static_cast<std::size_t>(lat.n);
        Ff.grad_phi.assign(n, 0.0);
        Ff.grad_pi.assign(n, 0.0);
        Ff.grad_tau.assign(n, Vec2{0, 0});
        Ff.grad_p.assign(n, Vec2{0, 0});
        Gg = Ff;
        double fg = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            Ff.grad_phi[i] = f[i] * lat.spacing;
            Gg.grad_pi[i] = g[i] * lat.spacing;
            fg += f[i] * g[i] * lat.spacing;
        }
        CHECK(poisson_bracket(Ff, Gg, lat) == Catch::Approx(fg).margin(1e-13));
        CHECK(poisson_bracket(Gg, Ff, lat) == Catch::Approx(-fg).margin(1e-13));
    }

    SECTION("bilinearity") {
        const auto zeta = SpacetimeVectorField::parse("0.5*sin(x)", "1 - 0.3*cos(x)");
        const SmearedFunctional G = comomentum(st, zeta, 1.0, lat);
        const SmearedFunctional HN = smear_lapse(
            st, std::vector<double>(static_cast<std::size_t>(lat.n), 1.0), 1.0, lat);
        // {F, aG + bH} = a{F,G} + b{F,H}; build the combination by hand
        SmearedFunctional comb = G;
        for (std::size_t i = 0; i < comb.grad_phi.size(); ++i) {
            comb.grad_phi[i] = 2.0 * G.grad_phi[i] - 0.5 * HN.grad_phi[i];
            comb.grad_pi[i] = 2.0 * G.grad_pi[i] - 0.5 * HN.grad_pi[i];
            for (int mu = 0; mu < 2; ++mu) {
                comb.grad_tau[i][mu] = 2.0 * G.grad_tau[i][mu] - 0.5 * HN.grad_tau[i][mu];
                comb.grad_p[i][mu] = 2.0 * G.grad_p[i][mu] - 0.5 * HN.grad_p[i][mu];
            }
        }
        CHECK(poisson_bracket(F, comb, lat) ==
              Catch::Approx(2.0 * poisson_bracket(F, G, lat) - 0.5 * poisson_bracket(F, HN, lat))
                  .margin(1e-12));
    }

    SECTION("mismatched states are rejected") {
        const PhasePoint other = random_state(rng, lat);
        const SmearedFunctional G = comomentum(other, xi, 1.0, lat);
        CHECK_THROWS_AS(poisson_bracket(F, G, lat), Error);
    }

    SECTION("constant commuting fields close to O(dx^2)") {
        const auto e0 = SpacetimeVectorField::parse("1", "0");
        const auto e1 = SpacetimeVectorField::parse("0", "1");
        const SmearedFunctional A = comomentum(st, e0, 1.0, lat);
        const SmearedFunctional B = comomentum(st, e1, 1.0, lat);
        CHECK(std::abs(poisson_bracket(A, B, lat)) < lat.spacing * lat.spacing);
    }
}

TEST_CASE("dirac algebra verifier") {
    SECTION("equal shifts annihilate the first residual") {
        const Lattice lat(32);
        Philox4x32 rng(59, 0);
        const PhasePoint st = random_state(rng, lat);
        std::vector<double> Nv(static_cast<std::size_t>(lat.n)), M(Nv.size()), N(Nv.size());
        for (int i = 0; i < lat.n; ++i) {
            const double x = lat.sites[static_cast<std::size_t>(i)];
            Nv[static_cast<std::size_t>(i)] = std::sin(x);
            N[static_cast<std::size_t>(i)] = 1.0;
            M[static_cast<std::size_t>(i)] = std::cos(x);
        }
        const auto r = verify_dirac_algebra(st, N, M, Nv, Nv, 1.0, lat);
        CHECK(r[0] < 1e-12);
    }
    SECTION("constant lapses annihilate the third residual") {
        const Lattice lat(32);
        Philox4x32 rng(61, 0);
        const PhasePoint st = random_state(rng, lat);
        const std::vector<double> N(static_cast<std::size_t>(lat.n), 1.0);
        const std::vector<double> M(static_cast<std::size_t>(lat.n), 0.7);
        std::vector<double> Nv(N.size()), Mv(N.size());
        for (int i = 0; i < lat.n; ++i) {
            const double x = lat.sites[static_cast<std::size_t>(i)];
            Nv[static_cast<std::size_t>(i)] = std::sin(x);
            Mv[static_cast<std::size_t>(i)] = std::cos(2 * x);
        }
        const auto r = verify_dirac_algebra(st, N, M, Nv, Mv, 1.0, lat);
        CHECK(r[2] < 1e-12);
    }
    SECTION("degenerate fixture: all pairings vanish at Pi = 0, P = 0") {
        // identity slice, phi = sin x, Pi = 0, m = 0, N = 1, M = cos x: both
        // {H[N], H[M]} and H[K] are identically zero on the lattice
        const Lattice lat(64);
        const PhasePoint st = sine_state(lat);
        std::vector<double> N(static_cast<std::size_t>(lat.n), 1.0), M(N.size()), Z(N.size(), 0.0);
        for (int i = 0; i < lat.n; ++i)
            M[static_cast<std::size_t>(i)] = std::cos(lat.sites[static_cast<std::size_t>(i)]);
        const auto r = verify_dirac_algebra(st, N, M, Z, Z, 0.0, lat);
        CHECK(r[2] < 1e-14);
    }
    SECTION("residuals decay at second order on smooth off-shell states") {
        Philox4x32 rng(67, 0);
        const SmoothStateSpec spec = random_state_spec(rng);
        std::vector<double> ns = {32, 64, 128, 256};
        std::vector<std::vector<double>> errs(3);
        for (double nd : ns) {
            const Lattice lat(static_cast<int>(nd));
            const PhasePoint st = spec.realize(lat);
            std::vector<double> N(static_cast<std::size_t>(lat.n), 1.0), M(N.size()), Nv(N.size()),
                Mv(N.size());
            for (int i = 0; i < lat.n; ++i) {
                const double x = lat.sites[static_cast<std::size_t>(i)];
                M[static_cast<std::size_t>(i)] = std::cos(x);
                Nv[static_cast<std::size_t>(i)] = std::sin(x);
                Mv[static_cast<std::size_t>(i)] = std::cos(2 * x);
            }
            const auto r = verify_dirac_algebra(st, N, M, Nv, Mv, 1.0, lat);
            for (int k = 0; k < 3; ++k) errs[static_cast<std::size_t>(k)].push_back(r[static_cast<std::size_t>(k)]);
        }
        for (int k = 0; k < 3; ++k) {
            const double order = fitted_order(ns, errs[static_cast<std::size_t>(k)]);
            INFO("residual " << k << " order " << order);
            CHECK(order > 1.7);
            CHECK(order < 2.3);
        }
    }
}

TEST_CASE("equivariance verifier") {
    SECTION("equal generators give an exact zero") {
        const Lattice lat(32);
        Philox4x32 rng(71, 0);
        const PhasePoint st = random_state(rng, lat);
        const auto xi = SpacetimeVectorField::parse("1 + 0.2*cos(x)", "0.1*sin(x)");
        CHECK(verify_equivariance(st, xi, xi, 1.0, lat) < 1e-12);
    }
    SECTION("constant fields commute within the O(dx^2) bound") {
        // the periodic stencil sums telescope, so the residual is in fact
        // roundoff-level at every n, well inside the O(dx^2) bound
        Philox4x32 rng(73, 0);
        const SmoothStateSpec spec = random_state_spec(rng);
        const auto xi = SpacetimeVectorField::parse("1", "0");
        const auto zeta = SpacetimeVectorField::parse("0", "1");
        for (int n : {32, 64, 128, 256}) {
            const Lattice lat(n);
            const double r = verify_equivariance(spec.realize(lat), xi, zeta, 1.0, lat);
            CHECK(r < lat.spacing * lat.spacing);
            CHECK(r < 1e-13);
        }
    }
    SECTION("time-dependent pair from the spec example") {
        // commutator of (1,0) and (0.1 t, 0) is (0.1, 0)
        const auto xi = SpacetimeVectorField::parse("1", "0");
        const auto zeta = SpacetimeVectorField::parse("0.1*t", "0");
        const auto v = lie_bracket_values(xi, zeta, 0.3, 1.2);
        CHECK(v.xi[0] == Catch::Approx(0.1));
        CHECK(v.xi[1] == 0.0);
        Philox4x32 rng(79, 0);
        const SmoothStateSpec spec = random_state_spec(rng);
        std::vector<double> ns = {32, 64, 128, 256}, errs;
        for (double nd : ns) {
            const Lattice lat(static_cast<int>(nd));
            errs.push_back(verify_equivariance(spec.realize(lat), xi, zeta, 1.0, lat));
        }
        const double order = fitted_order(ns, errs);
        CHECK(order > 1.7);
        CHECK(order < 2.3);
    }
}

TEST_CASE("spatial momentum map") {
    const Lattice lat(64);
    SECTION("zero smearing") {
        Philox4x32 rng(83, 0);
        const PhasePoint st = random_state(rng, lat);
        CHECK(spatial_momentum_map(st, std::vector<double>(64, 0.0), 1.0, lat).value == 0.0);
    }
    SECTION("closed-form lattice sum") {
        PhasePoint st = sine_state(lat);
        for (int i = 0; i < lat.n; ++i)
            st.pi[static_cast<std::size_t>(i)] = std::cos(lat.sites[static_cast<std::size_t>(i)]);
        const double s = stencil(lat);
        const auto J = spatial_momentum_map(st, std::vector<double>(64, 1.0), 0.0, lat);
        CHECK(J.value == Catch::Approx(-pi * s).margin(1e-12));
    }
    SECTION("pairs with the pushforward co-momentum as J(zeta) = -H(tau_* zeta)") {
        Philox4x32 rng(89, 0);
        for (int trial = 0; trial < 100; ++trial) {
            const PhasePoint st = random_state(rng, lat);
            std::vector<double> zeta(static_cast<std::size_t>(lat.n));
            for (auto& z : zeta) z = rng.normal();
            const double a = spatial_momentum_map(st, zeta, 1.0, lat).value;
            const double b = comomentum_pushforward(st, zeta, 1.0, lat).value;
            CHECK(std::abs(a + b) <= 1e-12 * std::max(1.0, std::abs(b)));
        }
    }
}
