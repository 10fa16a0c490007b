#pragma once

#include <array>
#include <cmath>
#include <string>

#include "covlat/canonical.hpp"
#include "covlat/geometry.hpp"
#include "covlat/vector_field.hpp"

namespace covlat {

// ---------------------------------------------------------------------------
// Pointwise covariant-Hamiltonian quantities of the parametrized free scalar:
// the extended Lagrangian density over jet coordinates (x^mu, y, v_mu, u^a,
// u^a_mu), its Legendre data (covariant Hamiltonian, multimomenta, Piola
// stress tensor), the momentum-map density, and the consistency check that
// the slice pullback of the covariant momentum map reproduces the canonical
// co-momentum functional.
// ---------------------------------------------------------------------------

/// First-jet coordinates of the extended configuration bundle at one point.
/// du[a][mu] = u^a_mu; orientation requires det(du) > 0.
struct JetPoint {
    Vec2 x{};  // base coordinates
    double y = 0.0;
    Vec2 v{};  // multivelocities v_mu
    Vec2 u{};  // covariance-field value
    Mat2 du{}; // covariance-field jet u^a_mu

    double det_du() const { return du[0][0] * du[1][1] - du[0][1] * du[1][0]; }
};

/// Covariant Hamiltonian and multimomenta of the scalar model.
struct MultiMomenta {
    double p_tilde = 0.0;
    Vec2 p{};    // p^mu, conjugate to v_mu
    Mat2 rho{};  // rho[a][mu] = varrho_a^mu
    Mat2 piola{}; // T^{mu nu}
};

namespace detail {

struct PulledBackMetric {
    Mat2 G{};    // G_{mu nu} = u^a_mu u^b_nu eta_ab
    Mat2 Ginv{}; // G^{mu nu}
    double det = 0.0;
    double vol = 0.0; // sqrt(-det G)
};

inline PulledBackMetric pulled_back_metric(const Mat2& du) {
    const double det_du = du[0][0] * du[1][1] - du[0][1] * du[1][0];
    if (!(det_du > 0.0))
        throw Error("covariance-field jet must be orientation-preserving (det du = " +
                    std::to_string(det_du) + ")");
    PulledBackMetric r;
    for (int mu = 0; mu < 2; ++mu)
        for (int nu = 0; nu < 2; ++nu)
            r.G[mu][nu] = -du[0][mu] * du[0][nu] + du[1][mu] * du[1][nu];
    r.det = r.G[0][0] * r.G[1][1] - r.G[0][1] * r.G[1][0];
    if (!(r.det < 0.0))
        throw Error("degenerate pulled-back metric (det G = " + std::to_string(r.det) +
                    " must be negative)");
    r.vol = std::sqrt(-r.det);
    const double inv = 1.0 / r.det;
    r.Ginv[0][0] = r.G[1][1] * inv;
    r.Ginv[1][1] = r.G[0][0] * inv;
    r.Ginv[0][1] = -r.G[0][1] * inv;
    r.Ginv[1][0] = -r.G[1][0] * inv;
    return r;
}

} // namespace detail

/// Free-scalar extended Lagrangian density
///   L = -sqrt(-det G) (G^{mu nu} v_mu v_nu + m^2 y^2) / 2,
/// returned together with the pulled-back metric G.
inline std::pair<double, Mat2> scalar_lagrangian(const JetPoint& j, double m) {
    const auto pb = detail::pulled_back_metric(j.du);
    double grad2 = 0.0;
    for (int mu = 0; mu < 2; ++mu)
        for (int nu = 0; nu < 2; ++nu) grad2 += pb.Ginv[mu][nu] * j.v[mu] * j.v[nu];
    const double L = -pb.vol * (grad2 + m * m * j.y * j.y) / 2.0;
    return {L, pb.G};
}

/// Closed-form Legendre data:
///   p^mu   = dL/dv_mu = -sqrt(-det G) G^{mu nu} v_nu
///   T^{mu nu} = 2 dL/dG_{mu nu}
///             = sqrt(-det G) [ v^mu v^nu - G^{mu nu} (v.v + m^2 y^2) / 2 ]
///   rho_a^mu = T^{mu nu} u^b_nu g_ab
///   p_tilde  = L - p^mu v_mu - rho_a^mu u^a_mu.
inline MultiMomenta legendre(const JetPoint& j, double m) {
    const auto pb = detail::pulled_back_metric(j.du);
    MultiMomenta mm;
    Vec2 vup{};
    double vv = 0.0;
    for (int mu = 0; mu < 2; ++mu) {
        for (int nu = 0; nu < 2; ++nu) vup[mu] += pb.Ginv[mu][nu] * j.v[nu];
    }
    for (int mu = 0; mu < 2; ++mu) vv += vup[mu] * j.v[mu];
    for (int mu = 0; mu < 2; ++mu) mm.p[mu] = -pb.vol * vup[mu];
    const double trace = vv + m * m * j.y * j.y;
    for (int mu = 0; mu < 2; ++mu)
        for (int nu = 0; nu < 2; ++nu)
            mm.piola[mu][nu] = pb.vol * (vup[mu] * vup[nu] - pb.Ginv[mu][nu] * trace / 2.0);
    for (int a = 0; a < 2; ++a) {
        const double ga = (a == 0) ? -1.0 : 1.0;
        for (int mu = 0; mu < 2; ++mu) {
            double s = 0.0;
            for (int nu = 0; nu < 2; ++nu) s += mm.piola[mu][nu] * j.du[a][nu];
            mm.rho[a][mu] = ga * s;
        }
    }
    const double L = -pb.vol * trace / 2.0;
    double pv = 0.0, rdu = 0.0;
    for (int mu = 0; mu < 2; ++mu) pv += mm.p[mu] * j.v[mu];
    for (int a = 0; a < 2; ++a)
        for (int mu = 0; mu < 2; ++mu) rdu += mm.rho[a][mu] * j.du[a][mu];
    mm.p_tilde = L - pv - rdu;
    return mm;
}

/// Coefficients of the covariant momentum map contracted with xi at one jet
/// point: the d^n x_mu current (p_tilde xi^mu, the scalar lift has xi^A = 0)
/// and the antisymmetric two-form blocks used by the pullback check.
struct MomentumMapDensity {
    Vec2 current{};                 // p_tilde xi^mu
    Mat2 p_block{};                 // -p^mu xi^nu
    std::array<Mat2, 2> rho_block{}; // -rho_a^mu xi^nu
};

inline MomentumMapDensity momentum_map_density(const JetPoint&, const MultiMomenta& mm,
                                               const Vec2& xi_at_x) {
    MomentumMapDensity d;
    for (int mu = 0; mu < 2; ++mu) {
        d.current[mu] = mm.p_tilde * xi_at_x[mu];
        for (int nu = 0; nu < 2; ++nu) {
            d.p_block[mu][nu] = -mm.p[mu] * xi_at_x[nu];
            for (int a = 0; a < 2; ++a) d.rho_block[a][mu][nu] = -mm.rho[a][mu] * xi_at_x[nu];
        }
    }
    return d;
}

inline MomentumMapDensity momentum_map_density(const JetPoint& j, const MultiMomenta& mm,
                                               const SpacetimeVectorField& xi) {
    return momentum_map_density(j, mm, xi.value(j.x[0], j.x[1]));
}

/// Holonomic jet of the canonical state at one site, in the adapted chart
/// generated by xi: u^a_0 = xi^a(tau(x)), u^a_1 = tau'^a, with v_0 fixed by
/// inverting p^0 = Pi.  Requires xi transverse with positive lapse.
inline JetPoint holonomic_jet(const PhasePoint& state, const SliceGeometry& g,
                              std::span<const double> psi, const Vec2& xi_val, int i) {
    const auto iu = static_cast<std::size_t>(i);
    const double lapse = -mink_dot(xi_val, g.normal_up[iu]);
    if (!(lapse > 0.0))
        throw Error("holonomic_jet: generator has non-positive lapse at site " + std::to_string(i));
    JetPoint j;
    j.x = state.tau.point(i);
    j.y = state.phi[iu];
    j.u = j.x;
    j.du = {{{xi_val[0], g.tangent[iu][0]}, {xi_val[1], g.tangent[iu][1]}}};
    const auto pb = detail::pulled_back_metric(j.du);
    j.v[1] = psi[iu];
    j.v[0] = (-state.pi[iu] / pb.vol - pb.Ginv[0][1] * j.v[1]) / pb.Ginv[0][0];
    return j;
}

/// Pullback of the covariant momentum map to the slice versus the canonical
/// co-momentum value: integrates -(Pi phidot + P_a xi^a - L) over the slice
/// (the adapted-chart generator is (1,0), so phidot = v_0 and xi^0 = 1) and
/// returns the absolute difference from -H(xi).
inline double slice_pullback_check(const PhasePoint& state, const SpacetimeVectorField& xi,
                                   double m, const Lattice& lat) {
    state.validate(lat);
    const SliceGeometry g = slice_geometry(state.tau, lat);
    const std::vector<double> psi = central_derivative(state.phi, lat);
    std::vector<double> integrand(static_cast<std::size_t>(lat.n));
    for (int i = 0; i < lat.n; ++i) {
        const auto iu = static_cast<std::size_t>(i);
        const Vec2 xv = xi.value(state.tau.tau0[iu], state.tau.tau1[iu]);
        const JetPoint j = holonomic_jet(state, g, psi, xv, i);
        const double L = scalar_lagrangian(j, m).first;
        const double p_dot_xi = state.p[iu][0] * xv[0] + state.p[iu][1] * xv[1];
        integrand[iu] = -(state.pi[iu] * j.v[0] + p_dot_xi - L);
    }
    const double lhs = quadrature(integrand, lat);
    const double rhs = -comomentum(state, xi, m, lat).value;
    return std::abs(lhs - rhs);
}

} // namespace covlat
