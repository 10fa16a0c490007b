#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "covlat/geometry.hpp"
#include "covlat/hash.hpp"
#include "covlat/lattice.hpp"
#include "covlat/vector_field.hpp"

namespace covlat {

// ---------------------------------------------------------------------------
// Canonical parametrized phase space (phi, Pi, tau, P) on the lattice and the
// smeared-functional machinery: constraint densities, the co-momentum map
// H(xi) = integral xi^mu(tau(x)) (Hphi_mu + P_mu), exact functional gradients
// over all four sectors, the lattice Poisson bracket, and numerical verifiers
// for the hypersurface-deformation algebra and diffeomorphism equivariance.
//
// Densities for the free scalar of mass m:
//   Hperp = (Pi^2 + phi'^2) / (2 sqrt(Q11)) + sqrt(Q11) m^2 phi^2 / 2
//   Hpar  = Pi phi'
//   Hphi_mu = -n_mu Hperp + (tau'_mu / Q11) Hpar
// so that xi^mu Hphi_mu = N Hperp + N1 Hpar for any lapse/shift split of xi.
// ---------------------------------------------------------------------------

/// Full parametrized canonical state on the lattice.
struct PhasePoint {
    std::vector<double> phi; // scalar field
    std::vector<double> pi;  // conjugate momentum density
    Embedding tau;           // spacelike embedding
    std::vector<Vec2> p;     // embedding momentum density P_mu

    int size() const { return static_cast<int>(phi.size()); }

    void validate(const Lattice& lat) const {
        check_length(phi, lat, "PhasePoint.phi");
        check_length(pi, lat, "PhasePoint.pi");
        check_length(tau.tau0, lat, "PhasePoint.tau");
        if (static_cast<int>(p.size()) != lat.n) throw Error("PhasePoint.p: length mismatch");
    }

    /// Identity token: gradients evaluated at one state must not be mixed with
    /// another state's in a bracket.
    std::uint64_t token() const {
        std::uint64_t h = 0xcbf29ce484222325ull;
        h = fnv1a64_span(std::span<const double>(phi), h);
        h = fnv1a64_span(std::span<const double>(pi), h);
        h = fnv1a64_span(std::span<const double>(tau.tau0), h);
        h = fnv1a64_span(std::span<const double>(tau.tau1), h);
        h = fnv1a64(p.data(), p.size() * sizeof(Vec2), h);
        return h;
    }

    static PhasePoint vacuum(const Lattice& lat, double t0 = 0.0) {
        PhasePoint s;
        s.phi.assign(static_cast<std::size_t>(lat.n), 0.0);
        s.pi.assign(static_cast<std::size_t>(lat.n), 0.0);
        s.tau = Embedding::identity(lat, t0);
        s.p.assign(static_cast<std::size_t>(lat.n), Vec2{0.0, 0.0});
        return s;
    }
};

/// Value of a smeared functional together with its exact functional gradients
/// (plain partial derivatives with respect to each site value; the lattice
/// delta is carried by the 1/dx in the bracket).
struct SmearedFunctional {
    double value = 0.0;
    std::vector<double> grad_phi;
    std::vector<double> grad_pi;
    std::vector<Vec2> grad_tau;
    std::vector<Vec2> grad_p;
    std::uint64_t state_token = 0;
};

/// Super-Hamiltonian and super-momentum densities of the scalar sector.
inline std::pair<std::vector<double>, std::vector<double>>
constraint_densities(const PhasePoint& state, double m, const Lattice& lat) {
    state.validate(lat);
    const SliceGeometry g = slice_geometry(state.tau, lat);
    const std::vector<double> psi = central_derivative(state.phi, lat);
    const std::size_t n = state.phi.size();
    std::vector<double> hperp(n), hpar(n);
    for (std::size_t i = 0; i < n; ++i) {
        hperp[i] = (state.pi[i] * state.pi[i] + psi[i] * psi[i]) / (2.0 * g.sqrt_q[i]) +
                   g.sqrt_q[i] * m * m * state.phi[i] * state.phi[i] / 2.0;
        hpar[i] = state.pi[i] * psi[i];
    }
    return {std::move(hperp), std::move(hpar)};
}

/// Per-site covector H_mu = P_mu + Hphi_mu; contraction with any xi gives
/// N Hperp + N1 Hpar + xi.P.
inline std::vector<Vec2> full_constraints(const PhasePoint& state, double m, const Lattice& lat) {
    const auto [hperp, hpar] = constraint_densities(state, m, lat);
    const SliceGeometry g = slice_geometry(state.tau, lat);
    std::vector<Vec2> h(hperp.size());
    for (std::size_t i = 0; i < h.size(); ++i) {
        const Vec2 tlow = mink_lower(g.tangent[i]);
        for (int mu = 0; mu < 2; ++mu)
            h[i][mu] = state.p[i][mu] - g.normal_down[i][mu] * hperp[i] +
                       tlow[mu] / g.q11[i] * hpar[i];
    }
    return h;
}

namespace detail {

/// Per-site geometry/matter derivative pack for the constraint covector.
/// a = tau'^0, b = tau'^1.
struct SitePack {
    double a, b, q, r;
    double hperp, hpar;
    Vec2 hphi;       // Hphi_mu
    Vec2 hfull;      // P_mu + Hphi_mu
    Vec2 dhphi_da;   // d Hphi_mu / d a
    Vec2 dhphi_db;   // d Hphi_mu / d b
    Vec2 dhphi_dpi;  // d Hphi_mu / d Pi
    Vec2 dhphi_dpsi; // d Hphi_mu / d phi'
    Vec2 dhphi_dphi; // direct d Hphi_mu / d phi (mass term)
    Vec2 n_up, n_down;
};

inline SitePack site_pack(double a, double b, double phi, double psi, double pi, const Vec2& P,
                          double m, int site) {
    SitePack s;
    s.a = a;
    s.b = b;
    s.q = b * b - a * a;
    if (!(s.q > 0.0))
        throw GeometryError("non-spacelike embedding at site " + std::to_string(site), site);
    s.r = std::sqrt(s.q);
    const double C = (pi * pi + psi * psi) / 2.0;
    const double Dm = m * m * phi * phi / 2.0;
    s.hperp = C / s.r + Dm * s.r;
    s.hpar = pi * psi;
    const double r3 = s.r * s.q;
    s.n_up = {b / s.r, a / s.r};
    s.n_down = {-b / s.r, a / s.r};
    const Vec2 u = {-a / s.q, b / s.q}; // tau'_mu / Q
    for (int mu = 0; mu < 2; ++mu) {
        s.hphi[mu] = -s.n_down[mu] * s.hperp + u[mu] * s.hpar;
        s.hfull[mu] = P[mu] + s.hphi[mu];
    }
    // derivative blocks
    const double dhperp_da = a * (C / r3 - Dm / s.r);
    const double dhperp_db = b * (-C / r3 + Dm / s.r);
    const Vec2 dn_down_da = {-a * b / r3, b * b / r3};
    const Vec2 dn_down_db = {a * a / r3, -a * b / r3};
    const Vec2 du_da = {-1.0 / s.q - 2.0 * a * a / (s.q * s.q), 2.0 * a * b / (s.q * s.q)};
    const Vec2 du_db = {2.0 * a * b / (s.q * s.q), 1.0 / s.q - 2.0 * b * b / (s.q * s.q)};
    for (int mu = 0; mu < 2; ++mu) {
        s.dhphi_da[mu] = -dn_down_da[mu] * s.hperp - s.n_down[mu] * dhperp_da + du_da[mu] * s.hpar;
        s.dhphi_db[mu] = -dn_down_db[mu] * s.hperp - s.n_down[mu] * dhperp_db + du_db[mu] * s.hpar;
        s.dhphi_dpi[mu] = -s.n_down[mu] * pi / s.r + u[mu] * psi;
        s.dhphi_dpsi[mu] = -s.n_down[mu] * psi / s.r + u[mu] * pi;
        s.dhphi_dphi[mu] = -s.n_down[mu] * m * m * phi * s.r;
    }
    return s;
}

/// Site-local smearing data for F = sum_i dx w^mu_i H_{mu,i}.  dwda/dwdb
/// cover geometric dependence of w through the slice tangent, dwdtau the
/// explicit dependence of w on the embedding point.
struct WField {
    std::vector<Vec2> w;
    std::vector<Vec2> dwda, dwdb; // optional
    std::vector<Mat2> dwdtau;     // optional, dwdtau[i][mu][nu] = dw^mu/dtau^nu
    bool include_p = true;        // false drops the w.P term (matter-only functionals)
};

inline SmearedFunctional smeared_from_w(const PhasePoint& state, const WField& wf, double m,
                                        const Lattice& lat) {
    state.validate(lat);
    const int n = lat.n;
    const double dx = lat.spacing;
    const std::vector<Vec2> tp = state.tau.tangent(lat);
    const std::vector<double> psi = central_derivative(state.phi, lat);

    std::vector<SitePack> pk;
    pk.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const auto iu = static_cast<std::size_t>(i);
        pk.push_back(site_pack(tp[iu][0], tp[iu][1], state.phi[iu], psi[iu], state.pi[iu],
                               state.p[iu], m, i));
    }

    SmearedFunctional f;
    f.state_token = state.token();
    f.grad_phi.assign(static_cast<std::size_t>(n), 0.0);
    f.grad_pi.assign(static_cast<std::size_t>(n), 0.0);
    f.grad_tau.assign(static_cast<std::size_t>(n), Vec2{0, 0});
    f.grad_p.assign(static_cast<std::size_t>(n), Vec2{0, 0});

    std::vector<double> gpsi(static_cast<std::size_t>(n));
    std::vector<Vec2> B(static_cast<std::size_t>(n)); // (d/d a, d/d b) of w.H at fixed fields
    for (int i = 0; i < n; ++i) {
        const auto iu = static_cast<std::size_t>(i);
        const Vec2& w = wf.w[iu];
        const SitePack& s = pk[iu];
        const Vec2& h = wf.include_p ? s.hfull : s.hphi;
        f.value += dx * (w[0] * h[0] + w[1] * h[1]);
        f.grad_pi[iu] = dx * (w[0] * s.dhphi_dpi[0] + w[1] * s.dhphi_dpi[1]);
        gpsi[iu] = w[0] * s.dhphi_dpsi[0] + w[1] * s.dhphi_dpsi[1];
        if (wf.include_p) f.grad_p[iu] = {dx * w[0], dx * w[1]};
        f.grad_phi[iu] = dx * (w[0] * s.dhphi_dphi[0] + w[1] * s.dhphi_dphi[1]);
        B[iu][0] = w[0] * s.dhphi_da[0] + w[1] * s.dhphi_da[1];
        B[iu][1] = w[0] * s.dhphi_db[0] + w[1] * s.dhphi_db[1];
        if (!wf.dwda.empty()) {
            B[iu][0] += wf.dwda[iu][0] * h[0] + wf.dwda[iu][1] * h[1];
            B[iu][1] += wf.dwdb[iu][0] * h[0] + wf.dwdb[iu][1] * h[1];
        }
        if (!wf.dwdtau.empty()) {
            for (int nu = 0; nu < 2; ++nu)
                f.grad_tau[iu][nu] +=
                    dx * (wf.dwdtau[iu][0][nu] * h[0] + wf.dwdtau[iu][1][nu] * h[1]);
        }
    }
    // stencil transposes: sum_i c_i d(psi_i)/d(phi_j) = (c_{j-1} - c_{j+1}) / (2 dx)
    for (int j = 0; j < n; ++j) {
        const auto ju = static_cast<std::size_t>(j);
        const auto jm = static_cast<std::size_t>((j + n - 1) % n);
        const auto jp = static_cast<std::size_t>((j + 1) % n);
        f.grad_phi[ju] += (gpsi[jm] - gpsi[jp]) / 2.0;
        f.grad_tau[ju][0] += (B[jm][0] - B[jp][0]) / 2.0;
        f.grad_tau[ju][1] += (B[jm][1] - B[jp][1]) / 2.0;
    }
    return f;
}

} // namespace detail

/// H(xi) for a generator field evaluated at the embedding, including the
/// explicit embedding-dependence d xi^mu / d tau^nu in the gradients.
inline SmearedFunctional comomentum(const PhasePoint& state, const GeneratorField& xi, double m,
                                    const Lattice& lat) {
    const int n = lat.n;
    detail::WField wf;
    wf.w.resize(static_cast<std::size_t>(n));
    wf.dwdtau.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const auto iu = static_cast<std::size_t>(i);
        const VectorFieldValues v = xi(state.tau.tau0[iu], state.tau.tau1[iu]);
        wf.w[iu] = v.xi;
        wf.dwdtau[iu] = v.dxi;
    }
    return detail::smeared_from_w(state, wf, m, lat);
}

inline SmearedFunctional comomentum(const PhasePoint& state, const SpacetimeVectorField& xi,
                                    double m, const Lattice& lat) {
    return comomentum(state, xi.generator(), m, lat);
}

/// Value-only H(xi), cheap path for sampler weights and observables.
inline double comomentum_value(const PhasePoint& state, const SpacetimeVectorField& xi, double m,
                               const Lattice& lat) {
    const std::vector<Vec2> h = full_constraints(state, m, lat);
    double s = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) {
        const Vec2 v = xi.value(state.tau.tau0[i], state.tau.tau1[i]);
        s += v[0] * h[i][0] + v[1] * h[i][1];
    }
    return s * lat.spacing;
}

/// H(xi) for a fixed per-site deformation vector (no embedding dependence of
/// w beyond the slice tangent), e.g. the pushforward of a spatial field.
inline SmearedFunctional comomentum_pushforward(const PhasePoint& state,
                                                std::span<const double> zeta, double m,
                                                const Lattice& lat) {
    check_length(zeta, lat, "comomentum_pushforward");
    const std::vector<Vec2> tp = state.tau.tangent(lat);
    detail::WField wf;
    const auto n = static_cast<std::size_t>(lat.n);
    wf.w.resize(n);
    wf.dwda.resize(n);
    wf.dwdb.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        wf.w[i] = zeta[i] * tp[i];
        wf.dwda[i] = {zeta[i], 0.0};
        wf.dwdb[i] = {0.0, zeta[i]};
    }
    return detail::smeared_from_w(state, wf, m, lat);
}

/// Normal smearing H[N] = integral N (Hperp + n^mu P_mu); realized as the
/// w-contraction with w = N n^mu.
inline SmearedFunctional smear_lapse(const PhasePoint& state, std::span<const double> N, double m,
                                     const Lattice& lat) {
    check_length(N, lat, "smear_lapse");
    const SliceGeometry g = slice_geometry(state.tau, lat);
    detail::WField wf;
    const auto n = static_cast<std::size_t>(lat.n);
    wf.w.resize(n);
    wf.dwda.resize(n);
    wf.dwdb.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double a = g.tangent[i][0], b = g.tangent[i][1];
        const double r = g.sqrt_q[i], r3 = r * g.q11[i];
        wf.w[i] = N[i] * g.normal_up[i];
        wf.dwda[i] = {N[i] * a * b / r3, N[i] * b * b / r3};
        wf.dwdb[i] = {-N[i] * a * a / r3, -N[i] * a * b / r3};
    }
    return detail::smeared_from_w(state, wf, m, lat);
}

/// Tangential smearing H[Nvec] = integral N1 (Hpar + tau'^mu P_mu); the
/// w-contraction with w = N1 tau'^mu.
inline SmearedFunctional smear_shift(const PhasePoint& state, std::span<const double> N1, double m,
                                     const Lattice& lat) {
    check_length(N1, lat, "smear_shift");
    const std::vector<Vec2> tp = state.tau.tangent(lat);
    detail::WField wf;
    const auto n = static_cast<std::size_t>(lat.n);
    wf.w.resize(n);
    wf.dwda.resize(n);
    wf.dwdb.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        wf.w[i] = N1[i] * tp[i];
        wf.dwda[i] = {N1[i], 0.0};
        wf.dwdb[i] = {0.0, N1[i]};
    }
    return detail::smeared_from_w(state, wf, m, lat);
}

/// Momentum map of spatial diffeomorphisms, J_tau(zeta) = -integral zeta
/// tau'^mu H_mu; equals minus the co-momentum map of the pushforward field.
inline SmearedFunctional spatial_momentum_map(const PhasePoint& state, std::span<const double> zeta,
                                              double m, const Lattice& lat) {
    std::vector<double> neg(zeta.size());
    for (std::size_t i = 0; i < zeta.size(); ++i) neg[i] = -zeta[i];
    return smear_shift(state, neg, m, lat);
}

/// Lattice Poisson bracket; the 1/dx realizes the Dirac delta.
inline double poisson_bracket(const SmearedFunctional& F, const SmearedFunctional& G,
                              const Lattice& lat) {
    if (F.state_token != G.state_token)
        throw Error("poisson_bracket: functionals evaluated at different states");
    if (F.grad_phi.size() != static_cast<std::size_t>(lat.n) ||
        G.grad_phi.size() != static_cast<std::size_t>(lat.n))
        throw Error("poisson_bracket: gradient length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < F.grad_phi.size(); ++i) {
        s += F.grad_phi[i] * G.grad_pi[i] - F.grad_pi[i] * G.grad_phi[i];
        for (int mu = 0; mu < 2; ++mu)
            s += F.grad_tau[i][mu] * G.grad_p[i][mu] - F.grad_p[i][mu] * G.grad_tau[i][mu];
    }
    return s / lat.spacing;
}

/// Residuals of the three hypersurface-deformation relations
///   {H[Nvec], H[Mvec]} = H[L_Nvec Mvec]
///   {H[Nvec], H[M]}    = H[L_Nvec M]
///   {H[N],    H[M]}    = H[Kvec],  K = (N M' - M N') / Q11.
/// The continuum identities are the oracle: lattice closure is O(dx^2).
inline std::array<double, 3> verify_dirac_algebra(const PhasePoint& state,
                                                  std::span<const double> N,
                                                  std::span<const double> M,
                                                  std::span<const double> Nvec,
                                                  std::span<const double> Mvec, double m,
                                                  const Lattice& lat) {
    const SliceGeometry g = slice_geometry(state.tau, lat);
    const std::vector<double> dM = central_derivative(M, lat);
    const std::vector<double> dN = central_derivative(N, lat);
    const std::vector<double> dMv = central_derivative(Mvec, lat);
    const std::vector<double> dNv = central_derivative(Nvec, lat);
    const auto n = static_cast<std::size_t>(lat.n);

    std::vector<double> lie_vv(n), lie_vs(n), K(n);
    for (std::size_t i = 0; i < n; ++i) {
        lie_vv[i] = Nvec[i] * dMv[i] - Mvec[i] * dNv[i];
        lie_vs[i] = Nvec[i] * dM[i];
        K[i] = (N[i] * dM[i] - M[i] * dN[i]) / g.q11[i];
    }

    const SmearedFunctional HN = smear_lapse(state, N, m, lat);
    const SmearedFunctional HM = smear_lapse(state, M, m, lat);
    const SmearedFunctional HNv = smear_shift(state, Nvec, m, lat);
    const SmearedFunctional HMv = smear_shift(state, Mvec, m, lat);

    const double r1 = poisson_bracket(HNv, HMv, lat) - smear_shift(state, lie_vv, m, lat).value;
    const double r2 = poisson_bracket(HNv, HM, lat) - smear_lapse(state, lie_vs, m, lat).value;
    const double r3 = poisson_bracket(HN, HM, lat) - smear_shift(state, K, m, lat).value;
    return {std::abs(r1), std::abs(r2), std::abs(r3)};
}

/// Residual of the equivariance relation {H(xi), H(zeta)} = -H([xi, zeta])
/// with the vector-field commutator formed from exact partials.
inline double verify_equivariance(const PhasePoint& state, const SpacetimeVectorField& xi,
                                  const SpacetimeVectorField& zeta, double m, const Lattice& lat) {
    const SmearedFunctional Hxi = comomentum(state, xi, m, lat);
    const SmearedFunctional Hzeta = comomentum(state, zeta, m, lat);
    const SmearedFunctional Hcomm = comomentum(state, lie_bracket_field(xi, zeta), m, lat);
    return std::abs(poisson_bracket(Hxi, Hzeta, lat) + Hcomm.value);
}

} // namespace covlat
