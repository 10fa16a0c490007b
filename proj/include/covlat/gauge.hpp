#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "covlat/canonical.hpp"
#include "covlat/dynamics.hpp"
#include "covlat/expr.hpp"

namespace covlat {

// ---------------------------------------------------------------------------
// Time-dependent gauge fixing chi^mu = tau^mu - F^mu(lambda, x), the
// second-class constraint matrix and Dirac bracket, the reduced Hamiltonian
// Hbar = integral Fdot^mu Hphi_mu, and the reduced matter dynamics.
//
// F^mu depends on (lambda, x) only; field-dependent gauges are out of scope.
// ---------------------------------------------------------------------------

/// Gauge functions F^mu(lambda, x).  Expressions use `t` for lambda.
/// F^1 must carry the winding F^1(lambda, x + L) = F^1(lambda, x) + L so that
/// the gauge slice is a valid Embedding; the timegauge preset is F = (t, x).
struct GaugeSpec {
    ExprPtr f0, f1;
    bool timegauge_preset = false;

    static GaugeSpec timegauge() { return {parse_expr("t"), parse_expr("x"), true}; }

    static GaugeSpec from_strings(std::string_view s0, std::string_view s1) {
        return {parse_expr(s0), parse_expr(s1), false};
    }

    /// The gauge slice tau = F(lambda, .) as an embedding.
    Embedding slice(double lambda, const Lattice& lat) const {
        std::vector<double> t0(static_cast<std::size_t>(lat.n)), t1(t0.size());
        for (std::size_t i = 0; i < t0.size(); ++i) {
            t0[i] = eval(*f0, lambda, lat.sites[i]);
            t1[i] = eval(*f1, lambda, lat.sites[i]);
        }
        return {std::move(t0), std::move(t1)};
    }

    /// Fdot^mu = dF^mu/dlambda per site.
    std::vector<Vec2> rate(double lambda, const Lattice& lat) const {
        std::vector<Vec2> r(static_cast<std::size_t>(lat.n));
        for (std::size_t i = 0; i < r.size(); ++i) {
            r[i] = {eval_with_grad(*f0, lambda, lat.sites[i]).dt,
                    eval_with_grad(*f1, lambda, lat.sites[i]).dt};
        }
        return r;
    }
};

namespace detail {

/// Dense gradients of the per-site constraint H_{mu,i} (value included);
/// reuses the Poisson bracket machinery for constraint brackets.
inline std::vector<SmearedFunctional> constraint_functionals(const PhasePoint& state, double m,
                                                             const Lattice& lat) {
    state.validate(lat);
    const int n = lat.n;
    const double inv2dx = 1.0 / (2.0 * lat.spacing);
    const std::vector<Vec2> tp = state.tau.tangent(lat);
    const std::vector<double> psi = central_derivative(state.phi, lat);
    const std::uint64_t token = state.token();

    std::vector<SmearedFunctional> out(static_cast<std::size_t>(2 * n));
    for (int mu = 0; mu < 2; ++mu) {
        for (int i = 0; i < n; ++i) {
            const auto iu = static_cast<std::size_t>(i);
            const SitePack s = site_pack(tp[iu][0], tp[iu][1], state.phi[iu], psi[iu],
                                         state.pi[iu], state.p[iu], m, i);
            SmearedFunctional f;
            f.state_token = token;
            f.value = s.hfull[mu];
            f.grad_phi.assign(static_cast<std::size_t>(n), 0.0);
            f.grad_pi.assign(static_cast<std::size_t>(n), 0.0);
            f.grad_tau.assign(static_cast<std::size_t>(n), Vec2{0, 0});
            f.grad_p.assign(static_cast<std::size_t>(n), Vec2{0, 0});
            const auto ip = static_cast<std::size_t>((i + 1) % n);
            const auto im = static_cast<std::size_t>((i + n - 1) % n);
            f.grad_p[iu][mu] = 1.0;
            f.grad_pi[iu] = s.dhphi_dpi[mu];
            f.grad_phi[iu] = s.dhphi_dphi[mu];
            f.grad_phi[ip] += s.dhphi_dpsi[mu] * inv2dx;
            f.grad_phi[im] -= s.dhphi_dpsi[mu] * inv2dx;
            f.grad_tau[ip][0] += s.dhphi_da[mu] * inv2dx;
            f.grad_tau[im][0] -= s.dhphi_da[mu] * inv2dx;
            f.grad_tau[ip][1] += s.dhphi_db[mu] * inv2dx;
            f.grad_tau[im][1] -= s.dhphi_db[mu] * inv2dx;
            out[static_cast<std::size_t>(mu * n + i)] = std::move(f);
        }
    }
    return out;
}

/// {F, chi^nu_j} = -(1/dx) dF/dP_{nu,j}; the gauge functions carry no field
/// dependence.
inline double bracket_with_chi(const SmearedFunctional& F, int nu, int j, const Lattice& lat) {
    return -F.grad_p[static_cast<std::size_t>(j)][nu] / lat.spacing;
}

} // namespace detail

struct ConstraintMatrix {
    Eigen::MatrixXd a;       // A[(mu,i), (nu,j)] = {H_{mu,i}, chi^nu_j}, index mu*n + i
    double condition_number; // largest/smallest singular value
};

/// The 2n x 2n bracket matrix A_{mu nu} = {H_mu, chi_nu}; for lambda-x gauges
/// this evaluates to -(1/dx) times the identity.  Throws if the gauge is not
/// complete at this state (singular matrix), reporting the condition number.
inline ConstraintMatrix constraint_matrix(const PhasePoint& state, const GaugeSpec& gs,
                                          double lambda, double m, const Lattice& lat) {
    slice_geometry(gs.slice(lambda, lat), lat); // gauge slice must be a valid embedding
    const int n = lat.n;
    const auto funcs = detail::constraint_functionals(state, m, lat);
    ConstraintMatrix cm;
    cm.a.resize(2 * n, 2 * n);
    for (int I = 0; I < 2 * n; ++I)
        for (int nu = 0; nu < 2; ++nu)
            for (int j = 0; j < n; ++j)
                cm.a(I, nu * n + j) =
                    detail::bracket_with_chi(funcs[static_cast<std::size_t>(I)], nu, j, lat);
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(cm.a);
    const double smax = svd.singularValues()(0);
    const double smin = svd.singularValues()(svd.singularValues().size() - 1);
    cm.condition_number = (smin > 0.0) ? smax / smin : std::numeric_limits<double>::infinity();
    if (!(smin > 1e-12 * smax))
        throw Error("constraint_matrix: gauge not complete at this state (condition number " +
                    std::to_string(cm.condition_number) + ")");
    return cm;
}

/// Dirac bracket {F, G}* = {F, G} - {F, psi_I} C^{IJ} {psi_J, G} with
/// psi = (H_{mu,i}, chi^nu_j).  The {H, H} block is assembled honestly (it
/// vanishes only to O(dx^2) on the lattice); every constraint commutes with
/// everything under the corrected bracket by construction.
inline double dirac_bracket(const SmearedFunctional& F, const SmearedFunctional& G,
                            const PhasePoint& state, const GaugeSpec& gs, double lambda, double m,
                            const Lattice& lat) {
    if (F.state_token != G.state_token || F.state_token != state.token())
        throw Error("dirac_bracket: functionals and state do not match");
    slice_geometry(gs.slice(lambda, lat), lat);
    const int n = lat.n;
    const int nc = 4 * n; // 2n constraints H + 2n gauge conditions chi
    const auto funcs = detail::constraint_functionals(state, m, lat);

    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(nc, nc);
    for (int I = 0; I < 2 * n; ++I) {
        for (int J = 0; J < 2 * n; ++J) {
            if (J > I) {
                const double v = poisson_bracket(funcs[static_cast<std::size_t>(I)],
                                                 funcs[static_cast<std::size_t>(J)], lat);
                C(I, J) = v;
                C(J, I) = -v;
            }
        }
        for (int nu = 0; nu < 2; ++nu)
            for (int j = 0; j < n; ++j) {
                const double v =
                    detail::bracket_with_chi(funcs[static_cast<std::size_t>(I)], nu, j, lat);
                C(I, 2 * n + nu * n + j) = v;
                C(2 * n + nu * n + j, I) = -v;
            }
    }

    Eigen::VectorXd vF(nc), vG(nc);
    for (int I = 0; I < 2 * n; ++I) {
        vF(I) = poisson_bracket(F, funcs[static_cast<std::size_t>(I)], lat);
        vG(I) = poisson_bracket(funcs[static_cast<std::size_t>(I)], G, lat);
    }
    for (int nu = 0; nu < 2; ++nu)
        for (int j = 0; j < n; ++j) {
            vF(2 * n + nu * n + j) = detail::bracket_with_chi(F, nu, j, lat);
            vG(2 * n + nu * n + j) = -detail::bracket_with_chi(G, nu, j, lat);
        }

    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(C);
    const Eigen::VectorXd z = lu.solve(vG);
    if (!z.allFinite()) throw Error("dirac_bracket: singular constraint matrix");
    return poisson_bracket(F, G, lat) - vF.dot(z);
}

/// Reduced Hamiltonian Hbar = integral Fdot^mu Hphi_mu on the gauge slice
/// (matter sectors only).  The state must lie on the reduced surface:
/// chi = 0 and H = 0 within 1e-10.
inline SmearedFunctional reduced_hamiltonian(const PhasePoint& state, const GaugeSpec& gs,
                                             double lambda, double m, const Lattice& lat) {
    state.validate(lat);
    const Embedding fslice = gs.slice(lambda, lat);
    for (std::size_t i = 0; i < state.tau.tau0.size(); ++i) {
        if (std::abs(state.tau.tau0[i] - fslice.tau0[i]) > 1e-10 ||
            std::abs(state.tau.tau1[i] - fslice.tau1[i]) > 1e-10)
            throw Error("reduced_hamiltonian: state violates the gauge condition at site " +
                        std::to_string(i));
    }
    const std::vector<Vec2> h = full_constraints(state, m, lat);
    for (std::size_t i = 0; i < h.size(); ++i)
        if (std::abs(h[i][0]) > 1e-10 || std::abs(h[i][1]) > 1e-10)
            throw Error("reduced_hamiltonian: state is off the constraint surface at site " +
                        std::to_string(i));
    detail::WField wf;
    wf.w = gs.rate(lambda, lat);
    wf.include_p = false;
    SmearedFunctional H = detail::smeared_from_w(state, wf, m, lat);
    // the reduced phase space is matter-only; the gauge slice is external data
    H.grad_tau.assign(H.grad_tau.size(), Vec2{0, 0});
    return H;
}

/// Matter trajectory under the gauge-fixed dynamics.
struct ReducedTrace {
    std::vector<double> lambda;
    std::vector<std::vector<double>> phi, pi;
    std::vector<double> energy; // Hbar along the trajectory
};

namespace detail {

struct MatterDeriv {
    std::vector<double> dphi, dpi;
};

inline MatterDeriv reduced_rhs(const std::vector<double>& phi, const std::vector<double>& pi,
                               const GaugeSpec& gs, double lambda, double m, const Lattice& lat) {
    PhasePoint s;
    s.phi = phi;
    s.pi = pi;
    s.tau = gs.slice(lambda, lat);
    s.p.assign(phi.size(), Vec2{0, 0});
    WField wf;
    wf.w = gs.rate(lambda, lat);
    wf.include_p = false;
    const SmearedFunctional H = smeared_from_w(s, wf, m, lat);
    MatterDeriv d;
    d.dphi.resize(phi.size());
    d.dpi.resize(phi.size());
    const double inv_dx = 1.0 / lat.spacing;
    for (std::size_t i = 0; i < phi.size(); ++i) {
        d.dphi[i] = H.grad_pi[i] * inv_dx;
        d.dpi[i] = -H.grad_phi[i] * inv_dx;
    }
    return d;
}

} // namespace detail

/// RK4 integration of phidot = dHbar/dPi, Pidot = -dHbar/dphi with the gauge
/// slice advanced as tau = F(lambda).
inline ReducedTrace reduced_evolve(std::vector<double> phi, std::vector<double> pi,
                                   const GaugeSpec& gs, double m, double lambda_end, double h,
                                   const Lattice& lat, int record_every = 0,
                                   double lambda0 = 0.0) {
    check_length(phi, lat, "reduced_evolve.phi");
    check_length(pi, lat, "reduced_evolve.pi");
    if (!(lambda_end > 0.0)) throw Error("reduced_evolve: lambda_end must be positive");
    const int steps = static_cast<int>(std::llround(lambda_end / h));
    if (record_every <= 0) record_every = std::max(1, steps / 100);

    ReducedTrace tr;
    auto hbar_value = [&](double lam, const std::vector<double>& f,
                          const std::vector<double>& g) {
        PhasePoint s;
        s.phi = f;
        s.pi = g;
        s.tau = gs.slice(lam, lat);
        s.p.assign(f.size(), Vec2{0, 0});
        detail::WField wf;
        wf.w = gs.rate(lam, lat);
        wf.include_p = false;
        return detail::smeared_from_w(s, wf, m, lat).value;
    };
    auto record = [&](double lam, const std::vector<double>& f, const std::vector<double>& g) {
        tr.lambda.push_back(lam);
        tr.phi.push_back(f);
        tr.pi.push_back(g);
        tr.energy.push_back(hbar_value(lam, f, g));
    };

    record(lambda0, phi, pi);
    const std::size_t nn = phi.size();
    for (int k = 1; k <= steps; ++k) {
        const double lam = lambda0 + (k - 1) * h;
        const auto k1 = detail::reduced_rhs(phi, pi, gs, lam, m, lat);
        std::vector<double> f2(nn), g2(nn);
        for (std::size_t i = 0; i < nn; ++i) {
            f2[i] = phi[i] + 0.5 * h * k1.dphi[i];
            g2[i] = pi[i] + 0.5 * h * k1.dpi[i];
        }
        const auto k2 = detail::reduced_rhs(f2, g2, gs, lam + 0.5 * h, m, lat);
        for (std::size_t i = 0; i < nn; ++i) {
            f2[i] = phi[i] + 0.5 * h * k2.dphi[i];
            g2[i] = pi[i] + 0.5 * h * k2.dpi[i];
        }
        const auto k3 = detail::reduced_rhs(f2, g2, gs, lam + 0.5 * h, m, lat);
        for (std::size_t i = 0; i < nn; ++i) {
            f2[i] = phi[i] + h * k3.dphi[i];
            g2[i] = pi[i] + h * k3.dpi[i];
        }
        const auto k4 = detail::reduced_rhs(f2, g2, gs, lam + h, m, lat);
        for (std::size_t i = 0; i < nn; ++i) {
            phi[i] += h / 6.0 * (k1.dphi[i] + 2 * k2.dphi[i] + 2 * k3.dphi[i] + k4.dphi[i]);
            pi[i] += h / 6.0 * (k1.dpi[i] + 2 * k2.dpi[i] + 2 * k3.dpi[i] + k4.dpi[i]);
        }
        for (std::size_t i = 0; i < nn; ++i)
            if (!std::isfinite(phi[i]) || !std::isfinite(pi[i]))
                throw Error("reduced_evolve: non-finite state after step");
        if (k % record_every == 0 || k == steps) record(lambda0 + k * h, phi, pi);
    }
    return tr;
}

} // namespace covlat
