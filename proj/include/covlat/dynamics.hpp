#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "covlat/canonical.hpp"

namespace covlat {

// ---------------------------------------------------------------------------
// Hamiltonian/thermal flow generated by H(xi):
//   phidot = dH/dPi, Pidot = -dH/dphi, taudot^mu = xi^mu(tau),
//   Pdot_mu = -dH/dtau^mu (full off-shell right-hand side).
// Fixed-step classical RK4 with constraint-drift monitoring.
// ---------------------------------------------------------------------------

struct FlowTrace {
    std::vector<double> lambda;
    std::vector<PhasePoint> states;
    std::vector<double> drift;  // max-norm of H_mu over scale(lambda=0)
    std::vector<double> energy; // H(xi)
    bool aborted = false;
    std::string abort_reason;
};

namespace detail {

struct FlowDeriv {
    std::vector<double> dphi, dpi;
    std::vector<Vec2> dtau, dp;
};

inline FlowDeriv hamiltonian_rhs(const PhasePoint& s, const GeneratorField& xi, double m,
                                 const Lattice& lat) {
    const SmearedFunctional H = comomentum(s, xi, m, lat);
    const double inv_dx = 1.0 / lat.spacing;
    const auto n = static_cast<std::size_t>(lat.n);
    FlowDeriv d;
    d.dphi.resize(n);
    d.dpi.resize(n);
    d.dtau.resize(n);
    d.dp.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        d.dphi[i] = H.grad_pi[i] * inv_dx;
        d.dpi[i] = -H.grad_phi[i] * inv_dx;
        for (int mu = 0; mu < 2; ++mu) {
            d.dtau[i][mu] = H.grad_p[i][mu] * inv_dx;
            d.dp[i][mu] = -H.grad_tau[i][mu] * inv_dx;
        }
    }
    return d;
}

inline PhasePoint advance(const PhasePoint& s, const FlowDeriv& d, double c) {
    PhasePoint r = s;
    for (std::size_t i = 0; i < r.phi.size(); ++i) {
        r.phi[i] += c * d.dphi[i];
        r.pi[i] += c * d.dpi[i];
        r.tau.tau0[i] += c * d.dtau[i][0];
        r.tau.tau1[i] += c * d.dtau[i][1];
        r.p[i][0] += c * d.dp[i][0];
        r.p[i][1] += c * d.dp[i][1];
    }
    return r;
}

inline void accumulate(PhasePoint& y, const FlowDeriv& d, double c) {
    for (std::size_t i = 0; i < y.phi.size(); ++i) {
        y.phi[i] += c * d.dphi[i];
        y.pi[i] += c * d.dpi[i];
        y.tau.tau0[i] += c * d.dtau[i][0];
        y.tau.tau1[i] += c * d.dtau[i][1];
        y.p[i][0] += c * d.dp[i][0];
        y.p[i][1] += c * d.dp[i][1];
    }
}

inline bool all_finite(const PhasePoint& s) {
    auto ok = [](double v) { return std::isfinite(v); };
    for (std::size_t i = 0; i < s.phi.size(); ++i)
        if (!ok(s.phi[i]) || !ok(s.pi[i]) || !ok(s.tau.tau0[i]) || !ok(s.tau.tau1[i]) ||
            !ok(s.p[i][0]) || !ok(s.p[i][1]))
            return false;
    return true;
}

inline double max_constraint_norm(const PhasePoint& s, double m, const Lattice& lat) {
    const std::vector<Vec2> h = full_constraints(s, m, lat);
    double mx = 0.0;
    for (const Vec2& v : h) mx = std::max({mx, std::abs(v[0]), std::abs(v[1])});
    return mx;
}

} // namespace detail

/// One classical RK4 step of the flow generated by H(xi).
inline PhasePoint flow_step(const PhasePoint& state, const GeneratorField& xi, double m, double h,
                            const Lattice& lat) {
    if (!(h > 0.0)) throw Error("flow_step: step size must be positive");
    state.validate(lat);
    const auto k1 = detail::hamiltonian_rhs(state, xi, m, lat);
    const auto k2 = detail::hamiltonian_rhs(detail::advance(state, k1, h / 2.0), xi, m, lat);
    const auto k3 = detail::hamiltonian_rhs(detail::advance(state, k2, h / 2.0), xi, m, lat);
    const auto k4 = detail::hamiltonian_rhs(detail::advance(state, k3, h), xi, m, lat);
    PhasePoint y = state;
    detail::accumulate(y, k1, h / 6.0);
    detail::accumulate(y, k2, h / 3.0);
    detail::accumulate(y, k3, h / 3.0);
    detail::accumulate(y, k4, h / 6.0);
    if (!detail::all_finite(y)) throw Error("flow_step: non-finite state after step");
    slice_geometry(y.tau, lat); // spacelike check
    return y;
}

inline PhasePoint flow_step(const PhasePoint& state, const SpacetimeVectorField& xi, double m,
                            double h, const Lattice& lat) {
    return flow_step(state, xi.generator(), m, h, lat);
}

/// Integrate to lambda_end with fixed step h, recording drift and H(xi) every
/// record_every steps (0 picks a stride giving about 100 samples).  Aborts on
/// spacelike violation, returning the trace accumulated so far.
///
/// Drift is max_i,mu |H_mu(lambda)| divided by max(1, max|H_mu(0)|), so for
/// on-shell data it is the absolute constraint violation.
inline FlowTrace evolve(const PhasePoint& state, const GeneratorField& xi, double m,
                        double lambda_end, double h, const Lattice& lat, int record_every = 0) {
    if (!(lambda_end > 0.0)) throw Error("evolve: lambda_end must be positive");
    const int steps = static_cast<int>(std::llround(lambda_end / h));
    if (record_every <= 0) record_every = std::max(1, steps / 100);

    FlowTrace trace;
    const double scale = std::max(1.0, detail::max_constraint_norm(state, m, lat));
    auto record = [&](double lam, const PhasePoint& s) {
        trace.lambda.push_back(lam);
        trace.states.push_back(s);
        trace.drift.push_back(detail::max_constraint_norm(s, m, lat) / scale);
        trace.energy.push_back(comomentum(s, xi, m, lat).value);
    };

    PhasePoint cur = state;
    record(0.0, cur);
    for (int k = 1; k <= steps; ++k) {
        try {
            cur = flow_step(cur, xi, m, h, lat);
        } catch (const Error& e) {
            trace.aborted = true;
            trace.abort_reason = e.what();
            return trace;
        }
        if (k % record_every == 0 || k == steps) record(k * h, cur);
    }
    return trace;
}

inline FlowTrace evolve(const PhasePoint& state, const SpacetimeVectorField& xi, double m,
                        double lambda_end, double h, const Lattice& lat, int record_every = 0) {
    return evolve(state, xi.generator(), m, lambda_end, h, lat, record_every);
}

/// Place the embedding momentum on the constraint surface, P_mu = -Hphi_mu.
inline void set_on_shell(PhasePoint& state, double m, const Lattice& lat) {
    const auto [hperp, hpar] = constraint_densities(state, m, lat);
    const SliceGeometry g = slice_geometry(state.tau, lat);
    for (std::size_t i = 0; i < state.p.size(); ++i) {
        const Vec2 tlow = mink_lower(g.tangent[i]);
        for (int mu = 0; mu < 2; ++mu)
            state.p[i][mu] = g.normal_down[i][mu] * hperp[i] - tlow[mu] / g.q11[i] * hpar[i];
    }
}

} // namespace covlat
