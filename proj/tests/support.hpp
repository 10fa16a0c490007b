#pragma once

// Shared fixtures: random smooth periodic fields with lattice-independent
// Fourier data, so the same continuum configuration can be realized at every
// refinement level.

#include <cmath>
#include <vector>

#include "covlat/canonical.hpp"
#include "covlat/rng.hpp"

namespace covlat::testing {

struct FourierField {
    double mean = 0.0;
    std::vector<double> cos_amp; // k = 1..kmax
    std::vector<double> sin_amp;

    double operator()(double x) const {
        double v = mean;
        for (std::size_t k = 0; k < cos_amp.size(); ++k) {
            v += cos_amp[k] * std::cos(static_cast<double>(k + 1) * x) +
                 sin_amp[k] * std::sin(static_cast<double>(k + 1) * x);
        }
        return v;
    }

    std::vector<double> realize(const Lattice& lat) const {
        std::vector<double> f(static_cast<std::size_t>(lat.n));
        for (std::size_t i = 0; i < f.size(); ++i) f[i] = (*this)(lat.sites[i]);
        return f;
    }
};

inline FourierField random_field(Philox4x32& rng, int kmax, double amp, double mean_amp = 0.0) {
    FourierField f;
    f.mean = mean_amp * (2.0 * rng.uniform01() - 1.0);
    for (int k = 1; k <= kmax; ++k) {
        const double damp = amp / k;
        f.cos_amp.push_back(damp * (2.0 * rng.uniform01() - 1.0));
        f.sin_amp.push_back(damp * (2.0 * rng.uniform01() - 1.0));
    }
    return f;
}

/// Lattice-independent description of a smooth off-shell state; tau stays
/// safely spacelike for the default amplitudes.
struct SmoothStateSpec {
    FourierField phi, pi, tau0, tau1p, p0, p1;

    covlat::PhasePoint realize(const Lattice& lat) const {
        covlat::PhasePoint s;
        s.phi = phi.realize(lat);
        s.pi = pi.realize(lat);
        std::vector<double> t0 = tau0.realize(lat);
        std::vector<double> t1 = tau1p.realize(lat);
        for (std::size_t i = 0; i < t1.size(); ++i) t1[i] += lat.sites[i];
        s.tau = covlat::Embedding{std::move(t0), std::move(t1)};
        const std::vector<double> a = p0.realize(lat);
        const std::vector<double> b = p1.realize(lat);
        s.p.resize(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) s.p[i] = {a[i], b[i]};
        return s;
    }
};

inline SmoothStateSpec random_state_spec(Philox4x32& rng, double matter_amp = 0.8,
                                         double geom_amp = 0.15, double p_amp = 0.5) {
    SmoothStateSpec s;
    s.phi = random_field(rng, 3, matter_amp, 0.3);
    s.pi = random_field(rng, 3, matter_amp, 0.3);
    s.tau0 = random_field(rng, 2, geom_amp, 0.2);
    s.tau1p = random_field(rng, 2, geom_amp, 0.0);
    s.p0 = random_field(rng, 3, p_amp, 0.3);
    s.p1 = random_field(rng, 3, p_amp, 0.3);
    return s;
}

inline covlat::PhasePoint random_state(Philox4x32& rng, const Lattice& lat,
                                       double matter_amp = 0.8, double geom_amp = 0.15,
                                       double p_amp = 0.5) {
    return random_state_spec(rng, matter_amp, geom_amp, p_amp).realize(lat);
}

/// Random expression over the public grammar, for round-trip and
/// differentiation corpora.
inline covlat::ExprPtr random_expr(Philox4x32& rng, int depth) {
    const auto pick = [&](int n) { return static_cast<int>(rng.next_u32() % n); };
    if (depth <= 0) {
        switch (pick(4)) {
            case 0: return covlat::expr_t();
            case 1: return covlat::expr_x();
            case 2: return covlat::expr_number(std::floor(200.0 * rng.uniform01()) / 10.0 - 5.0);
            default: return covlat::expr_number(static_cast<double>(pick(7)));
        }
    }
    switch (pick(10)) {
        case 0: return covlat::expr_binary(covlat::ExprKind::Add, random_expr(rng, depth - 1),
                                           random_expr(rng, depth - 1));
        case 1: return covlat::expr_binary(covlat::ExprKind::Sub, random_expr(rng, depth - 1),
                                           random_expr(rng, depth - 1));
        case 2: return covlat::expr_binary(covlat::ExprKind::Mul, random_expr(rng, depth - 1),
                                           random_expr(rng, depth - 1));
        case 3: return covlat::expr_binary(covlat::ExprKind::Div, random_expr(rng, depth - 1),
                                           random_expr(rng, depth - 1));
        case 4: // integer exponent on a leaf base keeps values finite
            return covlat::expr_binary(covlat::ExprKind::Pow, random_expr(rng, 0),
                                       covlat::expr_number(static_cast<double>(pick(4))));
        case 5: return covlat::expr_neg(random_expr(rng, depth - 1));
        case 6: return covlat::expr_unary(covlat::ExprKind::Sin, random_expr(rng, depth - 1));
        case 7: return covlat::expr_unary(covlat::ExprKind::Cos, random_expr(rng, depth - 1));
        case 8: return covlat::expr_unary(covlat::ExprKind::Tanh, random_expr(rng, depth - 1));
        default: return covlat::expr_unary(covlat::ExprKind::Exp, random_expr(rng, 0));
    }
}

/// Least-squares slope of log(err) against log(1/n): the measured convergence
/// order of a refinement sequence.
inline double fitted_order(const std::vector<double>& ns, const std::vector<double>& errs) {
    const std::size_t m = ns.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < m; ++i) {
        const double x = -std::log(ns[i]);
        const double y = std::log(errs[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double denom = m * sxx - sx * sx;
    return (m * sxy - sx * sy) / denom;
}

} // namespace covlat::testing
