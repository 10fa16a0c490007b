#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "covlat/lattice.hpp"
#include "covlat/vector_field.hpp"

namespace covlat {

class GeometryError : public Error {
public:
    GeometryError(std::string msg, int site) : Error(std::move(msg)), site_(site) {}
    int site() const { return site_; }

private:
    int site_;
};

/// A spacelike embedding of the circle into the Minkowski plane.
///
/// tau0 is periodic; tau1 winds once around: tau1(x + L) = tau1(x) + L, so
/// tau1 - x is the periodic part.  Spatial derivatives respect the winding.
struct Embedding {
    std::vector<double> tau0;
    std::vector<double> tau1;

    Embedding() = default;
    Embedding(std::vector<double> t0, std::vector<double> t1)
        : tau0(std::move(t0)), tau1(std::move(t1)) {
        if (tau0.size() != tau1.size()) throw Error("Embedding: component length mismatch");
    }

    /// The identity slice tau = (t0, x).
    static Embedding identity(const Lattice& lat, double t0 = 0.0) {
        std::vector<double> a(static_cast<std::size_t>(lat.n), t0);
        return {std::move(a), lat.sites};
    }

    int size() const { return static_cast<int>(tau0.size()); }

    Vec2 point(int i) const {
        return {tau0[static_cast<std::size_t>(i)], tau1[static_cast<std::size_t>(i)]};
    }

    /// Winding-aware tangent tau'^mu at every site.
    std::vector<Vec2> tangent(const Lattice& lat) const {
        check_length(tau0, lat, "Embedding");
        std::vector<double> periodic(tau1.size());
        for (std::size_t i = 0; i < tau1.size(); ++i) periodic[i] = tau1[i] - lat.sites[i];
        const std::vector<double> d0 = central_derivative(tau0, lat);
        const std::vector<double> d1 = central_derivative(periodic, lat);
        std::vector<Vec2> out(tau0.size());
        for (std::size_t i = 0; i < tau0.size(); ++i) out[i] = {d0[i], 1.0 + d1[i]};
        return out;
    }
};

/// Induced metric, area element and unit normal of a spacelike slice.
///
/// Q11 = -(tau'^0)^2 + (tau'^1)^2 > 0, n^mu = (tau'^1, tau'^0)/sqrt(Q11) is
/// the future-pointing unit normal (n.n = -1, n.tau' = 0), n_mu its lowered
/// form.
struct SliceGeometry {
    std::vector<double> q11;
    std::vector<double> sqrt_q;
    std::vector<Vec2> tangent;     // tau'^mu
    std::vector<Vec2> normal_up;   // n^mu
    std::vector<Vec2> normal_down; // n_mu
};

inline SliceGeometry slice_geometry(const Embedding& tau, const Lattice& lat) {
    check_length(tau.tau0, lat, "slice_geometry");
    SliceGeometry g;
    g.tangent = tau.tangent(lat);
    const std::size_t n = g.tangent.size();
    g.q11.resize(n);
    g.sqrt_q.resize(n);
    g.normal_up.resize(n);
    g.normal_down.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double a = g.tangent[i][0];
        const double b = g.tangent[i][1];
        const double q = b * b - a * a;
        if (!(q > 0.0))
            throw GeometryError("non-spacelike embedding at site " + std::to_string(i) +
                                    " (Q11 = " + std::to_string(q) + ")",
                                static_cast<int>(i));
        g.q11[i] = q;
        g.sqrt_q[i] = std::sqrt(q);
        g.normal_up[i] = {b / g.sqrt_q[i], a / g.sqrt_q[i]};
        g.normal_down[i] = mink_lower(g.normal_up[i]);
    }
    return g;
}

/// Lapse/shift split of xi along the slice: xi^mu(tau(x)) = N n^mu + N1 tau'^mu
/// with N = -eta(xi, n), N1 = eta(xi, tau')/Q11.
inline std::pair<std::vector<double>, std::vector<double>>
decompose_lapse_shift(const SpacetimeVectorField& xi, const Embedding& tau, const Lattice& lat) {
    const SliceGeometry g = slice_geometry(tau, lat);
    std::vector<double> lapse(g.q11.size()), shift(g.q11.size());
    for (std::size_t i = 0; i < g.q11.size(); ++i) {
        const Vec2 v = xi.value(tau.tau0[i], tau.tau1[i]);
        lapse[i] = -mink_dot(v, g.normal_up[i]);
        shift[i] = mink_dot(v, g.tangent[i]) / g.q11[i];
    }
    return {std::move(lapse), std::move(shift)};
}

/// Pushforward of a spatial vector field along the embedding:
/// xi^mu(tau(x_i)) = tau'^mu(x_i) zeta(x_i).
inline std::vector<Vec2> pushforward_spatial(std::span<const double> zeta, const Embedding& tau,
                                             const Lattice& lat) {
    check_length(zeta, lat, "pushforward_spatial");
    const std::vector<Vec2> tp = tau.tangent(lat);
    std::vector<Vec2> out(tp.size());
    for (std::size_t i = 0; i < tp.size(); ++i) out[i] = zeta[i] * tp[i];
    return out;
}

/// Local temperature of the flow generated by xi, T = |xi(tau(x))|^-1 with
/// the Euclidean norm of the coordinate components (the Lorentzian norm
/// vanishes on null flows).
inline std::vector<double> local_temperature(const SpacetimeVectorField& xi, const Embedding& tau,
                                             const Lattice& lat) {
    check_length(tau.tau0, lat, "local_temperature");
    std::vector<double> T(tau.tau0.size());
    for (std::size_t i = 0; i < T.size(); ++i) {
        const double nrm = euclid_norm(xi.value(tau.tau0[i], tau.tau1[i]));
        if (nrm == 0.0)
            throw GeometryError("vanishing generator at site " + std::to_string(i),
                                static_cast<int>(i));
        T[i] = 1.0 / nrm;
    }
    return T;
}

} // namespace covlat
