#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <numbers>
#include <utility>

#include "covlat/expr.hpp"

namespace covlat {

/// A spacetime 2-vector (component index 0 = time, 1 = space).
using Vec2 = std::array<double, 2>;

/// 2x2 matrix, m[i][j].
using Mat2 = std::array<std::array<double, 2>, 2>;

inline Vec2 operator+(const Vec2& a, const Vec2& b) { return {a[0] + b[0], a[1] + b[1]}; }
inline Vec2 operator-(const Vec2& a, const Vec2& b) { return {a[0] - b[0], a[1] - b[1]}; }
inline Vec2 operator*(double s, const Vec2& a) { return {s * a[0], s * a[1]}; }

/// Minkowski pairing with background metric diag(-1, +1).
inline double mink_dot(const Vec2& a, const Vec2& b) { return -a[0] * b[0] + a[1] * b[1]; }

/// Lower an index with diag(-1, +1).
inline Vec2 mink_lower(const Vec2& a) { return {-a[0], a[1]}; }

inline double euclid_norm(const Vec2& a) { return std::hypot(a[0], a[1]); }

/// Pointwise data of a vector field: components and their spacetime partials,
/// dxi[mu][nu] = d xi^mu / d x^nu.
struct VectorFieldValues {
    Vec2 xi{};
    Mat2 dxi{};
};

/// Callable form used wherever a generator field enters smeared functionals;
/// evaluated at embedding points (t, x) = (tau^0, tau^1).
using GeneratorField = std::function<VectorFieldValues(double, double)>;

/// An analytic spacetime vector field xi^mu(t, x), spatially periodic on the
/// circle of the given circumference.  Periodicity is validated at
/// construction by sampling.
class SpacetimeVectorField {
public:
    SpacetimeVectorField(ExprPtr xi0, ExprPtr xi1,
                         double circumference = 2.0 * std::numbers::pi, bool validate = true)
        : comp_{std::move(xi0), std::move(xi1)}, circumference_(circumference) {
        if (!comp_[0] || !comp_[1]) throw Error("SpacetimeVectorField: null component");
        if (validate) validate_periodicity();
    }

    static SpacetimeVectorField parse(std::string_view xi0, std::string_view xi1,
                                      double circumference = 2.0 * std::numbers::pi) {
        return {parse_expr(xi0), parse_expr(xi1), circumference};
    }

    const Expr& component(int mu) const { return *comp_[static_cast<std::size_t>(mu)]; }
    ExprPtr component_ptr(int mu) const { return comp_[static_cast<std::size_t>(mu)]; }
    double circumference() const { return circumference_; }

    Vec2 value(double t, double x) const {
        return {eval(*comp_[0], t, x), eval(*comp_[1], t, x)};
    }

    VectorFieldValues value_grad(double t, double x) const {
        VectorFieldValues r;
        for (int mu = 0; mu < 2; ++mu) {
            const EvalGrad g = eval_with_grad(*comp_[static_cast<std::size_t>(mu)], t, x);
            r.xi[static_cast<std::size_t>(mu)] = g.value;
            r.dxi[static_cast<std::size_t>(mu)][0] = g.dt;
            r.dxi[static_cast<std::size_t>(mu)][1] = g.dx;
        }
        return r;
    }

    GeneratorField generator() const {
        return [f = *this](double t, double x) { return f.value_grad(t, x); };
    }

private:
    void validate_periodicity() const {
        const double ts[] = {0.0, -0.7, 1.3};
        const int m = 17;
        for (double t : ts) {
            for (int i = 0; i < m; ++i) {
                const double x = circumference_ * i / m - 1.1;
                for (int mu = 0; mu < 2; ++mu) {
                    const double a = eval(*comp_[static_cast<std::size_t>(mu)], t, x);
                    const double b = eval(*comp_[static_cast<std::size_t>(mu)], t, x + circumference_);
                    const double scale = std::max({1.0, std::abs(a), std::abs(b)});
                    if (std::abs(a - b) > 1e-9 * scale)
                        throw Error("SpacetimeVectorField: component " + std::to_string(mu) +
                                    " is not spatially periodic (checked at t=" + std::to_string(t) +
                                    ", x=" + std::to_string(x) + ")");
                }
            }
        }
    }

    std::array<ExprPtr, 2> comp_;
    double circumference_;
};

/// Pointwise commutator of vector fields, [xi, zeta]^mu = xi^nu d_nu zeta^mu
/// - zeta^nu d_nu xi^mu, with exact first partials of the commutator built
/// from second-order dual evaluation of the operands.
inline VectorFieldValues lie_bracket_values(const SpacetimeVectorField& xi,
                                            const SpacetimeVectorField& zeta, double t, double x) {
    EvalGrad2 a[2], b[2];
    for (int mu = 0; mu < 2; ++mu) {
        a[mu] = eval_with_grad2(xi.component(mu), t, x);
        b[mu] = eval_with_grad2(zeta.component(mu), t, x);
    }
    auto d1 = [](const EvalGrad2& g, int nu) { return nu == 0 ? g.dt : g.dx; };
    auto d2 = [](const EvalGrad2& g, int nu, int rho) {
        if (nu == 0 && rho == 0) return g.dtt;
        if (nu == 1 && rho == 1) return g.dxx;
        return g.dtx;
    };
    VectorFieldValues r;
    for (int mu = 0; mu < 2; ++mu) {
        double v = 0;
        for (int nu = 0; nu < 2; ++nu)
            v += a[nu].value * d1(b[mu], nu) - b[nu].value * d1(a[mu], nu);
        r.xi[static_cast<std::size_t>(mu)] = v;
        for (int rho = 0; rho < 2; ++rho) {
            double dv = 0;
            for (int nu = 0; nu < 2; ++nu)
                dv += d1(a[nu], rho) * d1(b[mu], nu) + a[nu].value * d2(b[mu], nu, rho) -
                      d1(b[nu], rho) * d1(a[mu], nu) - b[nu].value * d2(a[mu], nu, rho);
            r.dxi[static_cast<std::size_t>(mu)][static_cast<std::size_t>(rho)] = dv;
        }
    }
    return r;
}

/// The commutator as a generator field usable in smeared functionals.
inline GeneratorField lie_bracket_field(const SpacetimeVectorField& xi,
                                        const SpacetimeVectorField& zeta) {
    return [xi, zeta](double t, double x) { return lie_bracket_values(xi, zeta, t, x); };
}

} // namespace covlat
