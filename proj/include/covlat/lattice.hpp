#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace covlat {

/// Base error type for the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Rejected inputs or configuration, as opposed to numerical failure.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Periodic 1-d lattice discretizing the spatial circle.
///
/// Sites are x_i = i * spacing, i = 0..n-1, with index arithmetic modulo n.
/// n must be even and >= 4 so the central stencil is well posed and the
/// k = 1 mode is representable.
struct Lattice {
    int n = 0;
    double circumference = 2.0 * std::numbers::pi;
    double spacing = 0.0;
    std::vector<double> sites;

    Lattice() = default;

    explicit Lattice(int n_, double circumference_ = 2.0 * std::numbers::pi)
        : n(n_), circumference(circumference_) {
        if (n < 4 || n % 2 != 0)
            throw ValidationError("Lattice: site count must be even and >= 4, got " +
                                  std::to_string(n));
        if (!(circumference > 0.0))
            throw ValidationError("Lattice: circumference must be positive");
        spacing = circumference / n;
        sites.resize(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) sites[static_cast<std::size_t>(i)] = i * spacing;
    }

    /// Periodic index wrap.
    int wrap(int i) const {
        int r = i % n;
        return r < 0 ? r + n : r;
    }

    double site(int i) const { return sites[static_cast<std::size_t>(wrap(i))]; }
};

inline void check_length(std::span<const double> f, const Lattice& lat, const char* what) {
    if (static_cast<int>(f.size()) != lat.n)
        throw Error(std::string(what) + ": length " + std::to_string(f.size()) +
                    " does not match lattice size " + std::to_string(lat.n));
}

/// Second-order central derivative on the periodic lattice:
/// (f_{i+1} - f_{i-1}) / (2 dx).  Note the wrap pair of a winding sequence
/// (e.g. f_i = x_i) reflects the periodic identification; winding data must
/// be reduced to its periodic part before differentiating.
inline std::vector<double> central_derivative(std::span<const double> f, const Lattice& lat) {
    check_length(f, lat, "central_derivative");
    const int n = lat.n;
    std::vector<double> df(static_cast<std::size_t>(n));
    const double inv2dx = 1.0 / (2.0 * lat.spacing);
    for (int i = 0; i < n; ++i) {
        const int ip = (i + 1) % n;
        const int im = (i + n - 1) % n;
        df[static_cast<std::size_t>(i)] =
            (f[static_cast<std::size_t>(ip)] - f[static_cast<std::size_t>(im)]) * inv2dx;
    }
    return df;
}

/// Rectangle-rule quadrature over the circle, sum_i f_i dx.  On a periodic
/// grid this coincides with the trapezoid rule and is spectrally accurate
/// for smooth periodic integrands.
inline double quadrature(std::span<const double> f, const Lattice& lat) {
    check_length(f, lat, "quadrature");
    double s = 0.0;
    for (double v : f) s += v;
    return s * lat.spacing;
}

} // namespace covlat
