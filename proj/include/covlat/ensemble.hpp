#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "covlat/canonical.hpp"
#include "covlat/gauge.hpp"
#include "covlat/rng.hpp"

namespace covlat {

// ---------------------------------------------------------------------------
// The generally covariant Gibbs state  rho ~ exp(-b H(xi))  over the
// parametrized phase space, realized in two modes:
//
//  - regulated:     all four sectors fluctuate; a Gaussian reference density
//                   on (tau, P) with declared widths makes the embedding
//                   sector normalizable.  Stationarity under the flow is then
//                   only approximate and is not asserted anywhere.
//  - matter-sector: (tau, P) frozen; reproduces the gauge-fixed equilibrium
//                   state, for which exact stationarity is testable.
//
// Sampling is random-walk Metropolis with auto-tuned per-sector scales
// (optionally Langevin drift on the matter sector), independent Philox
// streams per chain, and deterministic merge by chain index.
// ---------------------------------------------------------------------------

enum class GibbsMode { Regulated, MatterSector };

struct GibbsSpec {
    GibbsSpec(SpacetimeVectorField xi_, double b_, GibbsMode mode_, double mass_)
        : xi(std::move(xi_)), b(b_), mode(mode_), mass(mass_) {}

    SpacetimeVectorField xi;
    double b = 1.0;
    GibbsMode mode = GibbsMode::MatterSector;
    double mass = 1.0;
    // regulated mode
    double sigma_p = 1.0;
    double sigma_tau = 1.0;
    std::optional<Embedding> reference_tau; // Gaussian center; default identity slice
    // matter-sector mode
    std::optional<Embedding> frozen_tau; // default identity slice
    std::optional<std::vector<Vec2>> frozen_p; // default zero
    // m = 0 normalizability: freeze the constant and alternating phi modes
    bool pin_zero_mode = false;

    Embedding base_slice(const Lattice& lat) const {
        if (mode == GibbsMode::MatterSector)
            return frozen_tau ? *frozen_tau : Embedding::identity(lat);
        return reference_tau ? *reference_tau : Embedding::identity(lat);
    }

    std::vector<Vec2> base_p(const Lattice& lat) const {
        if (mode == GibbsMode::MatterSector && frozen_p) return *frozen_p;
        return std::vector<Vec2>(static_cast<std::size_t>(lat.n), Vec2{0, 0});
    }
};

/// log of the unnormalized Gibbs density.
inline double log_weight(const PhasePoint& state, const GibbsSpec& spec, const Lattice& lat) {
    double lw = -spec.b * comomentum_value(state, spec.xi, spec.mass, lat);
    if (spec.mode == GibbsMode::Regulated) {
        const Embedding ref = spec.reference_tau ? *spec.reference_tau : Embedding::identity(lat);
        const double wp = 1.0 / (2.0 * spec.sigma_p * spec.sigma_p);
        const double wt = 1.0 / (2.0 * spec.sigma_tau * spec.sigma_tau);
        for (std::size_t i = 0; i < state.p.size(); ++i) {
            const double dp2 = state.p[i][0] * state.p[i][0] + state.p[i][1] * state.p[i][1];
            const double d0 = state.tau.tau0[i] - ref.tau0[i];
            const double d1 = state.tau.tau1[i] - ref.tau1[i];
            lw -= lat.spacing * (wp * dp2 + wt * (d0 * d0 + d1 * d1));
        }
    }
    if (!std::isfinite(lw)) throw Error("log_weight: non-finite value");
    return lw;
}

struct SamplerConfig {
    std::uint64_t seed = 0;
    int chains = 4;
    int samples_per_chain = 2500; // retained per chain
    int burn_in = 2000;
    int thin = 4;
    double target_accept = 0.3;
    bool langevin = false; // Langevin (MALA) drift on the matter sector
    double scale_matter = 0.0; // 0 = auto initial
    double scale_tau = 0.0;
    double scale_p = 0.0;
    int threads = 1;
};

struct ChainMeta {
    int index = 0;
    double acceptance = 0.0;
    double scale_matter = 0.0, scale_tau = 0.0, scale_p = 0.0;
};

struct SampleSet {
    std::vector<PhasePoint> states; // merged in chain order
    std::vector<double> log_weights;
    int chains = 0;
    int per_chain = 0;
    std::uint64_t seed = 0;
    int burn_in = 0;
    int thin = 1;
    std::vector<ChainMeta> meta;
    std::vector<std::string> warnings;
};

struct Estimate {
    double mean = 0.0;
    double se = 0.0;
};

namespace detail {

/// Batch-means estimate over a chain-ordered value sequence.
inline Estimate batch_means(const std::vector<double>& values, int chains, int per_chain) {
    if (values.empty() || chains <= 0 || per_chain <= 0) throw Error("estimate: empty sample set");
    const int nb = per_chain >= 20 ? 10 : std::max(2, per_chain / 2);
    const int blen = per_chain / nb;
    if (blen < 1) throw Error("estimate: too few samples per chain for batch means");
    std::vector<double> bm;
    bm.reserve(static_cast<std::size_t>(chains * nb));
    double total = 0.0;
    std::size_t count = 0;
    for (int c = 0; c < chains; ++c) {
        const std::size_t base = static_cast<std::size_t>(c) * per_chain;
        for (int b = 0; b < nb; ++b) {
            double s = 0.0;
            for (int k = 0; k < blen; ++k) s += values[base + b * blen + k];
            bm.push_back(s / blen);
            total += s;
            count += static_cast<std::size_t>(blen);
        }
    }
    const double mean = total / static_cast<double>(count);
    double var = 0.0;
    for (double v : bm) var += (v - mean) * (v - mean);
    var /= static_cast<double>(bm.size() - 1);
    return {mean, std::sqrt(var / static_cast<double>(bm.size()))};
}

struct SampleTarget {
    std::function<double(const PhasePoint&)> logw;
    bool vary_tau = false;
    bool vary_p = false;
    bool pin_zero_mode = false;
    PhasePoint initial;
    double mass = 1.0;
    SpacetimeVectorField xi;
    double b = 1.0;
};

/// Timelike-positivity of the matter quadratic form for the weight
/// exp(-b integral (N Hperp + N1 Hpar)): requires N > 0 and N/sqrt(Q) > |N1|
/// sitewise.
inline void check_normalizable(const GibbsSpec& spec, const Lattice& lat) {
    if (!(spec.b > 0.0)) throw ValidationError("sample: inverse temperature b must be positive");
    if (!(spec.mass > 0.0) && !spec.pin_zero_mode)
        throw ValidationError("sample: massless matter sector is non-normalizable without the zero-mode pin");
    if (spec.mode == GibbsMode::Regulated && (!(spec.sigma_p > 0.0) || !(spec.sigma_tau > 0.0)))
        throw ValidationError("sample: regulator widths must be positive");
    const Embedding slice = spec.base_slice(lat);
    const SliceGeometry g = slice_geometry(slice, lat);
    for (std::size_t i = 0; i < g.q11.size(); ++i) {
        const Vec2 v = spec.xi.value(slice.tau0[i], slice.tau1[i]);
        const double N = -mink_dot(v, g.normal_up[i]);
        const double N1 = mink_dot(v, g.tangent[i]) / g.q11[i];
        if (!(N > 0.0) || !(N / g.sqrt_q[i] > std::abs(N1) * (1.0 + 1e-12)))
            throw ValidationError("sample: generator is not future-timelike at site " + std::to_string(i) +
                        "; the Gibbs weight is non-normalizable");
    }
}

/// Remove the constant and alternating components (the m = 0 kernel of the
/// central-stencil quadratic form) from a phi increment.
inline void project_pin(std::vector<double>& dphi) {
    double mean = 0.0, alt = 0.0;
    for (std::size_t i = 0; i < dphi.size(); ++i) {
        mean += dphi[i];
        alt += (i % 2 == 0 ? 1.0 : -1.0) * dphi[i];
    }
    mean /= static_cast<double>(dphi.size());
    alt /= static_cast<double>(dphi.size());
    for (std::size_t i = 0; i < dphi.size(); ++i)
        dphi[i] -= mean + (i % 2 == 0 ? 1.0 : -1.0) * alt;
}

struct ChainOutput {
    std::vector<PhasePoint> states;
    std::vector<double> logw;
    ChainMeta meta;
    std::vector<std::string> warnings;
};

inline ChainOutput run_chain(const SampleTarget& target, const SamplerConfig& cfg,
                             const Lattice& lat, int chain_index, std::uint64_t stream_base) {
    Philox4x32 rng(cfg.seed, stream_base + static_cast<std::uint64_t>(chain_index));
    const auto n = static_cast<std::size_t>(lat.n);

    PhasePoint cur = target.initial;
    double cur_lw = target.logw(cur);

    double sm = cfg.scale_matter > 0 ? cfg.scale_matter
                                     : 0.5 / std::sqrt(target.b * static_cast<double>(lat.n));
    double st = cfg.scale_tau > 0 ? cfg.scale_tau : 0.1 / std::sqrt(static_cast<double>(lat.n));
    double sp = cfg.scale_p > 0 ? cfg.scale_p : 0.5 / std::sqrt(static_cast<double>(lat.n));

    // MALA bookkeeping: gradient of log-density w.r.t. matter site values
    auto matter_grad = [&](const PhasePoint& s, std::vector<double>& gphi,
                           std::vector<double>& gpi) {
        const SmearedFunctional H = comomentum(s, target.xi, target.mass, lat);
        gphi.resize(n);
        gpi.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            gphi[i] = -target.b * H.grad_phi[i];
            gpi[i] = -target.b * H.grad_pi[i];
        }
        if (target.pin_zero_mode) project_pin(gphi);
    };
    std::vector<double> cur_gphi, cur_gpi;
    if (cfg.langevin) matter_grad(cur, cur_gphi, cur_gpi);

    const int total_steps = cfg.burn_in + cfg.samples_per_chain * cfg.thin;
    const int tune_interval = 50;
    long accepted = 0, proposed = 0;
    long tune_accepted = 0, tune_proposed = 0;

    ChainOutput out;
    out.states.reserve(static_cast<std::size_t>(cfg.samples_per_chain));
    out.logw.reserve(static_cast<std::size_t>(cfg.samples_per_chain));

    std::vector<double> dphi(n), dpi(n);
    for (int step = 0; step < total_steps; ++step) {
        PhasePoint prop = cur;
        double log_q_ratio = 0.0; // log q(cur | prop) - log q(prop | cur)

        if (cfg.langevin) {
            const double eps = sm;
            for (std::size_t i = 0; i < n; ++i) {
                dphi[i] = eps * rng.normal();
                dpi[i] = eps * rng.normal();
            }
            if (target.pin_zero_mode) project_pin(dphi);
            for (std::size_t i = 0; i < n; ++i) {
                prop.phi[i] = cur.phi[i] + 0.5 * eps * eps * cur_gphi[i] + dphi[i];
                prop.pi[i] = cur.pi[i] + 0.5 * eps * eps * cur_gpi[i] + dpi[i];
            }
        } else {
            for (std::size_t i = 0; i < n; ++i) {
                dphi[i] = sm * rng.normal();
                dpi[i] = sm * rng.normal();
            }
            if (target.pin_zero_mode) project_pin(dphi);
            for (std::size_t i = 0; i < n; ++i) {
                prop.phi[i] += dphi[i];
                prop.pi[i] += dpi[i];
            }
        }
        if (target.vary_tau) {
            for (std::size_t i = 0; i < n; ++i) {
                prop.tau.tau0[i] += st * rng.normal();
                prop.tau.tau1[i] += st * rng.normal();
            }
        }
        if (target.vary_p) {
            for (std::size_t i = 0; i < n; ++i) {
                prop.p[i][0] += sp * rng.normal();
                prop.p[i][1] += sp * rng.normal();
            }
        }

        bool ok = true;
        double prop_lw = 0.0;
        std::vector<double> prop_gphi, prop_gpi;
        try {
            prop_lw = target.logw(prop);
            if (cfg.langevin) {
                matter_grad(prop, prop_gphi, prop_gpi);
                const double eps = sm;
                double fwd = 0.0, rev = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    const double f1 = prop.phi[i] - cur.phi[i] - 0.5 * eps * eps * cur_gphi[i];
                    const double f2 = prop.pi[i] - cur.pi[i] - 0.5 * eps * eps * cur_gpi[i];
                    const double r1 = cur.phi[i] - prop.phi[i] - 0.5 * eps * eps * prop_gphi[i];
                    const double r2 = cur.pi[i] - prop.pi[i] - 0.5 * eps * eps * prop_gpi[i];
                    fwd += f1 * f1 + f2 * f2;
                    rev += r1 * r1 + r2 * r2;
                }
                log_q_ratio = (fwd - rev) / (2.0 * eps * eps);
            }
        } catch (const Error&) {
            ok = false; // outside the admissible region (e.g. non-spacelike slice)
        }

        ++proposed;
        ++tune_proposed;
        if (ok) {
            const double log_alpha = prop_lw - cur_lw + log_q_ratio;
            if (std::log(rng.uniform01_open_below()) < log_alpha) {
                cur = std::move(prop);
                cur_lw = prop_lw;
                if (cfg.langevin) {
                    cur_gphi = std::move(prop_gphi);
                    cur_gpi = std::move(prop_gpi);
                }
                ++accepted;
                ++tune_accepted;
            }
        }

        // scale adaptation during burn-in only (detailed balance holds after)
        if (step < cfg.burn_in && tune_proposed >= tune_interval) {
            const double rate = static_cast<double>(tune_accepted) / tune_proposed;
            const double f = std::exp(0.6 * (rate - cfg.target_accept));
            sm = std::clamp(sm * f, 1e-8, 1e3);
            if (target.vary_tau) st = std::clamp(st * f, 1e-8, 1e3);
            if (target.vary_p) sp = std::clamp(sp * f, 1e-8, 1e3);
            tune_accepted = 0;
            tune_proposed = 0;
        }
        if (step >= cfg.burn_in && (step - cfg.burn_in) % cfg.thin == cfg.thin - 1) {
            out.states.push_back(cur);
            out.logw.push_back(cur_lw);
        }
    }

    out.meta = {chain_index, static_cast<double>(accepted) / std::max(1L, proposed), sm, st, sp};
    if (out.meta.acceptance < 0.1 || out.meta.acceptance > 0.7)
        out.warnings.push_back("chain " + std::to_string(chain_index) + ": acceptance rate " +
                               std::to_string(out.meta.acceptance) +
                               " outside [0.1, 0.7] after tuning");
    return out;
}

inline SampleSet run_chains(const SampleTarget& target, const SamplerConfig& cfg,
                            const Lattice& lat, std::uint64_t stream_base) {
    std::vector<ChainOutput> results(static_cast<std::size_t>(cfg.chains));
    const int workers = std::max(1, std::min(cfg.threads, cfg.chains));
    if (workers == 1) {
        for (int c = 0; c < cfg.chains; ++c)
            results[static_cast<std::size_t>(c)] = run_chain(target, cfg, lat, c, stream_base);
    } else {
        std::atomic<int> next{0};
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (int c = next.fetch_add(1); c < cfg.chains; c = next.fetch_add(1))
                    results[static_cast<std::size_t>(c)] =
                        run_chain(target, cfg, lat, c, stream_base);
            });
        }
        for (auto& th : pool) th.join();
    }
    SampleSet set;
    set.chains = cfg.chains;
    set.per_chain = cfg.samples_per_chain;
    set.seed = cfg.seed;
    set.burn_in = cfg.burn_in;
    set.thin = cfg.thin;
    for (auto& r : results) { // merge deterministically, by chain index
        set.states.insert(set.states.end(), std::make_move_iterator(r.states.begin()),
                          std::make_move_iterator(r.states.end()));
        set.log_weights.insert(set.log_weights.end(), r.logw.begin(), r.logw.end());
        set.meta.push_back(r.meta);
        set.warnings.insert(set.warnings.end(), r.warnings.begin(), r.warnings.end());
    }
    return set;
}

} // namespace detail

/// MCMC sample of the Gibbs state.  Identical (config, seed) give bit-identical
/// results for any thread count.
inline SampleSet sample(const GibbsSpec& spec, const SamplerConfig& cfg, const Lattice& lat) {
    detail::check_normalizable(spec, lat);
    detail::SampleTarget target{
        [spec, lat](const PhasePoint& s) { return log_weight(s, spec, lat); },
        spec.mode == GibbsMode::Regulated,
        spec.mode == GibbsMode::Regulated,
        spec.pin_zero_mode,
        PhasePoint{},
        spec.mass,
        spec.xi,
        spec.b};
    target.initial.phi.assign(static_cast<std::size_t>(lat.n), 0.0);
    target.initial.pi.assign(static_cast<std::size_t>(lat.n), 0.0);
    target.initial.tau = spec.base_slice(lat);
    target.initial.p = spec.base_p(lat);
    return detail::run_chains(target, cfg, lat, 0);
}

/// Batch-means mean and standard error of an observable over a sample set.
inline Estimate estimate(const std::function<double(const PhasePoint&)>& observable,
                         const SampleSet& set) {
    if (set.states.empty()) throw Error("estimate: empty sample set");
    std::vector<double> values(set.states.size());
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = observable(set.states[i]);
    return detail::batch_means(values, set.chains, set.per_chain);
}

// ---------------------------------------------------------------------------
// Thermodynamic potentials between two Gibbs specs.
//
// log Z differences come from staged free-energy perturbation along the
// linear exponent path  l_s = -(1-s) b_i H(xi_i) - s b_f H(xi_f)  (+ the
// common regulator), cross-checked by thermodynamic integration of
// E_s[dl/ds] over the same grid.  Q = -d_b log Z = E[H(xi)]; entropy
// differences follow from S = log Z + b E[H].  Work W = H(xi_f) - H(xi_i).
// All estimates carry batch-means standard errors.
// ---------------------------------------------------------------------------

struct ThermoStage {
    double s = 0.0;
    double ess = 0.0;      // effective sample size of the forward reweighting
    double dlogz = 0.0;    // FEP increment to the next stage
    double dlogz_se = 0.0;
};

struct ThermoReport {
    double b_i = 0.0, b_f = 0.0;
    double logZ_diff = 0.0, logZ_diff_se = 0.0;       // staged FEP
    double logZ_diff_ti = 0.0, logZ_diff_ti_se = 0.0; // thermodynamic integration
    double delta_F = 0.0, delta_F_se = 0.0;           // F = -log Z
    double Q_i = 0.0, Q_i_se = 0.0;                   // E_i[H(xi_i)]
    double Q_f = 0.0, Q_f_se = 0.0;                   // E_f[H(xi_f)]
    double delta_S = 0.0, delta_S_se = 0.0;
    double kl = 0.0, kl_se = 0.0;                     // D(rho_i | rho_f) >= 0
    double work_mean = 0.0, work_se = 0.0;            // E_i[W]
    double clausius_lhs = 0.0, clausius_lhs_se = 0.0; // delta_S - b_f (Q_f - Q_i)
    std::vector<ThermoStage> stages;
};

struct ThermoConfig {
    SamplerConfig sampler;
    int stages = 8; // FEP/TI grid intervals
};

namespace detail {

struct StageSamples {
    std::vector<double> e_i, e_f; // H(xi_i), H(xi_f) per retained sample
    int chains = 0, per_chain = 0;
};

inline Estimate log_mean_exp(const std::vector<double>& dl, int chains, int per_chain,
                             double* ess_out) {
    double mx = dl[0];
    for (double v : dl) mx = std::max(mx, v);
    std::vector<double> w(dl.size());
    double sw = 0.0, sw2 = 0.0;
    for (std::size_t i = 0; i < dl.size(); ++i) {
        w[i] = std::exp(dl[i] - mx);
        sw += w[i];
        sw2 += w[i] * w[i];
    }
    if (ess_out) *ess_out = sw * sw / sw2;
    const Estimate e = batch_means(w, chains, per_chain);
    return {std::log(e.mean) + mx, e.se / e.mean};
}

} // namespace detail

/// Free-energy perturbation, thermodynamic integration and the derived
/// potential differences between spec_i and spec_f.  Refuses when any stage
/// reweighting has effective sample size below 10.
inline ThermoReport thermo(const GibbsSpec& spec_i, const GibbsSpec& spec_f,
                           const ThermoConfig& cfg, const Lattice& lat) {
    if (spec_i.mode != spec_f.mode) throw ValidationError("thermo: specs must share a mode");
    if (spec_i.mass != spec_f.mass) throw ValidationError("thermo: specs must share the mass");
    if (spec_i.mode == GibbsMode::Regulated &&
        (spec_i.sigma_p != spec_f.sigma_p || spec_i.sigma_tau != spec_f.sigma_tau))
        throw ValidationError("thermo: regulated specs must share the regulator widths");
    detail::check_normalizable(spec_i, lat);
    detail::check_normalizable(spec_f, lat);

    const int K = std::max(1, cfg.stages);
    const double bi = spec_i.b, bf = spec_f.b;

    std::vector<detail::StageSamples> stage(static_cast<std::size_t>(K + 1));
    for (int k = 0; k <= K; ++k) {
        const double s = static_cast<double>(k) / K;
        // stage target: exponent interpolated between the endpoint states
        detail::SampleTarget target{
            [&spec_i, &spec_f, s, bi, bf, &lat](const PhasePoint& st) {
                const double ei = comomentum_value(st, spec_i.xi, spec_i.mass, lat);
                const double ef = comomentum_value(st, spec_f.xi, spec_f.mass, lat);
                double lw = -(1.0 - s) * bi * ei - s * bf * ef;
                if (spec_i.mode == GibbsMode::Regulated) {
                    // common regulator (widths/reference from spec_i; must match spec_f)
                    GibbsSpec reg = spec_i;
                    reg.b = 0.0;
                    lw += log_weight(st, reg, lat);
                }
                if (!std::isfinite(lw)) throw Error("thermo: non-finite stage weight");
                return lw;
            },
            spec_i.mode == GibbsMode::Regulated,
            spec_i.mode == GibbsMode::Regulated,
            spec_i.pin_zero_mode,
            PhasePoint{},
            spec_i.mass,
            spec_i.xi,
            (1.0 - s) * bi + s * bf};
        target.initial.phi.assign(static_cast<std::size_t>(lat.n), 0.0);
        target.initial.pi.assign(static_cast<std::size_t>(lat.n), 0.0);
        target.initial.tau = spec_i.base_slice(lat);
        target.initial.p = spec_i.base_p(lat);

        const std::uint64_t stream_base = (static_cast<std::uint64_t>(k) + 1) << 32;
        const SampleSet set = detail::run_chains(target, cfg.sampler, lat, stream_base);
        auto& st = stage[static_cast<std::size_t>(k)];
        st.chains = set.chains;
        st.per_chain = set.per_chain;
        st.e_i.resize(set.states.size());
        st.e_f.resize(set.states.size());
        for (std::size_t j = 0; j < set.states.size(); ++j) {
            st.e_i[j] = comomentum_value(set.states[j], spec_i.xi, spec_i.mass, lat);
            st.e_f[j] = comomentum_value(set.states[j], spec_f.xi, spec_f.mass, lat);
        }
    }

    ThermoReport rep;
    rep.b_i = bi;
    rep.b_f = bf;

    // staged FEP
    const double ds = 1.0 / K;
    for (int k = 0; k < K; ++k) {
        const auto& st = stage[static_cast<std::size_t>(k)];
        std::vector<double> dl(st.e_i.size());
        for (std::size_t j = 0; j < dl.size(); ++j)
            dl[j] = ds * (bi * st.e_i[j] - bf * st.e_f[j]);
        double ess = 0.0;
        const Estimate inc = detail::log_mean_exp(dl, st.chains, st.per_chain, &ess);
        if (ess < 10.0)
            throw Error("thermo: reweighting overlap too small at stage " + std::to_string(k) +
                        " (effective sample size " + std::to_string(ess) + " < 10)");
        rep.stages.push_back({static_cast<double>(k) / K, ess, inc.mean, inc.se});
        rep.logZ_diff += inc.mean;
        rep.logZ_diff_se += inc.se * inc.se;
    }
    rep.logZ_diff_se = std::sqrt(rep.logZ_diff_se);

    // thermodynamic integration over the same grid (trapezoid)
    for (int k = 0; k <= K; ++k) {
        const auto& st = stage[static_cast<std::size_t>(k)];
        std::vector<double> g(st.e_i.size());
        for (std::size_t j = 0; j < g.size(); ++j) g[j] = bi * st.e_i[j] - bf * st.e_f[j];
        const Estimate e = detail::batch_means(g, st.chains, st.per_chain);
        const double wgt = (k == 0 || k == K) ? ds / 2.0 : ds;
        rep.logZ_diff_ti += wgt * e.mean;
        rep.logZ_diff_ti_se += wgt * wgt * e.se * e.se;
    }
    rep.logZ_diff_ti_se = std::sqrt(rep.logZ_diff_ti_se);

    // endpoint potentials
    const auto& s0 = stage.front();
    const auto& sK = stage.back();
    const Estimate qi = detail::batch_means(s0.e_i, s0.chains, s0.per_chain);
    const Estimate qf = detail::batch_means(sK.e_f, sK.chains, sK.per_chain);
    rep.Q_i = qi.mean;
    rep.Q_i_se = qi.se;
    rep.Q_f = qf.mean;
    rep.Q_f_se = qf.se;

    rep.delta_F = -rep.logZ_diff;
    rep.delta_F_se = rep.logZ_diff_se;

    rep.delta_S = rep.logZ_diff + bf * rep.Q_f - bi * rep.Q_i;
    rep.delta_S_se = std::sqrt(rep.logZ_diff_se * rep.logZ_diff_se +
                               bf * bf * rep.Q_f_se * rep.Q_f_se +
                               bi * bi * rep.Q_i_se * rep.Q_i_se);

    // KL(i|f) = dlogZ + E_i[bf H_f - bi H_i]
    {
        std::vector<double> d(s0.e_i.size());
        for (std::size_t j = 0; j < d.size(); ++j) d[j] = bf * s0.e_f[j] - bi * s0.e_i[j];
        const Estimate e = detail::batch_means(d, s0.chains, s0.per_chain);
        rep.kl = rep.logZ_diff + e.mean;
        rep.kl_se = std::sqrt(rep.logZ_diff_se * rep.logZ_diff_se + e.se * e.se);
    }

    // work observable over the initial ensemble
    {
        std::vector<double> w(s0.e_i.size());
        for (std::size_t j = 0; j < w.size(); ++j) w[j] = s0.e_f[j] - s0.e_i[j];
        const Estimate e = detail::batch_means(w, s0.chains, s0.per_chain);
        rep.work_mean = e.mean;
        rep.work_se = e.se;
    }

    rep.clausius_lhs = rep.delta_S - bf * (rep.Q_f - rep.Q_i);
    rep.clausius_lhs_se =
        std::sqrt(rep.delta_S_se * rep.delta_S_se + bf * bf * (rep.Q_f_se * rep.Q_f_se +
                                                               rep.Q_i_se * rep.Q_i_se));
    return rep;
}

/// Q at inverse temperature b from a central finite difference of reweighted
/// log Z across b (1 +- delta_rel), for the gradient-consistency check
/// Q = -d_b log Z = E_b[H(xi)].
inline Estimate q_from_logz_fd(const SampleSet& set, const GibbsSpec& spec, const Lattice& lat,
                               double delta_rel = 0.05) {
    const double db = delta_rel * spec.b;
    std::vector<double> e(set.states.size());
    for (std::size_t j = 0; j < e.size(); ++j)
        e[j] = comomentum_value(set.states[j], spec.xi, spec.mass, lat);
    std::vector<double> up(e.size()), dn(e.size());
    for (std::size_t j = 0; j < e.size(); ++j) {
        up[j] = -db * e[j];
        dn[j] = +db * e[j];
    }
    double ess = 0.0;
    const Estimate lu = detail::log_mean_exp(up, set.chains, set.per_chain, &ess);
    const Estimate ld = detail::log_mean_exp(dn, set.chains, set.per_chain, &ess);
    return {-(lu.mean - ld.mean) / (2.0 * db),
            std::sqrt(lu.se * lu.se + ld.se * ld.se) / (2.0 * db)};
}

// ---------------------------------------------------------------------------
// Stationarity of the matter-sector Gibbs state under the gauge-fixed flow.
// ---------------------------------------------------------------------------

struct StationarityReport {
    double flow_time = 0.0;
    std::vector<std::string> names;
    std::vector<double> mean_before, se_before;
    std::vector<double> mean_after, se_after;
    std::vector<double> deviation; // |after - before| / sqrt(se_b^2 + se_a^2)
    double max_deviation = 0.0;
};

/// Six-observable battery of matter functionals.
inline std::vector<std::pair<std::string, std::function<double(const PhasePoint&)>>>
observable_battery(double mass, const Lattice& lat) {
    auto quad = [&lat](const std::vector<double>& f) {
        double s = 0.0;
        for (double v : f) s += v * v;
        return s * lat.spacing;
    };
    std::vector<std::pair<std::string, std::function<double(const PhasePoint&)>>> batt;
    batt.emplace_back("H_bar", [mass, lat](const PhasePoint& s) {
        const auto [hp, hq] = constraint_densities(s, mass, lat);
        return quadrature(hp, lat);
    });
    batt.emplace_back("phi_sq", [quad](const PhasePoint& s) { return quad(s.phi); });
    batt.emplace_back("pi_sq", [quad](const PhasePoint& s) { return quad(s.pi); });
    batt.emplace_back("grad_phi_sq", [quad, lat](const PhasePoint& s) {
        return quad(central_derivative(s.phi, lat));
    });
    batt.emplace_back("mode1_power", [lat](const PhasePoint& s) {
        double c = 0.0, d = 0.0;
        for (int i = 0; i < lat.n; ++i) {
            c += s.phi[static_cast<std::size_t>(i)] * std::cos(lat.sites[static_cast<std::size_t>(i)]);
            d += s.phi[static_cast<std::size_t>(i)] * std::sin(lat.sites[static_cast<std::size_t>(i)]);
        }
        c *= lat.spacing;
        d *= lat.spacing;
        return c * c + d * d;
    });
    batt.emplace_back("phi_pi", [lat](const PhasePoint& s) {
        double v = 0.0;
        for (std::size_t i = 0; i < s.phi.size(); ++i) v += s.phi[i] * s.pi[i];
        return v * lat.spacing;
    });
    return batt;
}

/// Push every sample through the gauge-fixed (timegauge) flow for time s and
/// compare the battery before and after via paired differences.  Exact
/// stationarity of exp(-b Hbar) under its own flow leaves every deviation at
/// the Monte Carlo + integrator noise level.
inline StationarityReport stationarity_test(const GibbsSpec& spec, const SamplerConfig& cfg,
                                            double flow_time, const Lattice& lat,
                                            double flow_h = 0.01) {
    if (spec.mode != GibbsMode::MatterSector)
        throw ValidationError("stationarity_test: requires the matter-sector mode");
    const Embedding slice = spec.base_slice(lat);
    for (std::size_t i = 0; i < slice.tau0.size(); ++i) {
        if (std::abs(slice.tau0[i] - slice.tau0[0]) > 1e-12 ||
            std::abs(slice.tau1[i] - lat.sites[i]) > 1e-12)
            throw ValidationError("stationarity_test: requires a frozen identity slice");
        const Vec2 v = spec.xi.value(slice.tau0[i], slice.tau1[i]);
        if (std::abs(v[0] - 1.0) > 1e-12 || std::abs(v[1]) > 1e-12)
            throw ValidationError("stationarity_test: requires xi = (1, 0) on the slice");
    }

    const SampleSet set = sample(spec, cfg, lat);
    const auto batt = observable_battery(spec.mass, lat);
    const GaugeSpec tg = GaugeSpec::timegauge();

    StationarityReport rep;
    rep.flow_time = flow_time;
    std::vector<std::vector<double>> before_vals(batt.size(),
                                                 std::vector<double>(set.states.size(), 0.0));
    auto after_vals = before_vals;
    for (std::size_t j = 0; j < set.states.size(); ++j) {
        const PhasePoint& before = set.states[j];
        PhasePoint after = before;
        if (flow_time > 0.0) {
            const ReducedTrace tr = reduced_evolve(before.phi, before.pi, tg, spec.mass, flow_time,
                                                   flow_h, lat, 1 << 30, before.tau.tau0[0]);
            after.phi = tr.phi.back();
            after.pi = tr.pi.back();
        }
        for (std::size_t o = 0; o < batt.size(); ++o) {
            before_vals[o][j] = batt[o].second(before);
            after_vals[o][j] = batt[o].second(after);
        }
    }
    for (std::size_t o = 0; o < batt.size(); ++o) {
        const Estimate eb = detail::batch_means(before_vals[o], set.chains, set.per_chain);
        const Estimate ea = detail::batch_means(after_vals[o], set.chains, set.per_chain);
        rep.names.push_back(batt[o].first);
        rep.mean_before.push_back(eb.mean);
        rep.se_before.push_back(eb.se);
        rep.mean_after.push_back(ea.mean);
        rep.se_after.push_back(ea.se);
        const double denom = std::sqrt(eb.se * eb.se + ea.se * ea.se);
        const double dev = denom > 0 ? std::abs(ea.mean - eb.mean) / denom : 0.0;
        rep.deviation.push_back(dev);
        rep.max_deviation = std::max(rep.max_deviation, dev);
    }
    return rep;
}

} // namespace covlat
