// covlat: covariant statistical mechanics of a parametrized scalar field on a
// periodic 1+1 lattice.  Subcommands: check, evolve, gauge-reduce, sample,
// thermo, verify.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <algorithm>
#include <iostream>
#include <numbers>

#include "covlat/dynamics.hpp"
#include "covlat/ensemble.hpp"
#include "covlat/gauge.hpp"
#include "covlat/io.hpp"
#include "covlat/multisym.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace covlat;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitNumerical = 2;

struct CommonOpts {
    std::string config_path;
    std::string out_dir = "out";
    int n = 64;
    double length = 2.0 * std::numbers::pi;
    double mass = 1.0;
    long long seed = 0;
    int threads = 1;
    bool seed_given = false;
};

void attach_common(CLI::App* cmd, CommonOpts& c) {
    cmd->add_option("--config", c.config_path, "TOML config file; flags override");
    cmd->add_option("--out", c.out_dir, "output directory");
    cmd->add_option("--n", c.n, "lattice site count (even, >= 4)");
    cmd->add_option("--length", c.length, "spatial circumference");
    cmd->add_option("--m,--mass", c.mass, "scalar mass");
    cmd->add_option("--seed", c.seed, "RNG seed")->each([&c](const std::string&) {
        c.seed_given = true;
    });
    cmd->add_option("--threads", c.threads, "worker threads for chain execution");
}

/// defaults <- config file <- CLI flags; returns the resolved common table.
TomlTable resolve_common(const CLI::App* cmd, CommonOpts& c) {
    TomlTable file;
    if (!c.config_path.empty()) file = parse_toml_file(c.config_path);
    auto flag_passed = [cmd](const char* flag) {
        const CLI::Option* o = cmd->get_option_no_throw(flag);
        return o != nullptr && o->count() > 0;
    };
    auto use_file = [&](const char* flag, const char* key, auto setter) {
        if (!flag_passed(flag))
            if (auto it = file.find(key); it != file.end()) setter(it->second);
    };
    use_file("--n", "lattice.n", [&](const TomlValue& v) { c.n = static_cast<int>(v.as_integer()); });
    use_file("--length", "lattice.circumference",
             [&](const TomlValue& v) { c.length = v.as_number(); });
    use_file("--m", "model.mass", [&](const TomlValue& v) { c.mass = v.as_number(); });
    use_file("--out", "output.directory",
             [&](const TomlValue& v) { c.out_dir = v.as_string(); });
    use_file("--threads", "run.threads",
             [&](const TomlValue& v) { c.threads = static_cast<int>(v.as_integer()); });
    if (!flag_passed("--seed")) {
        if (auto it = file.find("run.seed"); it != file.end()) {
            c.seed = it->second.as_integer();
            c.seed_given = true;
        }
    }
    TomlTable resolved;
    resolved["lattice.n"] = TomlValue::of_integer(c.n);
    resolved["lattice.circumference"] = TomlValue::of_float(c.length);
    resolved["model.mass"] = TomlValue::of_float(c.mass);
    resolved["output.directory"] = TomlValue::of_string(c.out_dir);
    resolved["run.seed"] = TomlValue::of_integer(c.seed);
    // worker count never changes results, so it stays out of the hashed config
    return resolved;
}

std::uint64_t finalize_config(const TomlTable& resolved, const CommonOpts& c) {
    fs::create_directories(c.out_dir);
    std::ofstream out(fs::path(c.out_dir) / "resolved_config.toml");
    out << serialize_toml(resolved);
    return config_hash(resolved);
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path);
    out << j.dump(2) << '\n';
}

std::vector<double> field_from_expr(const std::string& src, const Lattice& lat) {
    const ExprPtr e = parse_expr(src);
    std::vector<double> f(static_cast<std::size_t>(lat.n));
    for (int i = 0; i < lat.n; ++i)
        f[static_cast<std::size_t>(i)] = eval(*e, 0.0, lat.sites[static_cast<std::size_t>(i)]);
    return f;
}

double fitted_order(const std::vector<double>& ns, const std::vector<double>& errs) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const auto m = static_cast<double>(ns.size());
    for (std::size_t i = 0; i < ns.size(); ++i) {
        const double x = -std::log(ns[i]);
        const double y = std::log(std::max(errs[i], 1e-300));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

// --- check algebra ----------------------------------------------------------

int run_check_algebra(CommonOpts& c, const CLI::App* cmd, std::vector<int> ns) {
    TomlTable resolved = resolve_common(cmd, c);
    {
        TomlValue list;
        list.kind = TomlValue::Kind::Array;
        for (int n : ns) list.array.push_back(TomlValue::of_integer(n));
        resolved["check.n"] = list;
    }
    const std::uint64_t hash = finalize_config(resolved, c);

    // fixed off-shell fixture with lattice-independent Fourier data
    Philox4x32 rng(static_cast<std::uint64_t>(c.seed), 0);
    struct Mode {
        double c1, s1, c2, s2, mean;
        double at(double x) const {
            return mean + c1 * std::cos(x) + s1 * std::sin(x) + c2 * std::cos(2 * x) +
                   s2 * std::sin(2 * x);
        }
    };
    auto draw = [&rng](double amp, double mean) {
        return Mode{amp * (2 * rng.uniform01() - 1), amp * (2 * rng.uniform01() - 1),
                    amp * (2 * rng.uniform01() - 1) / 2, amp * (2 * rng.uniform01() - 1) / 2,
                    mean * (2 * rng.uniform01() - 1)};
    };
    const Mode mphi = draw(0.8, 0.3), mpi = draw(0.8, 0.3), mt0 = draw(0.15, 0.2),
               mt1 = draw(0.15, 0.0), mp0 = draw(0.5, 0.3), mp1 = draw(0.5, 0.3);

    const auto xi = SpacetimeVectorField::parse("1 + 0.2*cos(x)", "0");
    const auto zeta = SpacetimeVectorField::parse("0.1*t", "0.3*sin(x)");

    CsvWriter csv(fs::path(c.out_dir) / "algebra_residuals.csv",
                  {"n", "dirac_shift_shift", "dirac_shift_lapse", "dirac_lapse_lapse",
                   "equivariance"},
                  hash);
    std::vector<double> nsd;
    std::vector<std::vector<double>> errs(4);
    for (int n : ns) {
        const Lattice lat(n, c.length);
        PhasePoint st;
        st.phi.resize(static_cast<std::size_t>(n));
        st.pi.resize(static_cast<std::size_t>(n));
        std::vector<double> t0(static_cast<std::size_t>(n)), t1(t0.size());
        st.p.resize(t0.size());
        std::vector<double> N(t0.size(), 1.0), M(t0.size()), Nv(t0.size()), Mv(t0.size());
        for (int i = 0; i < n; ++i) {
            const auto iu = static_cast<std::size_t>(i);
            const double x = lat.sites[iu];
            st.phi[iu] = mphi.at(x);
            st.pi[iu] = mpi.at(x);
            t0[iu] = mt0.at(x);
            t1[iu] = x + mt1.at(x);
            st.p[iu] = {mp0.at(x), mp1.at(x)};
            M[iu] = std::cos(x);
            Nv[iu] = std::sin(x);
            Mv[iu] = std::cos(2 * x);
        }
        st.tau = Embedding{std::move(t0), std::move(t1)};
        const auto r = verify_dirac_algebra(st, N, M, Nv, Mv, c.mass, lat);
        const double eq = verify_equivariance(st, xi, zeta, c.mass, lat);
        csv.row({static_cast<double>(n), r[0], r[1], r[2], eq});
        nsd.push_back(n);
        for (int k = 0; k < 3; ++k)
            errs[static_cast<std::size_t>(k)].push_back(r[static_cast<std::size_t>(k)]);
        errs[3].push_back(eq);
    }

    json orders;
    orders["config_hash"] = hash_hex(hash);
    const char* names[4] = {"dirac_shift_shift", "dirac_shift_lapse", "dirac_lapse_lapse",
                            "equivariance"};
    for (int k = 0; k < 4; ++k) {
        const double order = fitted_order(nsd, errs[static_cast<std::size_t>(k)]);
        orders[std::string("order_") + names[k]] = order;
        char line[96];
        std::snprintf(line, sizeof line, "# fitted_order_%s=%.6f", names[k], order);
        csv.raw_row({line});
    }
    write_json(fs::path(c.out_dir) / "algebra_orders.json", orders);
    std::printf("check algebra: wrote %s\n",
                (fs::path(c.out_dir) / "algebra_residuals.csv").c_str());
    for (int k = 0; k < 4; ++k)
        std::printf("  fitted order %-18s %.3f\n", names[k],
                    orders[std::string("order_") + names[k]].get<double>());
    return kExitOk;
}

// --- evolve -----------------------------------------------------------------

int run_evolve(CommonOpts& c, const CLI::App* cmd, const std::string& xi0, const std::string& xi1,
               const std::string& preset, const std::string& phi0_expr,
               const std::string& pi0_expr, double lambda_end, double h, int record_every,
               bool sites) {
    TomlTable resolved = resolve_common(cmd, c);
    resolved["evolve.xi0"] = TomlValue::of_string(xi0);
    resolved["evolve.xi1"] = TomlValue::of_string(xi1);
    resolved["evolve.preset"] = TomlValue::of_string(preset);
    resolved["evolve.lambda_end"] = TomlValue::of_float(lambda_end);
    resolved["evolve.h"] = TomlValue::of_float(h);
    const std::uint64_t hash = finalize_config(resolved, c);

    const Lattice lat(c.n, c.length);
    const auto xi = SpacetimeVectorField::parse(xi0, xi1, c.length);

    PhasePoint st = PhasePoint::vacuum(lat);
    if (preset == "wave") {
        for (int i = 0; i < lat.n; ++i)
            st.phi[static_cast<std::size_t>(i)] = std::sin(lat.sites[static_cast<std::size_t>(i)]);
    } else if (preset == "kernel") {
        for (int i = 0; i < lat.n; ++i) {
            const double sgn = (i % 2 == 0) ? 1.0 : -1.0;
            st.phi[static_cast<std::size_t>(i)] = 1.0 + 0.3 * sgn;
            st.pi[static_cast<std::size_t>(i)] = 0.5 - 0.2 * sgn;
        }
    } else if (preset == "expr") {
        st.phi = field_from_expr(phi0_expr, lat);
        st.pi = field_from_expr(pi0_expr, lat);
    } else if (preset != "vacuum") {
        std::fprintf(stderr, "unknown preset '%s' (wave, kernel, expr, vacuum)\n", preset.c_str());
        return kExitValidation;
    }
    set_on_shell(st, c.mass, lat);

    const FlowTrace tr = evolve(st, xi, c.mass, lambda_end, h, lat, record_every);

    std::vector<std::string> header = {"lambda", "drift", "energy"};
    if (sites) {
        for (int i = 0; i < lat.n; ++i) header.push_back("phi_" + std::to_string(i));
        for (int i = 0; i < lat.n; ++i) header.push_back("pi_" + std::to_string(i));
    }
    CsvWriter csv(fs::path(c.out_dir) / "evolve_trace.csv", header, hash);
    for (std::size_t k = 0; k < tr.lambda.size(); ++k) {
        std::vector<double> row = {tr.lambda[k], tr.drift[k], tr.energy[k]};
        if (sites) {
            row.insert(row.end(), tr.states[k].phi.begin(), tr.states[k].phi.end());
            row.insert(row.end(), tr.states[k].pi.begin(), tr.states[k].pi.end());
        }
        csv.row(row);
    }
    // final slice, two real columns, winding in the second
    CsvWriter emb(fs::path(c.out_dir) / "final_embedding.csv", {"tau0", "tau1"}, hash);
    const PhasePoint& last = tr.states.back();
    for (int i = 0; i < lat.n; ++i)
        emb.row({last.tau.tau0[static_cast<std::size_t>(i)],
                 last.tau.tau1[static_cast<std::size_t>(i)]});

    if (tr.aborted) {
        std::fprintf(stderr, "evolve aborted: %s\n", tr.abort_reason.c_str());
        return kExitNumerical;
    }
    std::printf("evolve: %zu samples, final drift %.3e, wrote %s\n", tr.lambda.size(),
                tr.drift.back(), (fs::path(c.out_dir) / "evolve_trace.csv").c_str());
    return kExitOk;
}

// --- gauge-reduce -----------------------------------------------------------

int run_gauge_reduce(CommonOpts& c, const CLI::App* cmd, const std::string& preset,
                     const std::string& f0, const std::string& f1, const std::string& phi0_expr,
                     const std::string& pi0_expr, double lambda_end, double h, bool sites) {
    TomlTable resolved = resolve_common(cmd, c);
    resolved["gauge.preset"] = TomlValue::of_string(preset);
    resolved["gauge.f0"] = TomlValue::of_string(f0);
    resolved["gauge.f1"] = TomlValue::of_string(f1);
    resolved["gauge.lambda_end"] = TomlValue::of_float(lambda_end);
    resolved["gauge.h"] = TomlValue::of_float(h);
    const std::uint64_t hash = finalize_config(resolved, c);

    const Lattice lat(c.n, c.length);
    const GaugeSpec gs =
        preset == "timegauge" ? GaugeSpec::timegauge() : GaugeSpec::from_strings(f0, f1);

    const std::vector<double> phi0 = field_from_expr(phi0_expr, lat);
    const std::vector<double> pi0 = field_from_expr(pi0_expr, lat);
    const ReducedTrace tr = reduced_evolve(phi0, pi0, gs, c.mass, lambda_end, h, lat);

    std::vector<std::string> header = {"lambda", "energy"};
    if (sites)
        for (int i = 0; i < lat.n; ++i) header.push_back("phi_" + std::to_string(i));
    CsvWriter csv(fs::path(c.out_dir) / "reduced_trace.csv", header, hash);
    for (std::size_t k = 0; k < tr.lambda.size(); ++k) {
        std::vector<double> row = {tr.lambda[k], tr.energy[k]};
        if (sites) row.insert(row.end(), tr.phi[k].begin(), tr.phi[k].end());
        csv.row(row);
    }
    std::printf("gauge-reduce: %zu samples, wrote %s\n", tr.lambda.size(),
                (fs::path(c.out_dir) / "reduced_trace.csv").c_str());
    return kExitOk;
}

// --- sample -----------------------------------------------------------------

GibbsSpec build_gibbs_spec(const std::string& mode, const std::string& xi0, const std::string& xi1,
                           double b, double mass, double sigma_p, double sigma_tau,
                           bool pin_zero_mode, double length) {
    if (mode != "regulated" && mode != "matter")
        throw ValidationError("mode must be matter or regulated");
    GibbsSpec spec{SpacetimeVectorField::parse(xi0, xi1, length), b,
                   mode == "regulated" ? GibbsMode::Regulated : GibbsMode::MatterSector, mass};
    spec.sigma_p = sigma_p;
    spec.sigma_tau = sigma_tau;
    spec.pin_zero_mode = pin_zero_mode;
    return spec;
}

int run_sample(CommonOpts& c, const CLI::App* cmd, const std::string& mode, const std::string& xi0,
               const std::string& xi1, double b, SamplerConfig scfg, double sigma_p,
               double sigma_tau, bool pin_zero_mode) {
    TomlTable resolved = resolve_common(cmd, c);
    if (!c.seed_given) {
        std::fprintf(stderr, "sample: --seed is required for reproducible runs\n");
        return kExitValidation;
    }
    resolved["sample.mode"] = TomlValue::of_string(mode);
    resolved["sample.xi0"] = TomlValue::of_string(xi0);
    resolved["sample.xi1"] = TomlValue::of_string(xi1);
    resolved["sample.b"] = TomlValue::of_float(b);
    resolved["sample.chains"] = TomlValue::of_integer(scfg.chains);
    resolved["sample.samples_per_chain"] = TomlValue::of_integer(scfg.samples_per_chain);
    resolved["sample.burn_in"] = TomlValue::of_integer(scfg.burn_in);
    resolved["sample.thin"] = TomlValue::of_integer(scfg.thin);
    resolved["sample.langevin"] = TomlValue::of_bool(scfg.langevin);
    const std::uint64_t hash = finalize_config(resolved, c);

    const Lattice lat(c.n, c.length);
    const GibbsSpec spec =
        build_gibbs_spec(mode, xi0, xi1, b, c.mass, sigma_p, sigma_tau, pin_zero_mode, c.length);
    scfg.seed = static_cast<std::uint64_t>(c.seed);
    scfg.threads = c.threads;

    const SampleSet set = sample(spec, scfg, lat);
    const auto batt = observable_battery(c.mass, lat);

    std::vector<std::string> header = {"sample", "chain", "log_weight"};
    for (const auto& [name, f] : batt) header.push_back(name);
    CsvWriter csv(fs::path(c.out_dir) / "samples.csv", header, hash);
    for (std::size_t i = 0; i < set.states.size(); ++i) {
        std::vector<double> row = {static_cast<double>(i),
                                   static_cast<double>(i / static_cast<std::size_t>(set.per_chain)),
                                   set.log_weights[i]};
        for (const auto& [name, f] : batt) row.push_back(f(set.states[i]));
        csv.row(row);
    }

    {
        std::vector<double> hb(set.states.size());
        for (std::size_t i = 0; i < set.states.size(); ++i) hb[i] = batt[0].second(set.states[i]);
        const auto [lo_it, hi_it] = std::minmax_element(hb.begin(), hb.end());
        const double lo = *lo_it, hi = std::max(*hi_it, lo + 1e-12);
        const int bins = 40;
        std::vector<int> count(bins, 0);
        for (double v : hb) {
            int k = static_cast<int>((v - lo) / (hi - lo) * bins);
            ++count[static_cast<std::size_t>(std::clamp(k, 0, bins - 1))];
        }
        CsvWriter hist(fs::path(c.out_dir) / "sample_histogram.csv",
                       {"bin_center", "count"}, hash);
        for (int k = 0; k < bins; ++k)
            hist.row({lo + (k + 0.5) * (hi - lo) / bins,
                      static_cast<double>(count[static_cast<std::size_t>(k)])});
    }

    json summary;
    summary["config_hash"] = hash_hex(hash);
    summary["chains"] = set.chains;
    summary["samples_per_chain"] = set.per_chain;
    summary["seed"] = c.seed;
    json meta = json::array();
    for (const auto& m : set.meta)
        meta.push_back({{"chain", m.index},
                        {"acceptance", m.acceptance},
                        {"scale_matter", m.scale_matter}});
    summary["chain_meta"] = meta;
    summary["warnings"] = set.warnings;
    json est;
    for (const auto& [name, f] : batt) {
        const Estimate e = estimate(f, set);
        est[name] = {{"mean", e.mean}, {"se", e.se}};
    }
    summary["estimates"] = est;
    write_json(fs::path(c.out_dir) / "sample_summary.json", summary);
    std::printf("sample: %zu retained states, wrote %s\n", set.states.size(),
                (fs::path(c.out_dir) / "sample_summary.json").c_str());
    for (const auto& w : set.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
    return kExitOk;
}

// --- thermo -----------------------------------------------------------------

int run_thermo(CommonOpts& c, const CLI::App* cmd, const std::string& mode, double b,
               double b_final, const std::string& xi0, const std::string& xi1,
               const std::string& xi0_final, const std::string& xi1_final, int stages,
               SamplerConfig scfg) {
    TomlTable resolved = resolve_common(cmd, c);
    if (!c.seed_given) {
        std::fprintf(stderr, "thermo: --seed is required for reproducible runs\n");
        return kExitValidation;
    }
    resolved["thermo.mode"] = TomlValue::of_string(mode);
    resolved["thermo.b"] = TomlValue::of_float(b);
    resolved["thermo.b_final"] = TomlValue::of_float(b_final);
    resolved["thermo.xi0"] = TomlValue::of_string(xi0);
    resolved["thermo.xi1"] = TomlValue::of_string(xi1);
    resolved["thermo.xi0_final"] = TomlValue::of_string(xi0_final);
    resolved["thermo.xi1_final"] = TomlValue::of_string(xi1_final);
    resolved["thermo.stages"] = TomlValue::of_integer(stages);
    const std::uint64_t hash = finalize_config(resolved, c);

    const Lattice lat(c.n, c.length);
    const GibbsSpec spec_i =
        build_gibbs_spec(mode, xi0, xi1, b, c.mass, 1.0, 1.0, false, c.length);
    const GibbsSpec spec_f =
        build_gibbs_spec(mode, xi0_final, xi1_final, b_final, c.mass, 1.0, 1.0, false, c.length);

    ThermoConfig tcfg;
    tcfg.sampler = scfg;
    tcfg.sampler.seed = static_cast<std::uint64_t>(c.seed);
    tcfg.sampler.threads = c.threads;
    tcfg.stages = stages;

    const ThermoReport rep = thermo(spec_i, spec_f, tcfg, lat);

    json j;
    j["config_hash"] = hash_hex(hash);
    j["b_initial"] = rep.b_i;
    j["b_final"] = rep.b_f;
    j["logZ_diff"] = {{"fep", rep.logZ_diff},
                      {"fep_se", rep.logZ_diff_se},
                      {"ti", rep.logZ_diff_ti},
                      {"ti_se", rep.logZ_diff_ti_se}};
    j["delta_F"] = {{"value", rep.delta_F}, {"se", rep.delta_F_se}};
    j["Q_initial"] = {{"value", rep.Q_i}, {"se", rep.Q_i_se}};
    j["Q_final"] = {{"value", rep.Q_f}, {"se", rep.Q_f_se}};
    j["delta_S"] = {{"value", rep.delta_S}, {"se", rep.delta_S_se}};
    j["kl_divergence"] = {{"value", rep.kl}, {"se", rep.kl_se}};
    j["work"] = {{"value", rep.work_mean}, {"se", rep.work_se}};
    j["clausius_lhs"] = {{"value", rep.clausius_lhs}, {"se", rep.clausius_lhs_se}};
    const double iso = rep.b_i * rep.work_mean - rep.delta_F;
    j["isothermal_bound_lhs"] = {
        {"value", iso}, {"se", std::hypot(rep.b_i * rep.work_se, rep.delta_F_se)}};
    write_json(fs::path(c.out_dir) / "thermo.json", j);

    CsvWriter csv(fs::path(c.out_dir) / "thermo_stages.csv", {"s", "ess", "dlogz", "dlogz_se"},
                  hash);
    for (const auto& st : rep.stages) csv.row({st.s, st.ess, st.dlogz, st.dlogz_se});

    std::printf("thermo: dlogZ = %.4f +- %.4f (TI %.4f +- %.4f), KL = %.4f +- %.4f\n",
                rep.logZ_diff, rep.logZ_diff_se, rep.logZ_diff_ti, rep.logZ_diff_ti_se, rep.kl,
                rep.kl_se);
    return kExitOk;
}

// --- verify -----------------------------------------------------------------

int run_verify_multisym(CommonOpts& c, const CLI::App* cmd, int trials) {
    TomlTable resolved = resolve_common(cmd, c);
    resolved["verify.trials"] = TomlValue::of_integer(trials);
    finalize_config(resolved, c);

    const Lattice lat(c.n, c.length);
    Philox4x32 rng(static_cast<std::uint64_t>(c.seed), 0);
    const auto xi = SpacetimeVectorField::parse("1 + 0.2*cos(x) + 0.05*sin(t)",
                                                "0.2*sin(x) - 0.1*cos(t)*cos(x)", c.length);
    bool ok = true;
    double worst = 0.0;
    for (int trial = 0; trial < trials; ++trial) {
        PhasePoint st = PhasePoint::vacuum(lat);
        for (int i = 0; i < lat.n; ++i) {
            const auto iu = static_cast<std::size_t>(i);
            const double x = lat.sites[iu];
            st.phi[iu] = 0.6 * std::sin(x + rng.uniform01()) + 0.3 * rng.normal();
            st.pi[iu] = 0.6 * std::cos(2 * x + rng.uniform01());
            st.p[iu] = {0.4 * rng.normal(), 0.4 * rng.normal()};
        }
        // smooth the white-noise part of phi to keep the state physical
        for (int pass = 0; pass < 3; ++pass) {
            std::vector<double> sm = st.phi;
            for (int i = 0; i < lat.n; ++i)
                sm[static_cast<std::size_t>(i)] =
                    (st.phi[static_cast<std::size_t>((i + lat.n - 1) % lat.n)] +
                     2 * st.phi[static_cast<std::size_t>(i)] +
                     st.phi[static_cast<std::size_t>((i + 1) % lat.n)]) /
                    4.0;
            st.phi = std::move(sm);
        }
        const double r = slice_pullback_check(st, xi, c.mass, lat);
        worst = std::max(worst, r);
        ok = ok && (r <= 1e-10);
    }
    std::printf("%s multisym pullback: worst residual %.3e over %d states (tolerance 1e-10)\n",
                ok ? "PASS" : "FAIL", worst, trials);
    return ok ? kExitOk : kExitNumerical;
}

int run_verify_hashes(const std::string& dir) {
    const fs::path root(dir);
    const fs::path cfg = root / "resolved_config.toml";
    if (!fs::exists(cfg)) {
        std::fprintf(stderr, "verify hashes: %s not found\n", cfg.c_str());
        return kExitValidation;
    }
    const std::string expected = hash_hex(config_hash(parse_toml_file(cfg.string())));
    bool ok = true;
    int checked = 0;
    for (const auto& entry : fs::directory_iterator(root)) {
        const auto ext = entry.path().extension();
        if (ext != ".csv" && ext != ".json") continue;
        const auto found = embedded_hash(entry.path());
        ++checked;
        if (!found) {
            std::printf("MISSING  %s (no embedded hash)\n", entry.path().filename().c_str());
            ok = false;
        } else if (*found != expected) {
            std::printf("MISMATCH %s (%s != %s)\n", entry.path().filename().c_str(),
                        found->c_str(), expected.c_str());
            ok = false;
        } else {
            std::printf("OK       %s\n", entry.path().filename().c_str());
        }
    }
    if (checked == 0) {
        std::fprintf(stderr, "verify hashes: no outputs found in %s\n", dir.c_str());
        return kExitValidation;
    }
    return ok ? kExitOk : kExitNumerical;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"covariant statistical mechanics of a parametrized scalar field on a 1+1 lattice"};
    app.require_subcommand(1);

    // check
    auto* check = app.add_subcommand("check", "numerical verification studies");
    check->require_subcommand(1);
    auto* algebra = check->add_subcommand("algebra", "constraint-algebra residuals vs n");
    CommonOpts c_check;
    std::vector<int> ns = {32, 64, 128, 256};
    algebra->add_option("--n-list,--n", ns, "lattice sizes")->delimiter(',');
    algebra->add_option("--config", c_check.config_path, "TOML config file");
    algebra->add_option("--out", c_check.out_dir, "output directory");
    algebra->add_option("--m,--mass", c_check.mass, "scalar mass");
    algebra->add_option("--seed", c_check.seed, "fixture seed")->each([&](const std::string&) {
        c_check.seed_given = true;
    });

    // evolve
    auto* ev = app.add_subcommand("evolve", "integrate the flow generated by H(xi)");
    CommonOpts c_ev;
    attach_common(ev, c_ev);
    std::string xi0 = "1", xi1 = "0", preset = "wave";
    std::string phi0_expr = "sin(x)", pi0_expr = "0";
    double lambda_end = 1.0, h = 1e-3;
    int record_every = 0;
    bool sites = false;
    ev->add_option("--xi0", xi0, "time component of the generator");
    ev->add_option("--xi1", xi1, "space component of the generator");
    ev->add_option("--preset", preset, "initial data: wave, kernel, expr, vacuum");
    ev->add_option("--phi0", phi0_expr, "initial phi(x) for preset expr");
    ev->add_option("--pi0", pi0_expr, "initial Pi(x) for preset expr");
    ev->add_option("--lambda-end", lambda_end, "flow time");
    ev->add_option("--step", h, "RK4 step");
    ev->add_option("--record-every", record_every, "output stride in steps");
    ev->add_flag("--sites", sites, "emit per-site columns");

    // gauge-reduce
    auto* gr = app.add_subcommand("gauge-reduce", "gauge-fixed matter evolution");
    CommonOpts c_gr;
    attach_common(gr, c_gr);
    std::string g_preset = "timegauge", f0 = "t", f1 = "x";
    std::string g_phi0 = "sin(x)", g_pi0 = "0";
    double g_lambda_end = 1.0, g_h = 1e-3;
    bool g_sites = false;
    gr->add_option("--preset", g_preset, "timegauge or custom");
    gr->add_option("--f0", f0, "gauge function F^0(t=lambda, x)");
    gr->add_option("--f1", f1, "gauge function F^1(t=lambda, x)");
    gr->add_option("--phi0", g_phi0, "initial phi(x)");
    gr->add_option("--pi0", g_pi0, "initial Pi(x)");
    gr->add_option("--lambda-end", g_lambda_end, "flow time");
    gr->add_option("--step", g_h, "RK4 step");
    gr->add_flag("--sites", g_sites, "emit per-site columns");

    // sample
    auto* sa = app.add_subcommand("sample", "MCMC sampling of the covariant Gibbs state");
    CommonOpts c_sa;
    attach_common(sa, c_sa);
    std::string s_mode = "matter", s_xi0 = "1", s_xi1 = "0";
    double s_b = 1.0, s_sigma_p = 1.0, s_sigma_tau = 1.0;
    bool s_pin = false;
    SamplerConfig s_cfg;
    sa->add_option("--mode", s_mode, "matter or regulated");
    sa->add_option("--b", s_b, "inverse temperature");
    sa->add_option("--xi0", s_xi0, "time component of the generator");
    sa->add_option("--xi1", s_xi1, "space component of the generator");
    sa->add_option("--chains", s_cfg.chains, "chain count");
    sa->add_option("--samples", s_cfg.samples_per_chain, "retained samples per chain");
    sa->add_option("--burn-in", s_cfg.burn_in, "burn-in steps per chain");
    sa->add_option("--thin", s_cfg.thin, "thinning stride");
    sa->add_flag("--langevin", s_cfg.langevin, "gradient-guided proposals");
    sa->add_option("--target-accept", s_cfg.target_accept, "tuning target");
    sa->add_option("--sigma-p", s_sigma_p, "regulator width on P (regulated mode)");
    sa->add_option("--sigma-tau", s_sigma_tau, "regulator width on tau (regulated mode)");
    sa->add_flag("--pin-zero-mode", s_pin, "freeze the stencil-kernel phi modes (m = 0)");

    // thermo
    auto* th = app.add_subcommand("thermo", "free energy, entropy and work between two states");
    CommonOpts c_th;
    attach_common(th, c_th);
    std::string t_mode = "matter", t_xi0 = "1", t_xi1 = "0", t_xi0f, t_xi1f;
    double t_b = 1.0, t_bf = 2.0;
    int t_stages = 8;
    SamplerConfig t_cfg;
    t_cfg.samples_per_chain = 1500;
    t_cfg.burn_in = 3000;
    th->add_option("--mode", t_mode, "matter or regulated");
    th->add_option("--b", t_b, "initial inverse temperature");
    th->add_option("--b-final", t_bf, "final inverse temperature");
    th->add_option("--xi0", t_xi0, "initial generator, time component");
    th->add_option("--xi1", t_xi1, "initial generator, space component");
    th->add_option("--xi0-final", t_xi0f, "final generator, time component (default: initial)");
    th->add_option("--xi1-final", t_xi1f, "final generator, space component (default: initial)");
    th->add_option("--stages", t_stages, "interpolation stages");
    th->add_option("--chains", t_cfg.chains, "chain count");
    th->add_option("--samples", t_cfg.samples_per_chain, "retained samples per chain");
    th->add_option("--burn-in", t_cfg.burn_in, "burn-in steps per chain");
    th->add_option("--thin", t_cfg.thin, "thinning stride");

    // verify
    auto* ve = app.add_subcommand("verify", "consistency verifications");
    ve->require_subcommand(1);
    auto* vm = ve->add_subcommand("multisym", "covariant/canonical pullback identity");
    CommonOpts c_vm;
    int vm_trials = 100;
    vm->add_option("--trials", vm_trials, "random states to check");
    vm->add_option("--n", c_vm.n, "lattice site count");
    vm->add_option("--m,--mass", c_vm.mass, "scalar mass");
    vm->add_option("--seed", c_vm.seed, "fixture seed");
    vm->add_option("--out", c_vm.out_dir, "output directory");
    vm->add_option("--config", c_vm.config_path, "TOML config file");
    auto* vh = ve->add_subcommand("hashes", "re-check embedded config hashes");
    std::string vh_dir = "out";
    vh->add_option("dir", vh_dir, "run output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e); // prints usage/help to the right stream
        return code == 0 ? kExitOk : kExitValidation;
    }

    try {
        if (algebra->parsed()) return run_check_algebra(c_check, algebra, ns);
        if (ev->parsed())
            return run_evolve(c_ev, ev, xi0, xi1, preset, phi0_expr, pi0_expr, lambda_end, h,
                              record_every, sites);
        if (gr->parsed())
            return run_gauge_reduce(c_gr, gr, g_preset, f0, f1, g_phi0, g_pi0, g_lambda_end, g_h,
                                    g_sites);
        if (sa->parsed())
            return run_sample(c_sa, sa, s_mode, s_xi0, s_xi1, s_b, s_cfg, s_sigma_p, s_sigma_tau,
                              s_pin);
        if (th->parsed()) {
            if (t_xi0f.empty()) t_xi0f = t_xi0;
            if (t_xi1f.empty()) t_xi1f = t_xi1;
            return run_thermo(c_th, th, t_mode, t_b, t_bf, t_xi0, t_xi1, t_xi0f, t_xi1f, t_stages,
                              t_cfg);
        }
        if (vm->parsed()) return run_verify_multisym(c_vm, vm, vm_trials);
        if (vh->parsed()) return run_verify_hashes(vh_dir);
        std::fprintf(stderr, "%s\n", app.help().c_str());
        return kExitValidation;
    } catch (const ParseError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitValidation;
    } catch (const ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitValidation;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitNumerical;
    }
}
