#pragma once

// Experiment dispatch and the run contract: report CSV, JSON-lines manifest,
// SVG plots, FAILED marker, and exit codes 0 (passed), 2 (an acceptance
// check failed) and 1 (error).

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "levysync/averaging.hpp"
#include "levysync/config.hpp"
#include "levysync/mc.hpp"
#include "levysync/report_io.hpp"
#include "levysync/stable_noise.hpp"
#include "levysync/svg_plot.hpp"
#include "levysync/synchro.hpp"

namespace levysync {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitCheckFailed = 2;

struct RunOutcome {
    ExperimentReport report;
    std::vector<std::string> warnings;
};

namespace detail {

// Probes H.1-H.3 on [-10, 10]^d. A violation aborts the run unless the
// configuration overrides it, in which case it becomes a warning.
inline void check_hypotheses(const CoupledSpec& spec, bool override_violation, std::vector<std::string>& warnings) {
    try {
        const auto cert = validate_hypotheses(spec, {}, 1000);
        for (const auto& w : cert.warnings) warnings.push_back(w);
    } catch (const HypothesisViolation& e) {
        if (!override_violation) throw;
        warnings.push_back(std::string("hypothesis override: ") + e.what());
    }
}

inline Manifest config_manifest(const std::string& experiment, const RunConfig& c) {
    Manifest m;
    m.experiment = experiment;
    m.master_seed = c.mc.master_seed;
    m.spec_id = c.spec.id;
    m.parameters = {{"alpha", c.spec.alpha}, {"sigma1", c.spec.sigma1}, {"sigma2", c.spec.sigma2}, {"p", c.mc.p},
                    {"n_paths", static_cast<double>(c.mc.n_paths)}};
    return m;
}

inline ExperimentReport sampler_check(const RunConfig& c) {
    ExperimentReport rep;
    rep.manifest = config_manifest("sampler-check", c);
    const std::size_t n = c.sampler.n_samples;
    rep.manifest.grid = "n_samples=" + std::to_string(n);
    const double band = 4.0 / std::sqrt(static_cast<double>(n));
    std::vector<double> draws(n);
    for (std::size_t i = 0; i < c.sampler.alphas.size(); ++i) {
        const double alpha = c.sampler.alphas[i];
        RandomStream rng({c.mc.master_seed, i, Purpose::Sampler});
        for (auto& x : draws) x = standard_stable(alpha, rng);
        for (double u : c.sampler.frequencies) {
            const double phi = empirical_char_function(draws, u).real();
            const double oracle = std::exp(-std::pow(std::abs(u), alpha));
            const std::string name = "ecf_u" + format_double(u);
            rep.rows.push_back({alpha, name, phi, phi - band, phi + band, n, 0});
            std::ostringstream msg;
            msg << "alpha=" << alpha << " u=" << u << ": |" << phi << " - " << oracle << "| vs " << band;
            rep.checks.push_back({"characteristic function " + name + " at alpha " + format_double(alpha),
                                  std::abs(phi - oracle) <= band, msg.str()});
        }
        if (alpha == 2.0) {
            std::vector<double> squares(n);
            for (std::size_t k = 0; k < n; ++k) squares[k] = draws[k] * draws[k];
            const auto var = median_of_means(squares);
            rep.rows.push_back(make_row(alpha, "variance", var, 0));
            std::ostringstream msg;
            msg << "variance " << var.value << " vs 2 +- 1%";
            rep.checks.push_back({"Gaussian variance", std::abs(var.value - 2.0) <= 0.02, msg.str()});
        }
    }
    return rep;
}

inline ExperimentReport mixing_experiment(const RunConfig& c, const CoupledSpec& spec) {
    ExperimentReport rep;
    rep.manifest = config_manifest("mixing", c);
    const std::size_t d = spec.dim();
    const State x(d, c.mixing.x), y1(d, c.mixing.y1), y2(d, c.mixing.y2);
    // Shared-noise differences contract at 2/eps - (f' + g')/2, so the rate
    // lies within 2/eps -+ (Lip f + Lip g)/2.
    double spread = 0.0;
    if (spec.f.lipschitz() && spec.g.lipschitz()) spread = 0.5 * (*spec.f.lipschitz() + *spec.g.lipschitz());
    else spread = validate_hypotheses(spec, {}, 1000).lipschitz_L;
    for (std::size_t e = 0; e < c.mc.epsilon_list.size(); ++e) {
        const double eps = c.mc.epsilon_list[e];
        const auto grid = PathGrid::make(0.0, c.mixing.horizon_relax * eps / 2.0, c.mixing.n_steps);
        const auto est = mixing_rate(spec, x, eps, y1, y2, c.mc.p, c.mc.n_paths, grid, c.mc.master_seed + e);
        rep.rows.push_back({eps, "mixing_rate", est.rate, est.rate, est.rate, c.mc.n_paths, 0});
        const double ratio = est.rate * eps / 2.0;
        rep.rows.push_back({eps, "rate_over_2_by_eps", ratio, ratio, ratio, c.mc.n_paths, 0});
        const double lo = (2.0 / eps - spread) * 0.99, hi = (2.0 / eps + spread) * 1.01;
        std::ostringstream msg;
        msg << "rate " << est.rate << " vs envelope [" << lo << ", " << hi << "]";
        rep.checks.push_back({"mixing rate envelope at eps " + format_double(eps), est.rate >= lo && est.rate <= hi, msg.str()});
    }
    rep.manifest.grid = "horizon=" + format_double(c.mixing.horizon_relax) + " relaxation times, n_steps=" +
                        std::to_string(c.mixing.n_steps);
    return rep;
}

inline ExperimentReport holder_experiment(const RunConfig& c, const CoupledSpec& spec) {
    ExperimentReport rep;
    rep.manifest = config_manifest("holder", c);
    const double eps = c.mc.epsilon_list.front();
    SweepOptions o;
    o.eps = {eps};
    o.T = c.holder.T;
    o.h_factor = c.mc.h_factor;
    o.mesh_points = c.holder.n_steps;
    o.n_paths = c.mc.n_paths;
    o.master_seed = c.mc.master_seed;
    o.x0 = c.mc.x0;
    o.y0 = c.mc.y0;
    const auto sim = simulate_sweep(spec, o);
    const auto& fam = sim.slow[0];
    const auto grid = PathGrid::make(0.0, c.holder.T, c.holder.n_steps);
    std::vector<SamplePath> paths;
    paths.reserve(fam.n_paths);
    const std::size_t per_path = fam.times.size() * fam.dim;
    for (std::size_t i = 0; i < fam.n_paths; ++i)
        paths.push_back({grid, fam.dim,
                         std::vector<double>(fam.values.begin() + static_cast<std::ptrdiff_t>(i * per_path),
                                             fam.values.begin() + static_cast<std::ptrdiff_t>((i + 1) * per_path)),
                         fam.excluded[i] != 0});
    std::vector<double> lags;
    for (double s : c.holder.lag_steps) lags.push_back(s * grid.step());
    const auto est = holder_increment_estimate(paths, c.mc.p, spec.law.alpha, lags);
    const std::size_t excl = count_excluded(fam);
    for (const auto& ln : est.norms) rep.rows.push_back({ln.lag, "increment_norm", ln.norm, ln.norm, ln.norm, fam.n_paths - excl, excl});
    rep.rows.push_back({eps, "holder_slope", est.slope, est.slope, est.slope, fam.n_paths - excl, excl});
    const double lo = std::min(1.0 / spec.law.alpha, 1.0) * 0.85, hi = 1.1;
    std::ostringstream msg;
    msg << "slope " << est.slope << " vs [" << lo << ", " << hi << "]";
    rep.checks.push_back({"holder slope", est.slope >= lo && est.slope <= hi, msg.str()});
    rep.checks.push_back(exclusion_check(rep, c.mc.n_paths));
    rep.manifest.grid = "T=" + format_double(c.holder.T) + " n_steps=" + std::to_string(c.holder.n_steps) + " | " + sim.noise_id;
    return rep;
}

inline ExperimentReport attractor_experiment(const RunConfig& c, const CoupledSpec& spec) {
    const std::size_t d = spec.dim();
    AttractorOptions opt;
    for (std::size_t k = 0; k < c.attractor.ic_count; ++k) {
        const double v = c.attractor.ic_min +
                         (c.attractor.ic_max - c.attractor.ic_min) * static_cast<double>(k) /
                             static_cast<double>(c.attractor.ic_count - 1);
        opt.initial_states.push_back(State(d, v));
    }
    opt.frozen_fast = State(d, c.attractor.frozen_fast);
    opt.epsilon = spec.epsilon();
    opt.h = c.attractor.h;
    auto out = attractor_diameter(spec, opt, c.mc);
    const double ratio = out.lp_diameter.back().value / out.lp_diameter.front().value;
    out.report.rows.push_back({c.mc.T, "diameter_ratio", ratio, ratio, ratio, out.lp_diameter.back().n_effective,
                               out.report.rows.back().excluded});
    return out.report;
}

}  // namespace detail

/// Runs the configured experiment and returns its report. Errors propagate.
inline RunOutcome run_experiment(const RunConfig& c) {
    validate(c);
    RunOutcome out;
    if (c.experiment == "sampler-check") {
        out.report = detail::sampler_check(c);
        return out;
    }
    const CoupledSpec spec = c.spec.build();
    if (c.experiment == "averaging" || c.experiment == "persistence" || c.experiment == "moments" ||
        c.experiment == "mixing")
        detail::check_hypotheses(spec, c.spec.override_hypotheses, out.warnings);
    if (c.experiment == "averaging") out.report = averaging_convergence(spec, c.mc);
    else if (c.experiment == "persistence") out.report = synchronization_persistence(spec, c.mc).report;
    else if (c.experiment == "moments") out.report = moment_uniformity(spec, c.mc);
    else if (c.experiment == "attractor") out.report = detail::attractor_experiment(c, spec);
    else if (c.experiment == "mixing") out.report = detail::mixing_experiment(c, spec);
    else if (c.experiment == "holder") out.report = detail::holder_experiment(c, spec);
    out.report.manifest.experiment = c.experiment;
    out.report.manifest.spec_id = c.spec.id;
    return out;
}

/// Estimators plotted for each experiment and their axes.
inline std::vector<std::pair<std::string, AxisScale>> plot_plan(const std::string& experiment) {
    if (experiment == "averaging")
        return {{"slow_vs_averaged", AxisScale::LogLog}, {"slow_vs_auxiliary", AxisScale::LogLog},
                {"fast_vs_auxiliary_int", AxisScale::LogLog}};
    if (experiment == "persistence") return {{"sync_gap", AxisScale::LogLog}};
    if (experiment == "moments")
        return {{"slow_norm", AxisScale::LogLog}, {"fast_norm", AxisScale::LogLog}, {"fast_stationary_norm", AxisScale::LogLog}};
    if (experiment == "attractor") return {{"lp_diameter", AxisScale::SemiLogY}};
    if (experiment == "mixing") return {{"mixing_rate", AxisScale::LogLog}};
    if (experiment == "holder") return {{"increment_norm", AxisScale::LogLog}};
    return {{"ecf_u1", AxisScale::Linear}};
}

/// Executes a configuration and writes its outputs under output_dir:
/// report.csv, manifest.jsonl and (optionally) plot_<estimator>.svg. Any
/// failure leaves a FAILED file describing it.
inline int run(const RunConfig& c, std::ostream& log) {
    namespace fs = std::filesystem;
    const fs::path dir(c.output_dir);
    try {
        fs::create_directories(dir);
        fs::remove(dir / "FAILED");
    } catch (const std::exception& e) {
        log << "error: cannot prepare output directory " << dir << ": " << e.what() << '\n';
        return kExitError;
    }
    auto fail = [&](int code, const std::string& why) {
        log << (code == kExitError ? "error: " : "check failed: ") << why << '\n';
        try {
            write_file_atomic(dir / "FAILED", why + "\n");
        } catch (const std::exception& e) {
            log << "error: cannot write FAILED marker: " << e.what() << '\n';
        }
        return code;
    };
    try {
        const auto outcome = run_experiment(c);
        for (const auto& w : outcome.warnings) log << "warning: " << w << '\n';
        std::vector<std::string> outputs{"report.csv"};
        write_file_atomic(dir / "report.csv", report_csv(outcome.report));
        if (c.emit_plots) {
            for (const auto& [estimator, scale] : plot_plan(c.experiment)) {
                if (outcome.report.series(estimator).empty()) continue;
                const std::string name = "plot_" + estimator + ".svg";
                try {
                    write_file_atomic(dir / name, emit_plot(outcome.report, estimator, scale));
                    outputs.push_back(name);
                } catch (const DomainError& e) {
                    log << "warning: plot " << name << " skipped: " << e.what() << '\n';
                }
            }
        }
        outputs.push_back("manifest.jsonl");
        write_file_atomic(dir / "manifest.jsonl",
                          manifest_jsonl(outcome.report, render_config(c), outputs, outcome.warnings));
        std::string failed;
        for (const auto& check : outcome.report.checks) {
            log << (check.passed ? "PASS " : "FAIL ") << check.name << (check.detail.empty() ? "" : ": " + check.detail)
                << '\n';
            if (!check.passed) failed += check.name + (check.detail.empty() ? "" : ": " + check.detail) + "\n";
        }
        if (!failed.empty()) return fail(kExitCheckFailed, failed);
        return kExitOk;
    } catch (const std::exception& e) {
        return fail(kExitError, e.what());
    }
}

}  // namespace levysync
