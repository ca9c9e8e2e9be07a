#pragma once

// Invariant measure of the frozen fast process, Monte Carlo averaged drifts,
// and the coupling estimate of the exponential mixing rate.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <ostream>
#include <span>
#include <vector>

#include "levysync/errors.hpp"
#include "levysync/parallel.hpp"
#include "levysync/rng.hpp"
#include "levysync/sde.hpp"
#include "levysync/stats.hpp"
#include "levysync/synchro.hpp"

namespace levysync {

/// Sample cloud from one or more stationary frozen-fast chains.
struct EmpiricalMeasure {
    std::vector<double> samples;  // flat, dim values per sample
    std::size_t dim = 1;
    std::size_t thinning = 1;  // steps between retained samples
    double burn_in = 0.0;      // time discarded at the start of every chain
    State frozen_x;
    double epsilon = 1.0;
    double alpha = 2.0;
    double step = 0.0;
    std::size_t diverged_steps = 0;

    std::size_t size() const { return samples.size() / dim; }
    std::span<const double> at(std::size_t k) const { return {samples.data() + k * dim, dim}; }
};

struct MeasureOptions {
    std::size_t replicas = 16;
    double step_fraction = 0.01;    // h = step_fraction * eps
    double burn_in_relax = 10.0;    // in units of the relaxation time eps/2
    double thinning_relax = 1.0;
    State y0;                       // chain start; zero when empty
};

/// Runs independent replica chains of the frozen fast equation with the slow
/// state held at x, discards the burn-in and keeps one sample per relaxation
/// time. A non-finite state restarts its chain; more than 0.1% of such steps
/// raises DivergenceError.
inline EmpiricalMeasure estimate_invariant_measure(const CoupledSpec& spec, std::span<const double> x, double epsilon,
                                                   std::size_t n_samples, const StreamKey& key,
                                                   const MeasureOptions& options = {}) {
    if (!(epsilon > 0.0)) throw DomainError("estimate_invariant_measure: eps must be > 0");
    if (n_samples < 1000) throw DomainError("estimate_invariant_measure: need at least 1000 samples");
    if (options.replicas < 1) throw DomainError("estimate_invariant_measure: need at least one replica");
    if (!(options.step_fraction > 0.0 && options.step_fraction <= 0.01))
        throw DomainError("estimate_invariant_measure: step must satisfy h <= eps/100");
    if (options.burn_in_relax < 10.0) throw DomainError("estimate_invariant_measure: burn-in below ten relaxation times");
    const std::size_t d = spec.dim();
    if (x.size() != d) throw DomainError("estimate_invariant_measure: dimension mismatch");
    if (!options.y0.empty() && options.y0.size() != d) throw DomainError("estimate_invariant_measure: y0 dimension");

    const double h = options.step_fraction * epsilon;
    const double relax = 0.5 * epsilon;
    const auto thin = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(options.thinning_relax * relax / h)));
    const auto burn = static_cast<std::size_t>(std::ceil(options.burn_in_relax * relax / h - 1e-9));
    const std::size_t per_chain = (n_samples + options.replicas - 1) / options.replicas;
    const State x_frozen(x.begin(), x.end());
    const DriftField field = frozen_fast_field(spec, x_frozen, epsilon);
    const State sigma(d, slowfast_noise(spec, epsilon).fast);
    const State start = options.y0.empty() ? State(d, 0.0) : options.y0;

    EmpiricalMeasure m;
    m.dim = d;
    m.thinning = thin;
    m.burn_in = static_cast<double>(burn) * h;
    m.frozen_x = x_frozen;
    m.epsilon = epsilon;
    m.alpha = spec.law.alpha;
    m.step = h;
    m.samples.resize(per_chain * options.replicas * d);
    std::vector<std::size_t> diverged(options.replicas, 0);

    parallel_for(options.replicas, [&](std::size_t r) {
        const StreamKey chain_key{key.master_seed, key.path_index * options.replicas + r, Purpose::Replica};
        NoiseStream noise(spec.law, h, chain_key);
        ExponentialStepper stepper(field, sigma, h, spec.law.alpha);
        State y = start, dl(d);
        std::size_t since_start = 0, kept = 0;
        const std::size_t step_budget = 4 * (burn + per_chain * thin) + 1000;
        for (std::size_t k = 0; kept < per_chain; ++k) {
            if (k > step_budget) throw DivergenceError("estimate_invariant_measure: chain keeps diverging");
            noise.next(dl);
            if (!stepper.advance(y, 0.0, dl, y)) {
                ++diverged[r];
                y = start;
                since_start = 0;
                continue;
            }
            ++since_start;
            if (since_start > burn && (since_start - burn) % thin == 0) {
                std::copy(y.begin(), y.end(), m.samples.begin() + static_cast<std::ptrdiff_t>((r * per_chain + kept) * d));
                ++kept;
            }
        }
    });

    for (auto c : diverged) m.diverged_steps += c;
    const double total_steps = static_cast<double>(options.replicas * (burn + per_chain * thin));
    if (static_cast<double>(m.diverged_steps) > 1e-3 * total_steps)
        throw DivergenceError("estimate_invariant_measure: more than 0.1% of steps went non-finite");
    return m;
}

/// Per-coordinate estimates of Fbar(x, eps) and Gbar(x, eps).
struct AveragedDriftEstimate {
    std::vector<Estimate> f_bar;
    std::vector<Estimate> g_bar;
};

inline AveragedDriftEstimate averaged_drift_mc(const CoupledSpec& spec, std::span<const double> x, double epsilon,
                                               const EmpiricalMeasure& measure) {
    const std::size_t d = spec.dim();
    if (x.size() != d || measure.dim != d) throw DomainError("averaged_drift_mc: dimension mismatch");
    if (!std::equal(x.begin(), x.end(), measure.frozen_x.begin(), measure.frozen_x.end()))
        throw DomainError("averaged_drift_mc: measure was built for a different frozen state");
    if (measure.epsilon != epsilon) throw DomainError("averaged_drift_mc: measure was built for a different eps");
    const std::size_t n = measure.size();
    const double amp = fast_amplitude(epsilon, spec.law.alpha);
    std::vector<std::vector<double>> fv(d, std::vector<double>(n)), gv(d, std::vector<double>(n));
    State shifted(d), big_f(d), big_g(d);
    for (std::size_t k = 0; k < n; ++k) {
        detail::evaluate_fg(spec, x, measure.at(k), amp, shifted, big_f, big_g);
        for (std::size_t i = 0; i < d; ++i) {
            fv[i][k] = big_f[i];
            gv[i][k] = big_g[i];
        }
    }
    AveragedDriftEstimate out;
    for (std::size_t i = 0; i < d; ++i) {
        out.f_bar.push_back(median_of_means(fv[i]));
        out.g_bar.push_back(median_of_means(gv[i]));
    }
    return out;
}

/// (int |y|^p mu(dy))^{1/p} by median of means.
inline Estimate stationary_lp_moment(const EmpiricalMeasure& measure, double p) {
    require_moment_order(p, measure.alpha);
    if (measure.size() == 0) throw DomainError("stationary_lp_moment: empty measure");
    std::vector<double> powers(measure.size());
    for (std::size_t k = 0; k < powers.size(); ++k) powers[k] = std::pow(detail::norm(measure.at(k)), p);
    return lp_norm_from_powers(powers, p);
}

/// One sample per row, columns y1..y_dim.
inline void write_csv(std::ostream& os, const EmpiricalMeasure& measure) {
    for (std::size_t i = 0; i < measure.dim; ++i) os << (i ? "," : "") << 'y' << (i + 1);
    os << '\n';
    os.precision(17);
    for (std::size_t k = 0; k < measure.size(); ++k) {
        const auto s = measure.at(k);
        for (std::size_t i = 0; i < measure.dim; ++i) os << (i ? "," : "") << s[i];
        os << '\n';
    }
}

struct MixingEstimate {
    double rate = 0.0;  // +inf when the two starts coincide
    double prefactor = 0.0;
    double fit_residual = 0.0;
    std::vector<double> times;
    std::vector<Estimate> curve;  // L^p distance between the coupled chains
};

/// Runs the frozen fast equation from y1 and y2 under the same noise on
/// every path, estimates the L^p distance curve on t_grid and fits
/// log-linear decay over the points above 1e-10 of the initial distance.
/// A curve that rises beyond its confidence band raises FitError.
inline MixingEstimate mixing_rate(const CoupledSpec& spec, std::span<const double> x, double epsilon,
                                  std::span<const double> y1, std::span<const double> y2, double p,
                                  std::size_t n_paths, const PathGrid& t_grid, std::uint64_t master_seed = 0) {
    require_moment_order(p, spec.law.alpha);
    if (!(epsilon > 0.0)) throw DomainError("mixing_rate: eps must be > 0");
    const std::size_t d = spec.dim();
    if (x.size() != d || y1.size() != d || y2.size() != d) throw DomainError("mixing_rate: dimension mismatch");
    if (n_paths < 1) throw DomainError("mixing_rate: need at least one path");
    t_grid.validate();

    MixingEstimate out;
    for (std::size_t k = 0; k <= t_grid.n_steps; ++k) out.times.push_back(t_grid.time(k));
    if (std::equal(y1.begin(), y1.end(), y2.begin())) {
        out.rate = std::numeric_limits<double>::infinity();
        out.curve.assign(out.times.size(), Estimate{});
        return out;
    }

    const State x_frozen(x.begin(), x.end());
    const DriftField field = frozen_fast_field(spec, x_frozen, epsilon);
    const State sigma(d, slowfast_noise(spec, epsilon).fast);
    const double h = t_grid.step();
    const std::size_t n_points = t_grid.n_steps + 1;
    std::vector<double> powers(n_points * n_paths);
    std::vector<char> bad(n_paths, 0);

    parallel_for(n_paths, [&](std::size_t path) {
        NoiseStream noise(spec.law, h, {master_seed, path, Purpose::Driver});
        ExponentialStepper s1(field, sigma, h, spec.law.alpha), s2(field, sigma, h, spec.law.alpha);
        State a(y1.begin(), y1.end()), b(y2.begin(), y2.end()), dl(d), diff(d);
        for (std::size_t k = 0; k < n_points; ++k) {
            if (k > 0) {
                noise.next(dl);
                const double t = t_grid.time(k - 1);
                if (!s1.advance(a, t, dl, a) || !s2.advance(b, t, dl, b)) {
                    bad[path] = 1;
                    return;
                }
            }
            for (std::size_t i = 0; i < d; ++i) diff[i] = a[i] - b[i];
            powers[k * n_paths + path] = std::pow(detail::norm(diff), p);
        }
    });

    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < n_paths; ++i)
        if (!bad[i]) keep.push_back(i);
    if (keep.size() * 1000 < n_paths * 999) throw DivergenceError("mixing_rate: more than 0.1% of paths diverged");
    std::vector<double> column(keep.size());
    for (std::size_t k = 0; k < n_points; ++k) {
        for (std::size_t j = 0; j < keep.size(); ++j) column[j] = powers[k * n_paths + keep[j]];
        out.curve.push_back(lp_norm_from_powers(column, p));
    }

    const double initial = out.curve.front().value;
    std::vector<double> ts, logs;
    for (std::size_t k = 0; k < n_points; ++k) {
        if (k > 0 && out.curve[k].value > out.curve[k - 1].hi * (1.0 + 1e-12) + 1e-300)
            throw FitError("mixing_rate: contraction curve increases beyond its band");
        if (out.curve[k].value > 1e-10 * initial) {
            ts.push_back(out.times[k]);
            logs.push_back(std::log(out.curve[k].value));
        }
    }
    const auto fit = least_squares(ts, logs);
    out.rate = -fit.slope;
    out.prefactor = std::exp(fit.intercept);
    out.fit_residual = fit.rms_residual;
    return out;
}

}  // namespace levysync
