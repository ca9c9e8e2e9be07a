#pragma once

// Monte Carlo convergence studies for the coupled system: averaging error,
// persistence of synchronization, uniform moments, attractor diameter and
// stationary marginals.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "levysync/averaging.hpp"
#include "levysync/errors.hpp"
#include "levysync/parallel.hpp"
#include "levysync/rng.hpp"
#include "levysync/sde.hpp"
#include "levysync/stats.hpp"
#include "levysync/synchro.hpp"
#include "levysync/version.hpp"

namespace levysync {

enum class DeltaRule { LogSchedule, Fixed };

/// delta = eps (-ln eps)^{1/2}.
inline double delta_schedule(double epsilon) {
    if (!(epsilon > 0.0) || !(epsilon < 1.0)) throw DomainError("delta_schedule: eps must lie in (0, 1)");
    return epsilon * std::sqrt(-std::log(epsilon));
}

struct MCConfig {
    double p = 1.2;
    std::size_t n_paths = 10'000;
    double T = 5.0;
    std::uint64_t master_seed = 1;
    std::vector<double> epsilon_list{0.1, 0.05, 0.02, 0.01};
    std::vector<double> nu_list{1.0, 4.0, 16.0, 64.0};
    DeltaRule delta_rule = DeltaRule::LogSchedule;
    double delta_value = 0.0;  // used by DeltaRule::Fixed
    double h_factor = 1e-2;    // h = h_factor * min(1, eps)
    std::size_t mesh_points = 20;
    /// Initial slow and fast states (X_0, Y_0) of the slow-fast system; a
    /// single value is broadcast to every coordinate.
    State x0{1.0};
    State y0{0.0};

    /// Checks the invariants that do not depend on the experiment.
    void validate(double alpha) const {
        require_moment_order(p, alpha);
        if (n_paths < 1000) throw DomainError("MCConfig: n_paths must be >= 1000");
        if (!(T > 0.0) || !std::isfinite(T)) throw DomainError("MCConfig: T must be positive");
        if (!(h_factor > 0.0) || h_factor > 0.1) throw DomainError("MCConfig: h_factor must lie in (0, 0.1]");
        if (mesh_points < 1) throw DomainError("MCConfig: mesh_points must be >= 1");
        if (delta_rule == DeltaRule::Fixed && !(delta_value > 0.0))
            throw DomainError("MCConfig: fixed delta must be positive");
        for (std::size_t i = 0; i < epsilon_list.size(); ++i) {
            if (!(epsilon_list[i] > 0.0 && epsilon_list[i] <= 1.0)) throw DomainError("MCConfig: eps must lie in (0, 1]");
            if (i > 0 && !(epsilon_list[i] < epsilon_list[i - 1]))
                throw DomainError("MCConfig: epsilon_list must be strictly decreasing");
        }
        for (std::size_t i = 0; i < nu_list.size(); ++i) {
            if (!(nu_list[i] >= 1.0) || !std::isfinite(nu_list[i])) throw DomainError("MCConfig: nu must be >= 1");
            if (i > 0 && !(nu_list[i] > nu_list[i - 1])) throw DomainError("MCConfig: nu_list must be strictly increasing");
        }
    }
};

// ---------------------------------------------------------------------------
// Reports

struct ReportRow {
    double sweep_value = 0.0;
    std::string estimator;
    double value = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    std::size_t n_effective = 0;
    std::size_t excluded = 0;
};

struct Manifest {
    std::string experiment;
    std::uint64_t master_seed = 0;
    std::string spec_id;
    std::string code_version = kVersion;
    std::string grid;
    std::map<std::string, double> parameters;
};

/// Outcome of one acceptance check attached to a report.
struct Check {
    std::string name;
    bool passed = true;
    std::string detail;
};

struct ExperimentReport {
    std::vector<ReportRow> rows;
    Manifest manifest;
    std::vector<Check> checks;

    bool passed() const {
        return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
    }

    /// Rows of one estimator in sweep order.
    std::vector<ReportRow> series(const std::string& estimator) const {
        std::vector<ReportRow> out;
        for (const auto& r : rows)
            if (r.estimator == estimator) out.push_back(r);
        return out;
    }
};

inline ReportRow make_row(double sweep, std::string estimator, const Estimate& e, std::size_t excluded) {
    return {sweep, std::move(estimator), e.value, e.lo, e.hi, e.n_effective, excluded};
}

/// True when every consecutive pair satisfies lo[k+1] <= hi[k], i.e. the
/// curve never rises beyond the confidence bands.
inline bool non_increasing_within_bands(const std::vector<ReportRow>& series) {
    for (std::size_t k = 1; k < series.size(); ++k)
        if (series[k].lo > series[k - 1].hi) return false;
    return true;
}

inline Check monotonicity_check(const ExperimentReport& report, const std::string& estimator) {
    const auto s = report.series(estimator);
    Check c{"non-increasing " + estimator, non_increasing_within_bands(s), {}};
    std::ostringstream msg;
    for (std::size_t k = 1; k < s.size(); ++k)
        if (s[k].lo > s[k - 1].hi)
            msg << "rise at sweep " << s[k].sweep_value << " (lo " << s[k].lo << " > previous hi " << s[k - 1].hi << "); ";
    c.detail = msg.str();
    return c;
}

/// Excluded-path fraction must stay at or below 0.1% for every row.
inline Check exclusion_check(const ExperimentReport& report, std::size_t n_paths) {
    Check c{"excluded fraction <= 0.001", true, {}};
    for (const auto& r : report.rows)
        if (static_cast<double>(r.excluded) > 1e-3 * static_cast<double>(n_paths)) {
            c.passed = false;
            c.detail += r.estimator + "@" + std::to_string(r.sweep_value) + " ";
        }
    return c;
}

// ---------------------------------------------------------------------------
// Matched path families

/// States of n_paths paths at a list of times, tagged with the noise they
/// were generated from. Estimators comparing two families require equal tags.
struct PathFamily {
    std::uint64_t master_seed = 0;
    std::size_t first_path = 0;
    std::string noise_id;
    std::vector<double> times;
    std::size_t n_paths = 0;
    std::size_t dim = 1;
    std::vector<double> values;   // [path][time][dim]
    std::vector<char> excluded;   // per path

    std::span<const double> at(std::size_t path, std::size_t time_index) const {
        return {values.data() + (path * times.size() + time_index) * dim, dim};
    }
};

namespace detail {

inline void require_matched(const PathFamily& a, const PathFamily& b) {
    if (a.master_seed != b.master_seed || a.first_path != b.first_path || a.n_paths != b.n_paths ||
        a.noise_id != b.noise_id || a.times != b.times || a.dim != b.dim)
        throw SeedMismatchError("path families were not generated from the same seed manifest");
}

inline std::size_t time_index(const PathFamily& f, double t) {
    for (std::size_t j = 0; j < f.times.size(); ++j)
        if (std::abs(f.times[j] - t) <= 1e-9 * std::max(1.0, std::abs(t))) return j;
    throw DomainError("lp_error_at_time: time not on the recording mesh");
}

}  // namespace detail

struct LpError {
    Estimate estimate;
    std::size_t excluded = 0;
};

/// (E|A_t - B_t|^p)^{1/p} over the paths not excluded in either family.
inline LpError lp_error_at_time(const PathFamily& a, const PathFamily& b, double p, double alpha, double t) {
    require_moment_order(p, alpha);
    detail::require_matched(a, b);
    const std::size_t j = detail::time_index(a, t);
    std::vector<double> powers;
    powers.reserve(a.n_paths);
    std::size_t excluded = 0;
    State diff(a.dim);
    for (std::size_t i = 0; i < a.n_paths; ++i) {
        if ((!a.excluded.empty() && a.excluded[i]) || (!b.excluded.empty() && b.excluded[i])) {
            ++excluded;
            continue;
        }
        const auto x = a.at(i, j), y = b.at(i, j);
        for (std::size_t k = 0; k < a.dim; ++k) diff[k] = x[k] - y[k];
        powers.push_back(std::pow(detail::norm(diff), p));
    }
    if (powers.empty()) throw DivergenceError("lp_error_at_time: every path was excluded");
    return {lp_norm_from_powers(powers, p), excluded};
}

// ---------------------------------------------------------------------------
// Shared-grid sweep engine

struct SweepOptions {
    std::vector<double> eps;   // sweep points, any order
    double T = 1.0;
    double h_factor = 1e-3;
    std::size_t mesh_points = 20;
    std::size_t n_paths = 1000;
    std::size_t first_path = 0;
    std::uint64_t master_seed = 1;
    State x0{1.0};
    State y0{0.0};
    bool auxiliary = false;
    std::vector<double> delta;   // per eps, used when auxiliary
    std::size_t decay_points = 0;  // early mesh of decay_points+1 times spaced eps/4
};

/// Per-eps recordings. Quantities: slow X, fast Y, averaged Xbar, and the
/// auxiliary pair when requested.
struct SweepResult {
    std::vector<double> eps;
    std::vector<double> step;        // integration step per eps
    std::vector<double> delta;       // snapped knot spacing per eps (0 if unused)
    std::string noise_id;
    std::vector<PathFamily> slow, fast, averaged, aux_slow, aux_fast;
    std::vector<PathFamily> decay_slow, decay_fast, decay_averaged;
};

namespace detail {

inline State broadcast(const State& v, std::size_t d, const char* what) {
    if (v.size() == d) return v;
    if (v.size() == 1) return State(d, v[0]);
    throw DomainError(std::string(what) + ": initial state dimension mismatch");
}

inline PathFamily empty_family(const SweepOptions& o, const std::string& noise_id, std::vector<double> times,
                               std::size_t d) {
    PathFamily f;
    f.master_seed = o.master_seed;
    f.first_path = o.first_path;
    f.noise_id = noise_id;
    f.times = std::move(times);
    f.n_paths = o.n_paths;
    f.dim = d;
    f.values.assign(o.n_paths * f.times.size() * d, 0.0);
    f.excluded.assign(o.n_paths, 0);
    return f;
}

}  // namespace detail

/// Integrates, for every eps in the sweep, the slow-fast system, the averaged
/// SDE and optionally the auxiliary processes, all driven by one noise path
/// per path index on a common fine grid. Each eps uses step m_eps * h_fine
/// with h_fine snapped so that every step is at most h_factor * min(1, eps)
/// and every mesh time lies on every grid. The slow, averaged and fast
/// channels use exponential Euler with the linear rates of the drifts; the
/// auxiliary slow channel has no dependence on its own state and uses Euler.
inline SweepResult simulate_sweep(const CoupledSpec& spec, const SweepOptions& o) {
    if (o.eps.empty()) throw DomainError("simulate_sweep: empty sweep");
    if (!(o.T > 0.0)) throw DomainError("simulate_sweep: T must be positive");
    if (o.mesh_points < 1 || o.n_paths < 1) throw DomainError("simulate_sweep: empty mesh or path set");
    if (o.auxiliary && o.delta.size() != o.eps.size()) throw DomainError("simulate_sweep: need one delta per eps");
    const std::size_t d = spec.dim();
    const State x0 = detail::broadcast(o.x0, d, "simulate_sweep");
    const State y0 = detail::broadcast(o.y0, d, "simulate_sweep");
    const std::size_t n_eps = o.eps.size();
    const double alpha = spec.law.alpha;

    auto target = [&](double e) { return o.h_factor * std::min(1.0, e); };
    const double h_min = target(*std::min_element(o.eps.begin(), o.eps.end()));
    std::vector<std::size_t> stride(n_eps);
    std::size_t lcm = 1;
    for (std::size_t e = 0; e < n_eps; ++e) {
        if (!(o.eps[e] > 0.0)) throw DomainError("simulate_sweep: eps must be positive");
        stride[e] = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(target(o.eps[e]) / h_min + 1e-9)));
        lcm = std::lcm(lcm, stride[e]);
    }
    const std::size_t unit = lcm * o.mesh_points;
    const auto blocks = static_cast<std::size_t>(std::ceil(o.T / (h_min * static_cast<double>(unit)) - 1e-9));
    const std::size_t n_fine = std::max<std::size_t>(1, blocks) * unit;
    const double h_fine = o.T / static_cast<double>(n_fine);

    SweepResult res;
    res.eps = o.eps;
    std::ostringstream id;
    id.precision(17);
    id << "fine-grid T=" << o.T << " n=" << n_fine << " alpha=" << alpha << " dim=" << d << " scale=" << spec.law.unit_scale();
    res.noise_id = id.str();

    std::vector<double> mesh_times;
    for (std::size_t j = 0; j <= o.mesh_points; ++j)
        mesh_times.push_back(static_cast<double>(j * (n_fine / o.mesh_points)) * h_fine);

    struct Plan {
        double eps, h, amp, coupling;
        ChannelIntensities sigma;
        ExponentialStep slow, fast;
        double lambda_slow, lambda_fast;
        std::size_t stride, knot_stride;
        std::size_t decay_spacing;
    };
    std::vector<Plan> plans;
    const double lambda_slow = 0.5 * (spec.f.linear_rate() + spec.g.linear_rate());
    for (std::size_t e = 0; e < n_eps; ++e) {
        Plan pl{};
        pl.eps = o.eps[e];
        pl.h = static_cast<double>(stride[e]) * h_fine;
        pl.amp = fast_amplitude(pl.eps, alpha);
        pl.coupling = 0.5 / pl.amp;
        pl.sigma = slowfast_noise(spec, pl.eps);
        pl.lambda_slow = lambda_slow;
        pl.lambda_fast = 2.0 / pl.eps + lambda_slow;
        pl.slow = ExponentialStep::make(pl.lambda_slow, pl.h, alpha);
        pl.fast = ExponentialStep::make(pl.lambda_fast, pl.h, alpha);
        pl.stride = stride[e];
        pl.knot_stride = 0;
        if (o.auxiliary) {
            if (!(o.delta[e] > 0.0)) throw DomainError("simulate_sweep: delta must be positive");
            pl.knot_stride = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(o.delta[e] / pl.h)));
        }
        pl.decay_spacing = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(0.25 * pl.eps / pl.h)));
        plans.push_back(pl);
        res.step.push_back(pl.h);
        res.delta.push_back(o.auxiliary ? static_cast<double>(pl.knot_stride) * pl.h : 0.0);

        res.slow.push_back(detail::empty_family(o, res.noise_id, mesh_times, d));
        res.fast.push_back(res.slow.back());
        res.averaged.push_back(res.slow.back());
        if (o.auxiliary) {
            res.aux_slow.push_back(res.slow.back());
            res.aux_fast.push_back(res.slow.back());
        }
        if (o.decay_points > 0) {
            std::vector<double> dt;
            const std::size_t n_coarse = n_fine / stride[e];
            for (std::size_t j = 0; j <= o.decay_points && j * pl.decay_spacing <= n_coarse; ++j)
                dt.push_back(static_cast<double>(j * pl.decay_spacing) * pl.h);
            res.decay_slow.push_back(detail::empty_family(o, res.noise_id, dt, d));
            res.decay_fast.push_back(res.decay_slow.back());
            res.decay_averaged.push_back(res.decay_slow.back());
        }
    }
    const std::size_t mesh_every = n_fine / o.mesh_points;

    parallel_for(o.n_paths, [&](std::size_t path) {
        NoiseStream noise(spec.law, h_fine, {o.master_seed, o.first_path + path, Purpose::Driver});
        struct Sys {
            State X, Y, Xbar, Xt, Yt, knot, acc;
            std::size_t count = 0, coarse = 0;
            bool bad = false;
        };
        std::vector<Sys> sys(n_eps);
        for (auto& s : sys) {
            s.X = s.Xbar = s.Xt = s.knot = x0;
            s.Y = s.Yt = y0;
            s.acc.assign(d, 0.0);
        }
        State dl(d), shifted(d), big_f(d), big_g(d), avg_f(d), avg_g(d);

        auto record = [&](std::vector<PathFamily>& fam, std::size_t e, std::size_t j, const State& v) {
            std::copy(v.begin(), v.end(), fam[e].values.begin() + static_cast<std::ptrdiff_t>((path * fam[e].times.size() + j) * d));
        };
        auto record_mesh = [&](std::size_t e, std::size_t j) {
            const auto& s = sys[e];
            record(res.slow, e, j, s.X);
            record(res.fast, e, j, s.Y);
            record(res.averaged, e, j, s.Xbar);
            if (o.auxiliary) {
                record(res.aux_slow, e, j, s.Xt);
                record(res.aux_fast, e, j, s.Yt);
            }
        };
        auto record_decay = [&](std::size_t e) {
            if (o.decay_points == 0) return;
            const auto& s = sys[e];
            const std::size_t c = s.coarse;
            if (c % plans[e].decay_spacing != 0) return;
            const std::size_t j = c / plans[e].decay_spacing;
            if (j >= res.decay_slow[e].times.size()) return;
            record(res.decay_slow, e, j, s.X);
            record(res.decay_fast, e, j, s.Y);
            record(res.decay_averaged, e, j, s.Xbar);
        };
        for (std::size_t e = 0; e < n_eps; ++e) {
            record_mesh(e, 0);
            record_decay(e);
        }

        for (std::size_t k = 1; k <= n_fine; ++k) {
            noise.next(dl);
            for (std::size_t e = 0; e < n_eps; ++e) {
                auto& s = sys[e];
                for (std::size_t i = 0; i < d; ++i) s.acc[i] += dl[i];
                if (++s.count < plans[e].stride) continue;
                s.count = 0;
                if (!s.bad) {
                    const Plan& pl = plans[e];
                    if (o.auxiliary && s.coarse % pl.knot_stride == 0) s.knot = s.X;
                    // Slow-fast pair.
                    detail::evaluate_fg(spec, s.X, s.Y, pl.amp, shifted, big_f, big_g);
                    for (std::size_t i = 0; i < d; ++i) {
                        const double slow = 0.5 * (big_f[i] + big_g[i]);
                        const double fast = pl.coupling * (big_f[i] - big_g[i]) - (2.0 / pl.eps) * s.Y[i];
                        s.X[i] = pl.slow.decay * s.X[i] + pl.slow.remainder * (slow + pl.lambda_slow * s.X[i]) +
                                 pl.sigma.slow * pl.slow.noise_factor * s.acc[i];
                        s.Y[i] = pl.fast.decay * s.Y[i] + pl.fast.remainder * (fast + pl.lambda_fast * s.Y[i]) +
                                 pl.sigma.fast * pl.fast.noise_factor * s.acc[i];
                    }
                    // Averaged equation.
                    spec.f(s.Xbar, 0.0, avg_f);
                    spec.g(s.Xbar, 0.0, avg_g);
                    for (std::size_t i = 0; i < d; ++i) {
                        const double drift = 0.5 * (avg_f[i] + avg_g[i]);
                        s.Xbar[i] = pl.slow.decay * s.Xbar[i] +
                                    pl.slow.remainder * (drift + pl.lambda_slow * s.Xbar[i]) +
                                    pl.sigma.slow * pl.slow.noise_factor * s.acc[i];
                    }
                    // Auxiliary pair with the slow argument held at the knot.
                    if (o.auxiliary) {
                        detail::evaluate_fg(spec, s.knot, s.Yt, pl.amp, shifted, big_f, big_g);
                        for (std::size_t i = 0; i < d; ++i) {
                            const double slow = 0.5 * (big_f[i] + big_g[i]);
                            const double fast = pl.coupling * (big_f[i] - big_g[i]) - (2.0 / pl.eps) * s.Yt[i];
                            s.Xt[i] += slow * pl.h + pl.sigma.slow * s.acc[i];
                            s.Yt[i] = pl.fast.decay * s.Yt[i] + pl.fast.remainder * (fast + pl.lambda_fast * s.Yt[i]) +
                                      pl.sigma.fast * pl.fast.noise_factor * s.acc[i];
                        }
                    }
                    if (!detail::all_finite(s.X) || !detail::all_finite(s.Y) || !detail::all_finite(s.Xbar) ||
                        (o.auxiliary && (!detail::all_finite(s.Xt) || !detail::all_finite(s.Yt))))
                        s.bad = true;
                }
                std::fill(s.acc.begin(), s.acc.end(), 0.0);
                ++s.coarse;
                record_decay(e);
                if (k % mesh_every == 0) record_mesh(e, k / mesh_every);
            }
        }
        for (std::size_t e = 0; e < n_eps; ++e) {
            const char bad = sys[e].bad ? 1 : 0;
            for (auto* fam : {&res.slow, &res.fast, &res.averaged, &res.aux_slow, &res.aux_fast, &res.decay_slow,
                              &res.decay_fast, &res.decay_averaged})
                if (!fam->empty()) (*fam)[e].excluded[path] = bad;
        }
    });
    return res;
}

namespace detail {

inline std::size_t count_excluded(const PathFamily& f) {
    return static_cast<std::size_t>(std::count(f.excluded.begin(), f.excluded.end(), 1));
}

// Max over the mesh of value, lo and hi taken separately.
inline Estimate sup_over_mesh(const std::vector<Estimate>& curve) {
    Estimate out{0.0, 0.0, 0.0, curve.empty() ? 0 : curve.front().n_effective};
    for (const auto& e : curve) {
        out.value = std::max(out.value, e.value);
        out.lo = std::max(out.lo, e.lo);
        out.hi = std::max(out.hi, e.hi);
        out.n_effective = std::min(out.n_effective, e.n_effective);
    }
    return out;
}

// L^p norm of one family at every mesh time (against zero).
inline std::vector<Estimate> lp_norm_curve(const PathFamily& f, double p) {
    std::vector<Estimate> out;
    std::vector<double> powers;
    for (std::size_t j = 0; j < f.times.size(); ++j) {
        powers.clear();
        for (std::size_t i = 0; i < f.n_paths; ++i)
            if (f.excluded.empty() || !f.excluded[i]) powers.push_back(std::pow(norm(f.at(i, j)), p));
        if (powers.empty()) throw DivergenceError("every path was excluded");
        out.push_back(lp_norm_from_powers(powers, p));
    }
    return out;
}

inline std::vector<Estimate> lp_error_curve(const PathFamily& a, const PathFamily& b, double p, double alpha) {
    std::vector<Estimate> out;
    for (double t : a.times) out.push_back(lp_error_at_time(a, b, p, alpha, t).estimate);
    return out;
}

inline Manifest base_manifest(const std::string& experiment, const CoupledSpec& spec, const MCConfig& mc) {
    Manifest m;
    m.experiment = experiment;
    m.master_seed = mc.master_seed;
    m.spec_id = spec.id;
    std::ostringstream grid;
    grid << "T=" << mc.T << " h_factor=" << mc.h_factor << " mesh_points=" << mc.mesh_points;
    m.grid = grid.str();
    m.parameters = {{"alpha", spec.law.alpha}, {"sigma1", spec.sigma1}, {"sigma2", spec.sigma2},
                    {"p", mc.p},             {"n_paths", static_cast<double>(mc.n_paths)}, {"T", mc.T},
                    {"h_factor", mc.h_factor}};
    return m;
}

inline SweepOptions sweep_options(const MCConfig& mc, std::vector<double> eps) {
    SweepOptions o;
    o.eps = std::move(eps);
    o.T = mc.T;
    o.h_factor = mc.h_factor;
    o.mesh_points = mc.mesh_points;
    o.n_paths = mc.n_paths;
    o.master_seed = mc.master_seed;
    o.x0 = mc.x0;
    o.y0 = mc.y0;
    return o;
}

}  // namespace detail

/// Averaging study. For each eps: sup over the mesh of the L^p distance
/// between the slow component and the averaged solution (slow_vs_averaged),
/// between the slow component and the auxiliary slow process
/// (slow_vs_auxiliary), the time integral of the L^p distance between the
/// fast component and the auxiliary fast process (fast_vs_auxiliary_int),
/// and the knot spacing actually used (delta).
inline ExperimentReport averaging_convergence(const CoupledSpec& spec, const MCConfig& mc) {
    mc.validate(spec.law.alpha);
    if (mc.epsilon_list.empty()) throw DomainError("averaging_convergence: empty epsilon_list");
    auto o = detail::sweep_options(mc, mc.epsilon_list);
    o.auxiliary = true;
    for (double e : mc.epsilon_list) o.delta.push_back(mc.delta_rule == DeltaRule::Fixed ? mc.delta_value : delta_schedule(e));
    const auto sim = simulate_sweep(spec, o);

    ExperimentReport rep;
    rep.manifest = detail::base_manifest("averaging", spec, mc);
    rep.manifest.grid += " | " + sim.noise_id;
    const double p = mc.p, alpha = spec.law.alpha;
    for (std::size_t e = 0; e < sim.eps.size(); ++e) {
        const double eps = sim.eps[e];
        const std::size_t excl = detail::count_excluded(sim.slow[e]);
        rep.rows.push_back(make_row(eps, "slow_vs_averaged",
                                    detail::sup_over_mesh(detail::lp_error_curve(sim.slow[e], sim.averaged[e], p, alpha)), excl));
        rep.rows.push_back(make_row(eps, "slow_vs_auxiliary",
                                    detail::sup_over_mesh(detail::lp_error_curve(sim.slow[e], sim.aux_slow[e], p, alpha)), excl));
        const auto fast_curve = detail::lp_error_curve(sim.fast[e], sim.aux_fast[e], p, alpha);
        Estimate integral{0.0, 0.0, 0.0, fast_curve.front().n_effective};
        for (std::size_t j = 1; j < fast_curve.size(); ++j) {
            const double dt = sim.fast[e].times[j] - sim.fast[e].times[j - 1];
            integral.value += 0.5 * dt * (fast_curve[j].value + fast_curve[j - 1].value);
            integral.lo += 0.5 * dt * (fast_curve[j].lo + fast_curve[j - 1].lo);
            integral.hi += 0.5 * dt * (fast_curve[j].hi + fast_curve[j - 1].hi);
        }
        rep.rows.push_back(make_row(eps, "fast_vs_auxiliary_int", integral, excl));
        rep.rows.push_back(make_row(eps, "delta", {sim.delta[e], sim.delta[e], sim.delta[e], mc.n_paths - excl}, excl));
    }
    rep.checks.push_back(monotonicity_check(rep, "slow_vs_averaged"));
    rep.checks.push_back(exclusion_check(rep, mc.n_paths));
    return rep;
}

/// Result of the persistence study: the report plus the fitted early decay
/// rate of the synchronization gap for each nu.
struct PersistenceResult {
    ExperimentReport report;
    std::vector<double> nu;
    std::vector<double> decay_rate;
};

/// Synchronization study. For each nu the coupled pair x = X + eps^{1/alpha} Y,
/// y = X - eps^{1/alpha} Y (eps = 1/nu) is compared with the averaged
/// solution under shared noise. Rows per nu:
///   sync_gap       mean over the late half of the mesh of E|x - xbar|^p + E|y - xbar|^p
///   sync_gap_rate  fitted decay rate of (E|x - xbar|^p)^{1/p} over the early mesh
inline PersistenceResult synchronization_persistence(const CoupledSpec& spec, const MCConfig& mc) {
    mc.validate(spec.law.alpha);
    if (mc.nu_list.empty()) throw DomainError("synchronization_persistence: empty nu_list");
    std::vector<double> eps;
    for (double nu : mc.nu_list) eps.push_back(1.0 / nu);
    auto o = detail::sweep_options(mc, eps);
    o.decay_points = 20;
    const auto sim = simulate_sweep(spec, o);
    const double p = mc.p;
    const std::size_t d = spec.dim();

    PersistenceResult out;
    auto& rep = out.report;
    rep.manifest = detail::base_manifest("persistence", spec, mc);
    rep.manifest.grid += " | " + sim.noise_id;

    // Per-path powers of |x - xbar| and |y - xbar| at mesh point j of family e.
    auto gap_powers = [&](const std::vector<PathFamily>& slow, const std::vector<PathFamily>& fast,
                          const std::vector<PathFamily>& avg, std::size_t e, std::size_t i, std::size_t j,
                          double& px, double& py) {
        const double amp = fast_amplitude(sim.eps[e], spec.law.alpha);
        const auto X = slow[e].at(i, j), Y = fast[e].at(i, j), A = avg[e].at(i, j);
        double sx = 0.0, sy = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
            const double gx = X[k] + amp * Y[k] - A[k], gy = X[k] - amp * Y[k] - A[k];
            sx += gx * gx;
            sy += gy * gy;
        }
        px = std::pow(std::sqrt(sx), p);
        py = std::pow(std::sqrt(sy), p);
    };

    for (std::size_t e = 0; e < sim.eps.size(); ++e) {
        const double nu = mc.nu_list[e];
        const std::size_t excl = detail::count_excluded(sim.slow[e]);
        const auto& times = sim.slow[e].times;
        const std::size_t first_late = times.size() / 2;
        std::vector<double> per_path;
        for (std::size_t i = 0; i < mc.n_paths; ++i) {
            if (sim.slow[e].excluded[i]) continue;
            double acc = 0.0;
            for (std::size_t j = first_late; j < times.size(); ++j) {
                double px, py;
                gap_powers(sim.slow, sim.fast, sim.averaged, e, i, j, px, py);
                acc += px + py;
            }
            per_path.push_back(acc / static_cast<double>(times.size() - first_late));
        }
        if (per_path.empty()) throw DivergenceError("synchronization_persistence: every path was excluded");
        rep.rows.push_back(make_row(nu, "sync_gap", median_of_means(per_path), excl));

        // Early decay of the L^p gap of the first coordinate system.
        const auto& dt = sim.decay_slow[e].times;
        std::vector<double> ts, logs;
        double initial = 0.0;
        for (std::size_t j = 0; j < dt.size(); ++j) {
            std::vector<double> powers;
            for (std::size_t i = 0; i < mc.n_paths; ++i) {
                if (sim.decay_slow[e].excluded[i]) continue;
                double px, py;
                gap_powers(sim.decay_slow, sim.decay_fast, sim.decay_averaged, e, i, j, px, py);
                powers.push_back(px);
            }
            const double v = lp_norm_from_powers(powers, p).value;
            if (j == 0) initial = v;
            if (v > 1e-8 * initial && v > 0.0) {
                ts.push_back(dt[j]);
                logs.push_back(std::log(v));
            }
        }
        double rate = std::numeric_limits<double>::quiet_NaN();
        if (ts.size() >= 2) rate = -least_squares(ts, logs).slope;
        out.nu.push_back(nu);
        out.decay_rate.push_back(rate);
        rep.rows.push_back(make_row(nu, "sync_gap_rate", {rate, rate, rate, mc.n_paths - excl}, excl));
    }
    rep.checks.push_back(monotonicity_check(rep, "sync_gap"));
    rep.checks.push_back(exclusion_check(rep, mc.n_paths));
    return out;
}

/// Moment study. Rows per eps: sup over the mesh of the L^p norm
/// of the slow and fast components, and the L^p norm of the frozen-fast
/// stationary measure at the initial slow state. The check requires each
/// quantity to vary by less than a factor two across the sweep.
inline ExperimentReport moment_uniformity(const CoupledSpec& spec, const MCConfig& mc) {
    mc.validate(spec.law.alpha);
    if (mc.epsilon_list.empty()) throw DomainError("moment_uniformity: empty epsilon_list");
    const auto sim = simulate_sweep(spec, detail::sweep_options(mc, mc.epsilon_list));
    ExperimentReport rep;
    rep.manifest = detail::base_manifest("moments", spec, mc);
    rep.manifest.grid += " | " + sim.noise_id;
    const State x_frozen = detail::broadcast(mc.x0, spec.dim(), "moment_uniformity");
    for (std::size_t e = 0; e < sim.eps.size(); ++e) {
        const double eps = sim.eps[e];
        const std::size_t excl = detail::count_excluded(sim.slow[e]);
        rep.rows.push_back(make_row(eps, "slow_norm", detail::sup_over_mesh(detail::lp_norm_curve(sim.slow[e], mc.p)), excl));
        rep.rows.push_back(make_row(eps, "fast_norm", detail::sup_over_mesh(detail::lp_norm_curve(sim.fast[e], mc.p)), excl));
        const auto measure = estimate_invariant_measure(spec, x_frozen, eps, std::max<std::size_t>(mc.n_paths, 1000),
                                                        {mc.master_seed, e, Purpose::Replica});
        rep.rows.push_back(make_row(eps, "fast_stationary_norm", stationary_lp_moment(measure, mc.p), 0));
    }
    for (const char* name : {"slow_norm", "fast_norm", "fast_stationary_norm"}) {
        const auto s = rep.series(name);
        double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
        for (const auto& r : s) {
            lo = std::min(lo, r.value);
            hi = std::max(hi, r.value);
        }
        std::ostringstream msg;
        msg << "max/min = " << (lo > 0 ? hi / lo : std::numeric_limits<double>::infinity());
        rep.checks.push_back({std::string("uniform ") + name, lo > 0.0 ? hi < 2.0 * lo : hi == 0.0, msg.str()});
    }
    rep.checks.push_back(exclusion_check(rep, mc.n_paths));
    return rep;
}

// ---------------------------------------------------------------------------
// Attractor diameter

struct AttractorOptions {
    std::vector<State> initial_states;  // at least 8
    State frozen_fast;                  // fast state held fixed; zero when empty
    double epsilon = 1.0;
    double h = 1e-3;
};

struct DiameterCurve {
    std::vector<double> times;
    std::vector<Estimate> lp_diameter;          // (E diam^p)^{1/p} per mesh time
    std::vector<std::vector<double>> diameters; // [path][mesh] pathwise diameters
    ExperimentReport report;
};

/// Evolves every initial state of the slow equation, with the fast state
/// frozen, under one shared noise path per path index and records the
/// diameter (largest pairwise distance) of the evolved set on the mesh.
/// With the fast state frozen at zero the slow drift is 1/2 (f + g).
inline DiameterCurve attractor_diameter(const CoupledSpec& spec, const AttractorOptions& opt, const MCConfig& mc) {
    require_moment_order(mc.p, spec.law.alpha);
    if (opt.initial_states.size() < 8) throw DomainError("attractor_diameter: need at least 8 initial states");
    if (mc.n_paths < 1) throw DomainError("attractor_diameter: need at least one path");
    const std::size_t d = spec.dim();
    for (const auto& s : opt.initial_states)
        if (s.size() != d) throw DomainError("attractor_diameter: initial state dimension mismatch");
    const State y = opt.frozen_fast.empty() ? State(d, 0.0) : opt.frozen_fast;
    const DriftField field = frozen_slow_field(spec, y, opt.epsilon);
    const State sigma(d, slowfast_noise(spec, opt.epsilon).slow);
    const auto n_steps = static_cast<std::size_t>(std::ceil(mc.T / opt.h / static_cast<double>(mc.mesh_points) - 1e-9)) *
                         mc.mesh_points;
    const PathGrid grid = PathGrid::make(0.0, mc.T, n_steps);
    const std::size_t every = n_steps / mc.mesh_points;
    const std::size_t n_ic = opt.initial_states.size();

    DiameterCurve out;
    for (std::size_t j = 0; j <= mc.mesh_points; ++j) out.times.push_back(grid.time(j * every));
    out.diameters.assign(mc.n_paths, std::vector<double>(mc.mesh_points + 1, 0.0));
    std::vector<char> bad(mc.n_paths, 0);

    parallel_for(mc.n_paths, [&](std::size_t path) {
        NoiseStream noise(spec.law, grid.step(), {mc.master_seed, path, Purpose::Driver});
        ExponentialStepper stepper(field, sigma, grid.step(), spec.law.alpha);
        std::vector<State> states = opt.initial_states;
        State dl(d), diff(d);
        auto diameter = [&] {
            double best = 0.0;
            for (std::size_t a = 0; a < n_ic; ++a)
                for (std::size_t b = a + 1; b < n_ic; ++b) {
                    for (std::size_t i = 0; i < d; ++i) diff[i] = states[a][i] - states[b][i];
                    best = std::max(best, detail::norm(diff));
                }
            return best;
        };
        out.diameters[path][0] = diameter();
        for (std::size_t k = 0; k < n_steps; ++k) {
            noise.next(dl);
            for (auto& s : states)
                if (!stepper.advance(s, grid.time(k), dl, s)) {
                    bad[path] = 1;
                    return;
                }
            if ((k + 1) % every == 0) out.diameters[path][(k + 1) / every] = diameter();
        }
    });

    const std::size_t excl = static_cast<std::size_t>(std::count(bad.begin(), bad.end(), 1));
    auto& rep = out.report;
    rep.manifest = detail::base_manifest("attractor", spec, mc);
    std::vector<double> powers;
    for (std::size_t j = 0; j < out.times.size(); ++j) {
        powers.clear();
        for (std::size_t i = 0; i < mc.n_paths; ++i)
            if (!bad[i]) powers.push_back(std::pow(out.diameters[i][j], mc.p));
        if (powers.empty()) throw DivergenceError("attractor_diameter: every path diverged");
        out.lp_diameter.push_back(lp_norm_from_powers(powers, mc.p));
        rep.rows.push_back(make_row(out.times[j], "lp_diameter", out.lp_diameter.back(), excl));
    }
    rep.checks.push_back({"diameter contracts", out.lp_diameter.back().value < out.lp_diameter.front().value, {}});
    rep.checks.push_back(exclusion_check(rep, mc.n_paths));
    return out;
}

// ---------------------------------------------------------------------------
// Stationary marginals

enum class StationaryRole { SlowStationary, AveragedStationary, FastStationary };

struct StationaryEstimate {
    StationaryRole role = StationaryRole::AveragedStationary;
    std::vector<double> samples;  // flat [path][dim], taken at time t1
    std::size_t dim = 1;
    double t1 = 0.0;
    double t2 = 0.0;
    double ks = 0.0;
    double ks_critical = 0.0;
    std::size_t excluded = 0;
};

namespace detail {

// First-coordinate values of independent paths at two times.
inline StationaryEstimate two_time_marginals(const DriftField& field, const State& sigma, const StableLaw& law,
                                             const State& x0, double relaxation_times, double t1, double t2, double h,
                                             std::size_t n, std::uint64_t seed) {
    const std::size_t d = field.dim();
    const auto steps = [&](double t) { return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(t / h - 1e-9))); };
    const std::size_t n1 = steps(t1), n2 = steps(t2);
    StationaryEstimate est;
    est.dim = d;
    est.t1 = static_cast<double>(n1) * h;
    est.t2 = static_cast<double>(n2) * h;
    est.samples.assign(n * d, 0.0);
    std::vector<double> late(n, 0.0);
    std::vector<char> bad(2 * n, 0);
    parallel_for(2 * n, [&](std::size_t path) {
        const bool second = path >= n;
        NoiseStream noise(law, h, {seed, path, Purpose::Driver});
        ExponentialStepper stepper(field, sigma, h, law.alpha);
        State x = x0, dl(d);
        const std::size_t total = second ? n2 : n1;
        for (std::size_t k = 0; k < total; ++k) {
            noise.next(dl);
            if (!stepper.advance(x, static_cast<double>(k) * h, dl, x)) {
                bad[path] = 1;
                return;
            }
        }
        if (second) late[path - n] = x[0];
        else std::copy(x.begin(), x.end(), est.samples.begin() + static_cast<std::ptrdiff_t>(path * d));
    });
    std::vector<double> a, b;
    for (std::size_t i = 0; i < n; ++i) {
        if (!bad[i]) a.push_back(est.samples[i * d]);
        if (!bad[n + i]) b.push_back(late[i]);
    }
    est.excluded = static_cast<std::size_t>(std::count(bad.begin(), bad.end(), 1));
    if (a.empty() || b.empty()) throw DivergenceError("stationary_marginal: every path diverged");
    // Degenerate clouds (no noise) are compared by location, at the residual
    // exp(-relaxation_times) |x0| left by the relaxation period; KS would
    // separate two point masses that differ only by that residual.
    const auto [a_lo, a_hi] = std::minmax_element(a.begin(), a.end());
    const auto [b_lo, b_hi] = std::minmax_element(b.begin(), b.end());
    const double tol = std::exp(-relaxation_times) * (1.0 + norm(x0)) + 1e-12;
    if (*a_hi - *a_lo <= tol && *b_hi - *b_lo <= tol) est.ks = std::abs(*a_lo - *b_lo) <= tol ? 0.0 : 1.0;
    else est.ks = ks_statistic(a, b);
    est.ks_critical = ks_critical(a.size(), b.size(), 0.01);
    return est;
}

}  // namespace detail

/// Stationary surrogate of an SDE dX = b(X) dt + sigma dL: the time-t1
/// marginal after at least ten relaxation times 1/relaxation_rate, checked
/// against an independent marginal at t2 = 2 t1 by a two-sample KS test at
/// the 1% level. A failed test raises NotRelaxedError.
inline StationaryEstimate stationary_marginal(const DriftField& drift, const State& sigma, const StableLaw& law,
                                              double relaxation_rate, StationaryRole role, const MCConfig& mc,
                                              const State& x0, double relaxation_times = 10.0, double h = 0.0) {
    require_moment_order(mc.p, law.alpha);
    if (!(relaxation_rate > 0.0)) throw DomainError("stationary_marginal: relaxation rate must be positive");
    if (relaxation_times < 10.0) throw DomainError("stationary_marginal: need at least ten relaxation times");
    const double t1 = relaxation_times / relaxation_rate;
    if (h <= 0.0) h = std::min(mc.h_factor, 0.01 / relaxation_rate);
    auto est = detail::two_time_marginals(drift, sigma, law, x0, relaxation_times, t1, 2.0 * t1, h, mc.n_paths, mc.master_seed);
    est.role = role;
    if (!(est.ks < est.ks_critical)) {
        std::ostringstream msg;
        msg << "stationary_marginal: KS distance " << est.ks << " between t=" << est.t1 << " and t=" << est.t2
            << " exceeds the 1% critical value " << est.ks_critical;
        throw NotRelaxedError(msg.str());
    }
    return est;
}

/// Averaged SDE dX = 1/2 (f + g) dt + (sigma1 + sigma2)/2 dL; relaxation
/// rate is the dissipativity of 1/2 (f + g), taken as its linear rate.
inline StationaryEstimate averaged_stationary(const CoupledSpec& spec, const MCConfig& mc) {
    const std::size_t d = spec.dim();
    const auto field = averaged_field(spec);
    const double rate = field.linear_rate();
    if (!(rate > 0.0)) throw DomainError("averaged_stationary: averaged drift has no linear dissipation");
    return stationary_marginal(field, State(d, 0.5 * (spec.sigma1 + spec.sigma2)), spec.law, rate,
                               StationaryRole::AveragedStationary, mc, detail::broadcast(mc.x0, d, "averaged_stationary"));
}

/// Frozen fast process at slow state x with relaxation rate 2/eps.
inline StationaryEstimate fast_stationary(const CoupledSpec& spec, const State& x, double epsilon, const MCConfig& mc) {
    const std::size_t d = spec.dim();
    const auto field = frozen_fast_field(spec, x, epsilon);
    return stationary_marginal(field, State(d, slowfast_noise(spec, epsilon).fast), spec.law, 2.0 / epsilon,
                               StationaryRole::FastStationary, mc, detail::broadcast(mc.y0, d, "fast_stationary"),
                               10.0, 0.01 * epsilon);
}

}  // namespace levysync
