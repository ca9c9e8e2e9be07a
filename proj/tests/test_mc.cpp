// Experiment harness: schedules, matched-path estimators, sweep engine and
// the per-experiment closed-form cases.
#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "levysync/mc.hpp"

using namespace levysync;

namespace {

CoupledSpec make_spec(DriftField f, DriftField g, double s1, double s2, double alpha = 1.5) {
    return CoupledSpec::make(std::move(f), std::move(g), s1, s2, 1.0, StableLaw::make(alpha), "test");
}

DriftField linear(double a) { return make_drift("linear", {{"a", a}}, 1); }

PathFamily family(std::vector<double> values, std::size_t n_paths, std::vector<double> times) {
    PathFamily f;
    f.master_seed = 7;
    f.noise_id = "grid";
    f.times = std::move(times);
    f.n_paths = n_paths;
    f.values = std::move(values);
    f.excluded.assign(n_paths, 0);
    return f;
}

MCConfig small_config() {
    MCConfig mc;
    mc.n_paths = 1000;
    mc.T = 1.0;
    mc.h_factor = 1e-2;
    mc.mesh_points = 10;
    mc.master_seed = 11;
    return mc;
}

}  // namespace

TEST(DeltaSchedule, ClosedFormValues) {
    EXPECT_NEAR(delta_schedule(std::exp(-1.0)), 0.367879441171442, 1e-12);
    EXPECT_NEAR(delta_schedule(std::exp(-4.0)), 0.036631277777468, 1e-12);
    EXPECT_LT(delta_schedule(1.0 - 1e-12), 1e-5);
    EXPECT_THROW(delta_schedule(1.0), DomainError);
    EXPECT_THROW(delta_schedule(1.5), DomainError);
    EXPECT_THROW(delta_schedule(0.0), DomainError);
}

TEST(MCConfigValidation, RejectsBadSweepsAndOrders) {
    MCConfig mc;
    EXPECT_NO_THROW(mc.validate(1.5));
    mc.p = 1.5;
    EXPECT_THROW(mc.validate(1.5), MomentOrderError);
    mc.p = 1.2;
    mc.n_paths = 999;
    EXPECT_THROW(mc.validate(1.5), DomainError);
    mc.n_paths = 1000;
    mc.epsilon_list = {0.1, 0.1};
    EXPECT_THROW(mc.validate(1.5), DomainError);
    mc.epsilon_list = {0.1};
    mc.nu_list = {4, 1};
    EXPECT_THROW(mc.validate(1.5), DomainError);
}

TEST(LpError, IdenticalFamiliesGiveZero) {
    const auto a = family({1.0, 2.0, -3.0, 0.5, 4.0, -1.0}, 3, {0.0, 1.0});
    const auto e = lp_error_at_time(a, a, 1.2, 1.5, 1.0);
    EXPECT_EQ(e.estimate.value, 0.0);
    EXPECT_EQ(e.estimate.hi, 0.0);
}

TEST(LpError, DeterministicOffset) {
    std::vector<double> va, vb;
    for (int i = 0; i < 400; ++i) {
        const double x = std::sin(i * 1.7) * 10.0;
        va.push_back(x);
        vb.push_back(x - 0.75);
    }
    const auto a = family(va, 400, {0.0}), b = family(vb, 400, {0.0});
    const auto e = lp_error_at_time(a, b, 1.2, 1.5, 0.0);
    EXPECT_NEAR(e.estimate.value, 0.75, 1e-12);
    EXPECT_NEAR(e.estimate.lo, 0.75, 1e-12);
    EXPECT_NEAR(e.estimate.hi, 0.75, 1e-12);
}

TEST(LpError, RejectsUnmatchedFamiliesAndBadOrder) {
    auto a = family({1.0, 2.0}, 2, {0.0});
    auto b = a;
    b.master_seed = 8;
    EXPECT_THROW(lp_error_at_time(a, b, 1.2, 1.5, 0.0), SeedMismatchError);
    b = a;
    b.noise_id = "other";
    EXPECT_THROW(lp_error_at_time(a, b, 1.2, 1.5, 0.0), SeedMismatchError);
    EXPECT_THROW(lp_error_at_time(a, a, 1.5, 1.5, 0.0), MomentOrderError);
    EXPECT_THROW(lp_error_at_time(a, a, 1.2, 1.5, 0.5), DomainError);
}

TEST(LpError, ExcludedPathsAreCounted) {
    auto a = family({1.0, 2.0, 3.0}, 3, {0.0});
    auto b = family({1.0, 2.0, 3.5}, 3, {0.0});
    b.excluded[2] = 1;
    const auto e = lp_error_at_time(a, b, 1.2, 1.5, 0.0);
    EXPECT_EQ(e.excluded, 1u);
    EXPECT_EQ(e.estimate.value, 0.0);
}

TEST(Sweep, MeshTimesLieOnEveryGrid) {
    const auto spec = make_spec(linear(1.0), linear(1.0), 1.0, 1.0);
    SweepOptions o;
    o.eps = {0.1, 0.03, 0.01};
    o.T = 1.0;
    o.h_factor = 1e-2;
    o.mesh_points = 7;
    o.n_paths = 4;
    const auto sim = simulate_sweep(spec, o);
    ASSERT_EQ(sim.slow.size(), 3u);
    for (std::size_t e = 0; e < 3; ++e) {
        EXPECT_LE(sim.step[e], 1e-2 * o.eps[e] * (1 + 1e-12));
        EXPECT_NEAR(sim.slow[e].times.back(), 1.0, 1e-12);
        for (double t : sim.slow[e].times) {
            const double k = t / sim.step[e];
            EXPECT_NEAR(k, std::round(k), 1e-6);
        }
    }
}

// Linear f = g = -a x with sigma1 = sigma2: the slow equation is the averaged
// equation, so X and Xbar agree, and the fast component carries no noise and
// decays as exp(-(a + 2/eps) t).
TEST(Sweep, LinearSymmetricCaseMatchesClosedForm) {
    const double a = 0.7;
    const auto spec = make_spec(linear(a), linear(a), 1.0, 1.0);
    SweepOptions o;
    o.eps = {0.1, 0.05};
    o.T = 1.0;
    o.h_factor = 1e-2;
    o.mesh_points = 10;
    o.n_paths = 64;
    o.x0 = {1.0};
    o.y0 = {2.0};
    const auto sim = simulate_sweep(spec, o);
    for (std::size_t e = 0; e < 2; ++e) {
        const double rate = a + 2.0 / o.eps[e];
        for (std::size_t j = 0; j < sim.slow[e].times.size(); ++j) {
            const double t = sim.slow[e].times[j];
            const auto err = lp_error_at_time(sim.slow[e], sim.averaged[e], 1.2, 1.5, t);
            EXPECT_LE(err.estimate.hi, 1e-12);
            for (std::size_t i = 0; i < o.n_paths; ++i)
                EXPECT_NEAR(sim.fast[e].at(i, j)[0], 2.0 * std::exp(-rate * t), 1e-12 + 1e-9 * std::exp(-rate * t));
        }
    }
}

// f = g = -x + tanh(x)/2 with sigma1 = sigma2 and Y0 = 1. The linear parts
// cancel, so |d(X - Xbar)| <= -|X - Xbar|/2 + amp |Y| / 2 and |Y| decays at
// least as exp(-(2/eps + 1/2) t); the comparison ODE gives the envelope
//   amp/2 * exp(-t/2) (1 - exp(-2t/eps)) eps/2.
TEST(Sweep, SymmetricNonlinearCaseStaysUnderGronwallEnvelope) {
    const auto f = make_drift("tanh_dissipative", {{"a", 1.0}, {"b", 0.5}}, 1);
    const auto spec = make_spec(f, f, 0.8, 0.8);
    SweepOptions o;
    o.eps = {0.1, 0.02};
    o.T = 2.0;
    o.h_factor = 1e-2;
    o.mesh_points = 20;
    o.n_paths = 256;
    o.x0 = {0.3};
    o.y0 = {1.0};
    const auto sim = simulate_sweep(spec, o);
    for (std::size_t e = 0; e < 2; ++e) {
        const double eps = o.eps[e], amp = fast_amplitude(eps, 1.5);
        double worst = 0.0;
        for (std::size_t j = 1; j < sim.slow[e].times.size(); ++j) {
            const double t = sim.slow[e].times[j];
            const double env = 0.5 * amp * std::exp(-0.5 * t) * (1 - std::exp(-2 * t / eps)) * eps / 2;
            for (std::size_t i = 0; i < o.n_paths; ++i) {
                const double gap = std::abs(sim.slow[e].at(i, j)[0] - sim.averaged[e].at(i, j)[0]);
                EXPECT_LE(gap, env * 1.01 + 1e-14) << "eps=" << eps << " t=" << t;
            }
            worst = std::max(worst, lp_error_at_time(sim.slow[e], sim.averaged[e], 1.2, 1.5, t).estimate.value);
        }
        EXPECT_GT(worst, 0.0);
    }
}

TEST(Sweep, RerunIsBitIdenticalAndIndependentOfWorkers) {
    const auto f = make_drift("tanh_dissipative", {{"a", 2.0}, {"b", 1.0}}, 1);
    const auto g = make_drift("tanh_dissipative", {{"a", 1.0}, {"b", 0.5}}, 1);
    const auto spec = make_spec(f, g, 1.0, 0.5);
    SweepOptions o;
    o.eps = {0.1, 0.05};
    o.T = 0.5;
    o.h_factor = 1e-2;
    o.mesh_points = 5;
    o.n_paths = 32;
    o.auxiliary = true;
    o.delta = {delta_schedule(0.1), delta_schedule(0.05)};
    const auto a = simulate_sweep(spec, o);
    const auto b = simulate_sweep(spec, o);
    for (std::size_t e = 0; e < 2; ++e) {
        EXPECT_EQ(a.slow[e].values, b.slow[e].values);
        EXPECT_EQ(a.fast[e].values, b.fast[e].values);
        EXPECT_EQ(a.aux_slow[e].values, b.aux_slow[e].values);
        EXPECT_EQ(a.aux_fast[e].values, b.aux_fast[e].values);
    }
}

TEST(Sweep, DeltaIsSnappedToTheStep) {
    const auto spec = make_spec(linear(1.0), linear(1.0), 1.0, 0.5);
    SweepOptions o;
    o.eps = {0.05};
    o.T = 0.2;
    o.h_factor = 1e-2;
    o.mesh_points = 2;
    o.n_paths = 2;
    o.auxiliary = true;
    o.delta = {delta_schedule(0.05)};
    const auto sim = simulate_sweep(spec, o);
    const double k = sim.delta[0] / sim.step[0];
    EXPECT_NEAR(k, std::round(k), 1e-9);
    EXPECT_NEAR(sim.delta[0], delta_schedule(0.05), sim.step[0]);
}

TEST(Averaging, ReportShapeAndDeterminism) {
    const auto f = make_drift("tanh_dissipative", {{"a", 2.0}, {"b", 1.0}}, 1);
    const auto g = make_drift("tanh_dissipative", {{"a", 1.0}, {"b", 0.5}}, 1);
    const auto spec = make_spec(f, g, 1.0, 0.5);
    auto mc = small_config();
    mc.epsilon_list = {0.1, 0.05};
    const auto a = averaging_convergence(spec, mc);
    const auto b = averaging_convergence(spec, mc);
    ASSERT_EQ(a.rows.size(), 8u);
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        EXPECT_EQ(a.rows[i].value, b.rows[i].value);
        EXPECT_EQ(a.rows[i].lo, b.rows[i].lo);
        EXPECT_EQ(a.rows[i].hi, b.rows[i].hi);
        EXPECT_LE(a.rows[i].lo, a.rows[i].value);
        EXPECT_LE(a.rows[i].value, a.rows[i].hi);
    }
    EXPECT_EQ(a.series("slow_vs_averaged").size(), 2u);
    EXPECT_EQ(a.manifest.master_seed, 11u);
    EXPECT_EQ(a.manifest.spec_id, "test");
}

// The CLT scaling needs a finite variance of |D|^p, which holds in the
// Gaussian case; for alpha < 2 the tail index of |D|^p is alpha/p and the
// band shrinks more slowly.
TEST(Averaging, BandsShrinkWithMorePaths) {
    const auto f = make_drift("tanh_dissipative", {{"a", 2.0}, {"b", 1.0}}, 1);
    const auto g = make_drift("tanh_dissipative", {{"a", 1.0}, {"b", 0.5}}, 1);
    const auto spec = make_spec(f, g, 1.0, 0.5, 2.0);
    SweepOptions o;
    o.eps = {0.1};
    o.T = 0.5;
    o.h_factor = 1e-2;
    o.mesh_points = 5;
    double small_hw = 0.0, large_hw = 0.0;
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
        o.master_seed = seed;
        o.n_paths = 2000;
        const auto small = simulate_sweep(spec, o);
        o.n_paths = 4000;
        const auto large = simulate_sweep(spec, o);
        for (std::size_t j = 1; j < small.slow[0].times.size(); ++j) {
            const double t = small.slow[0].times[j];
            small_hw += lp_error_at_time(small.slow[0], small.averaged[0], 1.2, 2.0, t).estimate.half_width();
            large_hw += lp_error_at_time(large.slow[0], large.averaged[0], 1.2, 2.0, t).estimate.half_width();
        }
    }
    EXPECT_NEAR(large_hw / small_hw, 1.0 / std::sqrt(2.0), 0.1);
}

TEST(Persistence, LinearSymmetricGapDecaysAtClosedFormRate) {
    const double a = 0.5;
    const auto spec = make_spec(linear(a), linear(a), 1.0, 1.0);
    auto mc = small_config();
    mc.nu_list = {1.0, 4.0, 16.0};
    mc.y0 = {1.0};
    const auto res = synchronization_persistence(spec, mc);
    ASSERT_EQ(res.decay_rate.size(), 3u);
    for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(res.decay_rate[k], a + 2.0 * mc.nu_list[k], 1e-6 * (a + 2 * mc.nu_list[k]));
    const auto gap = res.report.series("sync_gap");
    for (std::size_t k = 1; k < gap.size(); ++k) EXPECT_LT(gap[k].value, gap[k - 1].value);
    EXPECT_TRUE(res.report.passed());
}

TEST(Moments, ZeroDriftNoiselessLimitKeepsInitialNorm) {
    // Constant zero drifts with a vanishing common noise: the slow norm stays |x0|.
    const auto zero = make_drift("constant", {}, 1);
    const auto spec = CoupledSpec::make(zero, zero, 1e-300, 1e-300, 1.0, StableLaw::make(1.5));
    auto mc = small_config();
    mc.epsilon_list = {0.1, 0.05};
    mc.x0 = {2.0};
    const auto rep = moment_uniformity(spec, mc);
    for (const auto& r : rep.series("slow_norm")) EXPECT_NEAR(r.value, 2.0, 1e-12);
    for (const auto& r : rep.series("fast_norm")) EXPECT_NEAR(r.value, 0.0, 1e-12);
}

TEST(Moments, PureNoiseSlowNormGrowsLikeSelfSimilarScale) {
    // X_t = (sigma1 + sigma2)/2 L_t with no drift, so (E|X_t|^p)^{1/p} scales as t^{1/alpha}.
    const auto zero = make_drift("constant", {}, 1);
    const auto spec = CoupledSpec::make(zero, zero, 1.0, 1.0, 1.0, StableLaw::make(1.5));
    SweepOptions o;
    o.eps = {0.1};
    o.T = 1.0;
    o.h_factor = 1e-2;
    o.mesh_points = 4;
    o.n_paths = 20000;
    o.x0 = {0.0};
    const auto sim = simulate_sweep(spec, o);
    const auto curve = detail::lp_norm_curve(sim.slow[0], 1.2);
    const double ratio = curve[4].value / curve[1].value;  // t = 1 over t = 1/4
    EXPECT_NEAR(ratio, std::pow(4.0, 1.0 / 1.5), 0.1 * std::pow(4.0, 1.0 / 1.5));
}

TEST(Attractor, LinearDiameterDecaysExactly) {
    const double a = 0.8;
    const auto spec = make_spec(linear(a), linear(a), 1.0, 0.5);
    auto mc = small_config();
    mc.n_paths = 8;
    mc.T = 2.0;
    AttractorOptions opt;
    for (int i = 0; i < 8; ++i) opt.initial_states.push_back({-5.0 + 10.0 * i / 7.0});
    opt.h = 1e-3;
    const auto out = attractor_diameter(spec, opt, mc);
    for (std::size_t i = 0; i < mc.n_paths; ++i)
        for (std::size_t j = 0; j < out.times.size(); ++j) {
            const double expected = 10.0 * std::exp(-a * out.times[j]);
            EXPECT_NEAR(out.diameters[i][j], expected, 1e-8 * expected);
        }
}

TEST(Attractor, IdenticalInitialStatesStayTogether) {
    const auto spec = make_spec(linear(1.0), linear(1.0), 1.0, 0.5);
    auto mc = small_config();
    mc.n_paths = 4;
    AttractorOptions opt;
    opt.initial_states.assign(8, State{1.5});
    const auto out = attractor_diameter(spec, opt, mc);
    for (const auto& row : out.diameters)
        for (double v : row) EXPECT_EQ(v, 0.0);
    opt.initial_states.resize(7);
    EXPECT_THROW(attractor_diameter(spec, opt, mc), DomainError);
}

TEST(Stationary, OuMarginalPassesTwoTimeTest) {
    const auto spec = make_spec(linear(1.0), linear(1.0), 1.0, 1.0, 2.0);
    auto mc = small_config();
    mc.n_paths = 2000;
    const auto est = averaged_stationary(spec, mc);
    EXPECT_EQ(est.role, StationaryRole::AveragedStationary);
    EXPECT_GE(est.t1, 10.0 - 1e-9);
    EXPECT_LT(est.ks, est.ks_critical);
    // Gaussian OU with sigma = 1 and rate 1 under variance 2t: variance 1.
    double v = 0.0;
    for (double x : est.samples) v += x * x;
    v /= static_cast<double>(est.samples.size());
    EXPECT_NEAR(v, 1.0, 0.1);
}

TEST(Stationary, DeterministicFlowCollapsesToFixedPoint) {
    const auto f = linear(2.0);
    const State sigma{0.0};
    auto mc = small_config();
    const auto est = stationary_marginal(f, sigma, StableLaw::make(1.5), 2.0, StationaryRole::SlowStationary, mc, {3.0});
    // Ten relaxation times of rate 2 leave 3 exp(-10) of the initial offset.
    for (double x : est.samples) EXPECT_NEAR(x, 3.0 * std::exp(-10.0), 1e-3 * 3.0 * std::exp(-10.0));
}

TEST(Stationary, TooFewRelaxationTimesRejected) {
    auto mc = small_config();
    EXPECT_THROW(stationary_marginal(linear(1.0), {1.0}, StableLaw::make(1.5), 1.0, StationaryRole::SlowStationary, mc,
                                     {0.0}, 5.0),
                 DomainError);
}

TEST(Stationary, UnrelaxedCloudIsFlagged) {
    // Claiming a relaxation rate 1000x too fast leaves the cloud far from equilibrium.
    auto mc = small_config();
    EXPECT_THROW(stationary_marginal(linear(0.01), {0.1}, StableLaw::make(1.5), 10.0, StationaryRole::SlowStationary, mc,
                                     {50.0}, 10.0, 0.01),
                 NotRelaxedError);
}

TEST(Reports, MonotonicityWithinBands) {
    std::vector<ReportRow> rows{{0.1, "e", 1.0, 0.8, 1.2, 10, 0}, {0.05, "e", 1.1, 0.9, 1.3, 10, 0}};
    EXPECT_TRUE(non_increasing_within_bands(rows));
    rows[1].lo = 1.25;
    EXPECT_FALSE(non_increasing_within_bands(rows));
    ExperimentReport rep;
    rep.rows = rows;
    rep.rows[0].excluded = 2;
    EXPECT_FALSE(exclusion_check(rep, 1000).passed);
    rep.rows[0].excluded = 1;
    EXPECT_TRUE(exclusion_check(rep, 1000).passed);
}
