// Grids, noise paths, integrators and the Hoelder increment estimator.
#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <sstream>
#include <vector>

#include "levysync/sde.hpp"

using namespace levysync;

namespace {

DriftField scalar_drift(std::function<double(double)> fn, double linear_rate = 0.0) {
    return DriftField::componentwise(1, std::move(fn), std::nullopt, linear_rate);
}

}  // namespace

TEST(PathGrid, Invariants) {
    const auto g = PathGrid::make(0.0, 2.0, 4);
    EXPECT_DOUBLE_EQ(g.step(), 0.5);
    EXPECT_DOUBLE_EQ(g.time(3), 1.5);
    EXPECT_THROW(PathGrid::make(1.0, 1.0, 4), DomainError);
    EXPECT_THROW(PathGrid::make(0.0, 1.0, 0), DomainError);
    EXPECT_EQ(PathGrid::with_max_step(0.0, 1.0, 0.3).n_steps, 4u);
}

TEST(NoisePath, ZeroScaleGivesZeroIncrements) {
    const auto law = StableLaw::make(1.5, 2, 0.0);
    const auto noise = generate_noise_path(law, PathGrid::make(0, 1, 100), {1, 0, Purpose::Driver});
    ASSERT_EQ(noise.size(), 100u);
    for (double x : noise.increments) EXPECT_EQ(x, 0.0);
}

TEST(NoisePath, SameKeySameIncrements) {
    const auto law = StableLaw::make(1.5);
    const auto grid = PathGrid::make(0, 1, 1000);
    const auto a = generate_noise_path(law, grid, {3, 9, Purpose::Driver});
    const auto b = generate_noise_path(law, grid, {3, 9, Purpose::Driver});
    const auto c = generate_noise_path(law, grid, {3, 10, Purpose::Driver});
    EXPECT_EQ(a.increments, b.increments);
    EXPECT_NE(a.increments, c.increments);

    // The streaming generator reproduces the materialized path bit for bit.
    NoiseStream stream(law, grid.step(), {3, 9, Purpose::Driver});
    for (std::size_t k = 0; k < grid.n_steps; ++k) EXPECT_EQ(stream.next_scalar(), a.increments[k]);
}

TEST(NoisePath, PooledIncrementCharacteristicFunction) {
    const auto law = StableLaw::make(1.5);
    const auto grid = PathGrid::make(0, 1, 100);  // h = 0.01
    std::vector<double> pooled;
    for (std::uint64_t p = 0; p < 1000; ++p) {
        const auto noise = generate_noise_path(law, grid, {4, p, Purpose::Driver});
        pooled.insert(pooled.end(), noise.increments.begin(), noise.increments.end());
    }
    const auto phi = empirical_char_function(pooled, 1.0);
    EXPECT_NEAR(phi.real(), std::exp(-0.01), 4.0 / std::sqrt(double(pooled.size())));
}

TEST(EulerMaruyama, DeterministicDecayMatchesClosedForm) {
    const auto law = StableLaw::make(1.5);
    const auto grid = PathGrid::make(0, 1, 100'000);
    const auto noise = generate_noise_path(law, grid, {1, 0, Purpose::Driver});
    const std::vector<double> sigma{0.0}, x0{1.0};
    const auto path = euler_maruyama(scalar_drift([](double x) { return -x; }), sigma, x0, grid, noise);
    EXPECT_NEAR(path.at(grid.n_steps)[0], std::exp(-1.0), 1e-4);
    EXPECT_FALSE(path.diverged);
}

TEST(EulerMaruyama, PureNoiseIsCumulativeSum) {
    const auto law = StableLaw::make(1.3);
    const auto grid = PathGrid::make(0, 1, 500);
    const auto noise = generate_noise_path(law, grid, {2, 0, Purpose::Driver});
    const std::vector<double> sigma{1.0}, x0{0.25};
    const auto path = euler_maruyama(scalar_drift([](double) { return 0.0; }), sigma, x0, grid, noise);
    double acc = 0.25;
    for (std::size_t k = 0; k < grid.n_steps; ++k) {
        acc += noise.increments[k];
        EXPECT_EQ(path.at(k + 1)[0], acc);
    }
}

TEST(EulerMaruyama, SingleExplicitStep) {
    const auto grid = PathGrid::make(0, 0.5, 1);
    const auto noise = generate_noise_path(StableLaw::make(1.5), grid, {1, 0, Purpose::Driver});
    const std::vector<double> sigma{0.0}, x0{0.0};
    const auto path = euler_maruyama(scalar_drift([](double) { return 2.0; }), sigma, x0, grid, noise);
    EXPECT_DOUBLE_EQ(path.at(1)[0], 1.0);
}

TEST(EulerMaruyama, NonFiniteStateFlagsDivergence) {
    const auto grid = PathGrid::make(0, 1, 50);
    const auto noise = generate_noise_path(StableLaw::make(1.5), grid, {1, 0, Purpose::Driver});
    const std::vector<double> sigma{0.0}, x0{1.0};
    const auto path = euler_maruyama(scalar_drift([](double x) { return x * x * x * 1e100; }), sigma, x0, grid, noise);
    EXPECT_TRUE(path.diverged);
    EXPECT_EQ(path.size(), grid.n_steps + 1);
    EXPECT_TRUE(std::isnan(path.at(grid.n_steps)[0]));
}

TEST(EulerMaruyama, RejectsMismatchedInputs) {
    const auto grid = PathGrid::make(0, 1, 10);
    const auto noise = generate_noise_path(StableLaw::make(1.5), PathGrid::make(0, 1, 20), {1, 0, Purpose::Driver});
    const std::vector<double> sigma{1.0}, x0{0.0};
    EXPECT_THROW(euler_maruyama(scalar_drift([](double) { return 0.0; }), sigma, x0, grid, noise), DomainError);
}

TEST(EulerMaruyama, SharedNoiseAcrossDrifts) {
    const auto grid = PathGrid::make(0, 1, 200);
    const auto noise = generate_noise_path(StableLaw::make(1.5), grid, {5, 1, Purpose::Driver});
    const std::vector<double> sigma{1.0}, x0{0.0};
    const auto a = euler_maruyama(scalar_drift([](double x) { return -x; }), sigma, x0, grid, noise);
    const auto b = euler_maruyama(scalar_drift([](double x) { return -3.0 * x; }), sigma, x0, grid, noise);
    // Increment consumed at step k is recoverable from either path and is bit-identical.
    for (std::size_t k = 0; k < grid.n_steps; ++k) {
        const double h = grid.step();
        const double xa = a.at(k)[0], xb = b.at(k)[0];
        EXPECT_NEAR(a.at(k + 1)[0] - (xa - xa * h), b.at(k + 1)[0] - (xb - 3.0 * xb * h), 1e-12);
    }
}

TEST(ExponentialEuler, ZeroRateEqualsEuler) {
    const auto grid = PathGrid::make(0, 1, 300);
    const auto noise = generate_noise_path(StableLaw::make(1.5), grid, {8, 0, Purpose::Driver});
    const std::vector<double> sigma{0.7}, x0{0.3};
    const auto drift = scalar_drift([](double x) { return std::sin(x); });
    EXPECT_EQ(exponential_euler(drift, sigma, x0, grid, noise).values,
              euler_maruyama(drift, sigma, x0, grid, noise).values);
}

TEST(OuExactPath, DeterministicDecay) {
    const auto grid = PathGrid::make(0, 1, 37);
    const std::vector<double> x0{1.0};
    const auto path = ou_exact_path(2.0, 0.0, StableLaw::make(1.5), x0, grid, {1, 0, Purpose::Driver});
    EXPECT_NEAR(path.at(grid.n_steps)[0], std::exp(-2.0), 1e-14);
    EXPECT_THROW(ou_exact_path(0.0, 1.0, StableLaw::make(1.5), x0, grid, {1, 0, Purpose::Driver}), DomainError);
}

TEST(OuExactPath, GaussianStationaryVariance) {
    // alpha = 2: exp(-t u^2) convention, dY = -2Y dt + dL has variance 2/(2*2) = 0.5.
    const auto law = StableLaw::make(2.0);
    const auto grid = PathGrid::make(0, 10, 20);
    std::vector<double> finals;
    const std::vector<double> x0{0.0};
    for (std::uint64_t p = 0; p < 100'000; ++p)
        finals.push_back(ou_exact_path(2.0, 1.0, law, x0, grid, {6, p, Purpose::Driver}).at(grid.n_steps)[0]);
    double v = 0.0;
    for (double x : finals) v += x * x;
    v /= static_cast<double>(finals.size());
    EXPECT_NEAR(v, 0.5, 0.5 * 0.02);
}

TEST(OuExactPath, StableStationaryCharacteristicFunction) {
    // Stationary law exp(-|u|^a / (a lambda)) for sigma = 1.
    const double alpha = 1.5, lambda = 2.0;
    const auto law = StableLaw::make(alpha);
    const auto grid = PathGrid::make(0, 8, 16);
    std::vector<double> finals;
    const std::vector<double> x0{3.0};
    for (std::uint64_t p = 0; p < 200'000; ++p)
        finals.push_back(ou_exact_path(lambda, 1.0, law, x0, grid, {7, p, Purpose::Driver}).at(grid.n_steps)[0]);
    for (double u : {0.5, 1.0, 2.0}) {
        const auto phi = empirical_char_function(finals, u);
        EXPECT_NEAR(phi.real(), std::exp(-std::pow(u, alpha) / (alpha * lambda)), 4.0 / std::sqrt(2e5)) << u;
    }
}

TEST(Integrators, EulerAgreesWithExactOuAsStepShrinks) {
    // L^1.2 norm of the final state: Euler vs exact stepping, gap shrinks with h.
    const double alpha = 1.5, lambda = 1.0, p = 1.2;
    const auto law = StableLaw::make(alpha);
    const auto drift = scalar_drift([lambda](double x) { return -lambda * x; });
    const std::vector<double> sigma{1.0}, x0{1.0};
    auto gap = [&](std::size_t n_steps) {
        const auto grid = PathGrid::make(0, 1, n_steps);
        std::vector<double> em, ex;
        for (std::uint64_t k = 0; k < 20'000; ++k) {
            const auto noise = generate_noise_path(law, grid, {9, k, Purpose::Driver});
            em.push_back(std::pow(std::abs(euler_maruyama(drift, sigma, x0, grid, noise).at(n_steps)[0]), p));
            ex.push_back(std::pow(std::abs(ou_exact_path(lambda, 1.0, law, x0, grid, {9, k, Purpose::Driver})
                                               .at(n_steps)[0]),
                                  p));
        }
        return std::abs(lp_norm_from_powers(em, p).value - lp_norm_from_powers(ex, p).value);
    };
    const double coarse = gap(4), fine = gap(32);
    EXPECT_LT(fine, coarse);
    EXPECT_LT(coarse, 0.5 * std::sqrt(0.25) + 0.02);
}

TEST(Holder, ConstantPathsGiveZero) {
    const auto grid = PathGrid::make(0, 1, 100);
    std::vector<SamplePath> paths(10, SamplePath{grid, 1, std::vector<double>(101, 4.0)});
    const std::vector<double> lags{0.01, 0.05, 0.1};
    const auto est = holder_increment_estimate(paths, 1.2, 1.5, lags);
    for (const auto& ln : est.norms) EXPECT_EQ(ln.norm, 0.0);
    EXPECT_TRUE(std::isnan(est.slope));
}

TEST(Holder, PureNoiseSlopeIsInverseAlpha) {
    const double alpha = 1.5;
    const auto law = StableLaw::make(alpha);
    const auto grid = PathGrid::make(0, 1, 256);
    const std::vector<double> sigma{1.0}, x0{0.0};
    const auto zero = scalar_drift([](double) { return 0.0; });
    std::vector<SamplePath> paths;
    for (std::uint64_t k = 0; k < 2000; ++k)
        paths.push_back(euler_maruyama(zero, sigma, x0, grid, generate_noise_path(law, grid, {10, k, Purpose::Driver})));
    const std::vector<double> lags{1.0 / 256, 4.0 / 256, 16.0 / 256, 64.0 / 256};
    EXPECT_NEAR(holder_increment_estimate(paths, 1.2, alpha, lags).slope, 1.0 / alpha, 0.1);
}

TEST(Holder, SmoothDriftSlopeIsOne) {
    const auto law = StableLaw::make(1.5);
    const auto grid = PathGrid::make(0, 1, 256);
    const std::vector<double> sigma{0.0};
    const auto drift = scalar_drift([](double x) { return 1.0 + 0.5 * std::cos(x); });
    std::vector<SamplePath> paths;
    for (std::uint64_t k = 0; k < 50; ++k) {
        const std::vector<double> x0{0.1 * static_cast<double>(k)};
        paths.push_back(euler_maruyama(drift, sigma, x0, grid, generate_noise_path(law, grid, {11, k, Purpose::Driver})));
    }
    const std::vector<double> lags{1.0 / 256, 4.0 / 256, 16.0 / 256, 64.0 / 256};
    EXPECT_NEAR(holder_increment_estimate(paths, 1.2, 1.5, lags).slope, 1.0, 0.1);
}

TEST(Holder, Errors) {
    const auto grid = PathGrid::make(0, 1, 100);
    std::vector<SamplePath> paths(2, SamplePath{grid, 1, std::vector<double>(101, 0.0)});
    const std::vector<double> ok{0.01}, bad{0.015};
    EXPECT_THROW(holder_increment_estimate(paths, 1.5, 1.5, ok), MomentOrderError);
    EXPECT_THROW(holder_increment_estimate(paths, 1.2, 1.5, bad), DomainError);
}

TEST(SamplePathCsv, HeaderAndRows) {
    const auto grid = PathGrid::make(0, 1, 2);
    const SamplePath path{grid, 2, {0, 1, 2, 3, 4, 5}};
    std::ostringstream os;
    write_csv(os, path);
    EXPECT_EQ(os.str(), "t,x1,x2\n0,0,1\n0.5,2,3\n1,4,5\n");
}
