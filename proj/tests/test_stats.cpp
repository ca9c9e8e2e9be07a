#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "levysync/rng.hpp"
#include "levysync/stats.hpp"

using namespace levysync;

TEST(Median, OddEven) {
    EXPECT_DOUBLE_EQ(median({3.0, 1.0, 2.0}), 2.0);
    EXPECT_DOUBLE_EQ(median({4.0, 1.0, 3.0, 2.0}), 2.5);
    EXPECT_THROW(median({}), std::invalid_argument);
}

TEST(MedianOfMeans, ConstantSampleHasZeroBand) {
    const std::vector<double> v(1000, 2.5);
    const auto e = median_of_means(v);
    EXPECT_DOUBLE_EQ(e.value, 2.5);
    EXPECT_DOUBLE_EQ(e.lo, 2.5);
    EXPECT_DOUBLE_EQ(e.hi, 2.5);
    EXPECT_EQ(e.n_effective, 1000u);
}

TEST(MedianOfMeans, RobustToOneHugeOutlier) {
    std::vector<double> v(1600, 1.0);
    v[17] = 1e12;
    const auto e = median_of_means(v);
    EXPECT_DOUBLE_EQ(e.value, 1.0);
}

TEST(MedianOfMeans, BandShrinksLikeInverseRootN) {
    RandomStream rng({7, 0, Purpose::Sampler});
    std::vector<double> big(64000);
    for (auto& x : big) x = rng.exponential();
    const std::vector<double> small(big.begin(), big.begin() + 32000);
    const double ratio = median_of_means(big).half_width() / median_of_means(small).half_width();
    EXPECT_NEAR(ratio, 1.0 / std::sqrt(2.0), 0.25);
}

TEST(MedianOfMeans, FewerSamplesThanBlocks) {
    const std::vector<double> v{1.0, 2.0, 3.0};
    EXPECT_DOUBLE_EQ(median_of_means(v).value, 2.0);
}

TEST(LpNorm, MapsBandThroughRoot) {
    const std::vector<double> powers(100, 8.0);
    const auto e = lp_norm_from_powers(powers, 3.0);
    EXPECT_NEAR(e.value, 2.0, 1e-15);
    EXPECT_NEAR(e.lo, 2.0, 1e-15);
}

TEST(KolmogorovSmirnov, IdenticalAndShifted) {
    std::vector<double> a, b;
    for (int i = 0; i < 100; ++i) {
        a.push_back(i);
        b.push_back(i + 50);
    }
    EXPECT_DOUBLE_EQ(ks_statistic(a, a), 0.0);
    EXPECT_DOUBLE_EQ(ks_statistic(a, b), 0.5);
    EXPECT_NEAR(ks_critical(1000, 1000, 0.01), 1.62762 * std::sqrt(2.0 / 1000.0), 1e-4);
}

TEST(LeastSquares, ExactLine) {
    const std::vector<double> x{0, 1, 2, 3}, y{1, 3, 5, 7};
    const auto fit = least_squares(x, y);
    EXPECT_NEAR(fit.slope, 2.0, 1e-14);
    EXPECT_NEAR(fit.intercept, 1.0, 1e-14);
    EXPECT_NEAR(fit.rms_residual, 0.0, 1e-14);
    const std::vector<double> same{1, 1};
    EXPECT_THROW(least_squares(same, same), FitError);
}
