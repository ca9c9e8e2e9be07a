#pragma once

// Robust estimators for heavy-tailed Monte Carlo output.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "levysync/errors.hpp"

namespace levysync {

/// Point estimate with a confidence band [lo, hi].
struct Estimate {
    double value = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    std::size_t n_effective = 0;

    double half_width() const { return 0.5 * (hi - lo); }
};

inline constexpr std::size_t kDefaultBlocks = 16;

inline double median(std::vector<double> v) {
    if (v.empty()) throw std::invalid_argument("median of empty sample");
    const std::size_t n = v.size();
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(n / 2);
    std::nth_element(v.begin(), mid, v.end());
    if (n % 2 == 1) return *mid;
    const double upper = *mid;
    const double lower = *std::max_element(v.begin(), mid);
    return 0.5 * (lower + upper);
}

/// Median-of-means over contiguous blocks (block i covers [iN/k, (i+1)N/k)).
/// The band is value +/- 2 * spread, where spread is the normalized median
/// absolute deviation of the block means divided by sqrt(k).
inline Estimate median_of_means(std::span<const double> values, std::size_t blocks = kDefaultBlocks) {
    if (values.empty()) throw std::invalid_argument("median_of_means: empty sample");
    const std::size_t n = values.size();
    const std::size_t k = std::max<std::size_t>(1, std::min(blocks, n));
    std::vector<double> means(k);
    for (std::size_t b = 0; b < k; ++b) {
        const std::size_t begin = b * n / k;
        const std::size_t end = (b + 1) * n / k;
        double sum = 0.0;
        for (std::size_t i = begin; i < end; ++i) sum += values[i];
        means[b] = sum / static_cast<double>(end - begin);
    }
    const double center = median(means);
    std::vector<double> dev(k);
    for (std::size_t b = 0; b < k; ++b) dev[b] = std::abs(means[b] - center);
    const double spread = k > 1 ? 1.4826 * median(dev) / std::sqrt(static_cast<double>(k)) : 0.0;
    return {center, center - 2.0 * spread, center + 2.0 * spread, n};
}

/// (E X)^(1/p) from samples of X = |D|^p, with the band mapped through the
/// same monotone transform (lower end clamped at zero).
inline Estimate lp_norm_from_powers(std::span<const double> abs_powers, double p) {
    const Estimate m = median_of_means(abs_powers);
    auto root = [p](double v) { return v > 0.0 ? std::pow(v, 1.0 / p) : 0.0; };
    return {root(m.value), root(m.lo), root(m.hi), m.n_effective};
}

/// Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|.
inline double ks_statistic(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("ks_statistic: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return d;
}

/// Asymptotic critical value of the two-sample KS statistic at the given
/// significance level: sqrt(-ln(level/2)/2) * sqrt((n+m)/(n m)).
inline double ks_critical(std::size_t n, std::size_t m, double level) {
    if (!(level > 0.0 && level < 1.0)) throw DomainError("ks_critical: level must be in (0,1)");
    const double c = std::sqrt(-0.5 * std::log(0.5 * level));
    const double dn = static_cast<double>(n), dm = static_cast<double>(m);
    return c * std::sqrt((dn + dm) / (dn * dm));
}

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double rms_residual = 0.0;
};

inline LinearFit least_squares(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw FitError("least_squares: need at least two matched points");
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0) throw FitError("least_squares: degenerate abscissae");
    LinearFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - (fit.intercept + fit.slope * x[i]);
        ss += r * r;
    }
    fit.rms_residual = std::sqrt(ss / n);
    return fit;
}

}  // namespace levysync
