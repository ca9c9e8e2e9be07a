#pragma once

// Symmetric alpha-stable laws: normalization constants, characteristic
// exponent, and Chambers-Mallows-Stuck sampling of variates and increments.

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "levysync/errors.hpp"
#include "levysync/rng.hpp"

namespace levysync {

enum class Convention {
    UnitExponent,  // rho(u) = -scale^alpha |u|^alpha
    C1Scaled,       // rho(u) = -C1(dim, alpha) scale^alpha |u|^alpha
};

namespace detail {

// C1(n, alpha) without the (0,2) domain guard; alpha = 2 is the Gaussian limit.
inline double c1_formula(int n, double alpha) {
    const double a = 0.5 * (1.0 + alpha);
    const double b = 0.5 * n;
    const double c = 0.5 * (n + alpha);
    if (n <= 100) return std::tgamma(a) * std::tgamma(b) / (std::sqrt(std::numbers::pi) * std::tgamma(c));
    return std::exp(std::lgamma(a) + std::lgamma(b) - std::lgamma(c) - 0.5 * std::log(std::numbers::pi));
}

inline void check_constant_domain(int n, double alpha, const char* what) {
    if (n < 1) throw DomainError(std::string(what) + ": dimension must be >= 1");
    if (!(alpha > 0.0 && alpha < 2.0)) throw DomainError(std::string(what) + ": alpha must lie in (0, 2)");
}

}  // namespace detail

/// C1(n, alpha) = pi^{-1/2} Gamma((1+alpha)/2) Gamma(n/2) / Gamma((n+alpha)/2).
inline double c1_constant(int n, double alpha) {
    detail::check_constant_domain(n, alpha, "c1_constant");
    return detail::c1_formula(n, alpha);
}

/// C(n, alpha) = alpha Gamma((n+alpha)/2) / (2^{1-alpha} pi^{n/2} Gamma(1 - alpha/2)),
/// the density constant of the Levy measure C / |u|^{n+alpha}.
inline double levy_measure_constant(int n, double alpha) {
    detail::check_constant_domain(n, alpha, "levy_measure_constant");
    const double lg = std::lgamma(0.5 * (n + alpha)) - std::lgamma(1.0 - 0.5 * alpha) -
                      (1.0 - alpha) * std::log(2.0) - 0.5 * n * std::log(std::numbers::pi);
    return alpha * std::exp(lg);
}

struct LevyConstants {
    double c1;
    double c_levy;
};

inline LevyConstants levy_constants(int n, double alpha) {
    return {c1_constant(n, alpha), levy_measure_constant(n, alpha)};
}

/// Parameters of a symmetric alpha-stable driver with independent coordinates.
struct StableLaw {
    double alpha = 1.5;
    std::size_t dim = 1;
    double scale = 1.0;
    Convention convention = Convention::UnitExponent;

    static StableLaw make(double alpha, std::size_t dim = 1, double scale = 1.0,
                          Convention convention = Convention::UnitExponent) {
        StableLaw law{alpha, dim, scale, convention};
        law.validate();
        return law;
    }

    void validate() const {
        if (!(alpha > 1.0 && alpha <= 2.0)) throw DomainError("StableLaw: alpha must lie in (1, 2]");
        if (dim < 1) throw DomainError("StableLaw: dim must be >= 1");
        if (!(scale >= 0.0) || !std::isfinite(scale)) throw DomainError("StableLaw: scale must be finite and >= 0");
    }

    /// Scale under the unit-exponent convention: scale for UnitExponent,
    /// scale * C1^{1/alpha} for C1Scaled.
    double unit_scale() const {
        if (convention == Convention::UnitExponent) return scale;
        return scale * std::pow(detail::c1_formula(static_cast<int>(dim), alpha), 1.0 / alpha);
    }

    friend bool operator==(const StableLaw&, const StableLaw&) = default;
};

/// Characteristic exponent rho(u) at unit time; exp(rho(u)) is the
/// characteristic function of one standard draw.
inline double char_exponent(const StableLaw& law, std::span<const double> u) {
    if (u.size() != law.dim) throw DomainError("char_exponent: frequency dimension mismatch");
    double norm2 = 0.0;
    for (double c : u) norm2 += c * c;
    if (!std::isfinite(norm2)) throw DomainError("char_exponent: frequency must be finite");
    if (norm2 == 0.0) return 0.0;
    double coef = std::pow(law.scale, law.alpha);
    if (law.convention == Convention::C1Scaled) coef *= detail::c1_formula(static_cast<int>(law.dim), law.alpha);
    return -coef * std::pow(norm2, 0.5 * law.alpha);
}

inline double char_exponent(const StableLaw& law, double u) { return char_exponent(law, std::span<const double>(&u, 1)); }

/// One scalar draw with characteristic function exp(-|u|^alpha), by the
/// Chambers-Mallows-Stuck transform. No truncation of any kind.
inline double standard_stable(double alpha, RandomStream& rng) {
    const double v = std::numbers::pi * (rng.uniform_open() - 0.5);
    const double log_w = std::log(rng.exponential());
    const double inv_alpha = 1.0 / alpha;
    const double tail = (1.0 - alpha) * inv_alpha;
    return std::sin(alpha * v) *
           std::exp(-inv_alpha * std::log(std::cos(v)) + tail * (std::log(std::cos((1.0 - alpha) * v)) - log_w));
}

/// One variate of the law at unit time; coordinates independent.
inline void sample_standard(const StableLaw& law, RandomStream& rng, std::span<double> out) {
    if (out.size() != law.dim) throw DomainError("sample_standard: output dimension mismatch");
    const double s = law.unit_scale();
    for (double& x : out) x = s * standard_stable(law.alpha, rng);
}

inline std::vector<double> sample_standard(const StableLaw& law, RandomStream& rng) {
    std::vector<double> out(law.dim);
    sample_standard(law, rng, out);
    return out;
}

/// Self-similarity factor dt^{1/alpha} mapping a unit-time draw to an
/// increment over dt.
inline double increment_factor(double alpha, double dt) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw DomainError("increment: dt must be positive and finite");
    return std::pow(dt, 1.0 / alpha);
}

inline void increment(const StableLaw& law, double dt, RandomStream& rng, std::span<double> out) {
    const double factor = increment_factor(law.alpha, dt);
    sample_standard(law, rng, out);
    for (double& x : out) x *= factor;
}

inline std::vector<double> increment(const StableLaw& law, double dt, RandomStream& rng) {
    std::vector<double> out(law.dim);
    increment(law, dt, rng, out);
    return out;
}

/// (1/N) sum_k exp(i <u, x_k>) over vector samples.
inline std::complex<double> empirical_char_function(const std::vector<std::vector<double>>& samples,
                                                    std::span<const double> u) {
    if (samples.empty()) throw std::invalid_argument("empirical_char_function: no samples");
    double re = 0.0, im = 0.0;
    for (const auto& x : samples) {
        if (x.size() != u.size()) throw DomainError("empirical_char_function: dimension mismatch");
        double phase = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i) phase += u[i] * x[i];
        re += std::cos(phase);
        im += std::sin(phase);
    }
    const double n = static_cast<double>(samples.size());
    return {re / n, im / n};
}

/// Scalar-sample overload: samples are one-dimensional values.
inline std::complex<double> empirical_char_function(std::span<const double> samples, double u) {
    if (samples.empty()) throw std::invalid_argument("empirical_char_function: no samples");
    double re = 0.0, im = 0.0;
    for (double x : samples) {
        re += std::cos(u * x);
        im += std::sin(u * x);
    }
    const double n = static_cast<double>(samples.size());
    return {re / n, im / n};
}

}  // namespace levysync
