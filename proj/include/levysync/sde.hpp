#pragma once

// Fixed time grids, Levy noise paths and explicit integration of additive
// alpha-stable SDEs dX = b(X, t) dt + sigma dL.

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "levysync/errors.hpp"
#include "levysync/rng.hpp"
#include "levysync/stable_noise.hpp"
#include "levysync/stats.hpp"

namespace levysync {

using State = std::vector<double>;

struct PathGrid {
    double t0 = 0.0;
    double t_end = 1.0;
    std::size_t n_steps = 1;

    static PathGrid make(double t0, double t_end, std::size_t n_steps) {
        PathGrid g{t0, t_end, n_steps};
        g.validate();
        return g;
    }

    /// Grid over [t0, t_end] whose step does not exceed max_step.
    static PathGrid with_max_step(double t0, double t_end, double max_step) {
        if (!(max_step > 0.0)) throw DomainError("PathGrid: step must be positive");
        const auto n = static_cast<std::size_t>(std::ceil((t_end - t0) / max_step - 1e-9));
        return make(t0, t_end, std::max<std::size_t>(1, n));
    }

    void validate() const {
        if (!(t_end > t0) || !std::isfinite(t_end - t0)) throw DomainError("PathGrid: need t_end > t0");
        if (n_steps < 1) throw DomainError("PathGrid: need n_steps >= 1");
    }

    double step() const { return (t_end - t0) / static_cast<double>(n_steps); }
    double time(std::size_t k) const { return t0 + static_cast<double>(k) * step(); }

    friend bool operator==(const PathGrid&, const PathGrid&) = default;
};

/// Sequential generator of alpha-stable increments over steps of length h.
/// generate_noise_path materializes exactly this sequence.
class NoiseStream {
public:
    NoiseStream(const StableLaw& law, double h, const StreamKey& key)
        : law_(law), rng_(key), factor_(law.unit_scale() * increment_factor(law.alpha, h)) {}

    void next(std::span<double> out) {
        if (factor_ == 0.0) {
            std::fill(out.begin(), out.end(), 0.0);
            return;
        }
        for (double& x : out) x = factor_ * standard_stable(law_.alpha, rng_);
    }

    double next_scalar() { return factor_ == 0.0 ? 0.0 : factor_ * standard_stable(law_.alpha, rng_); }

private:
    StableLaw law_;
    RandomStream rng_;
    double factor_;
};

struct NoisePath {
    PathGrid grid;
    StableLaw law;
    StreamKey key;
    std::vector<double> increments;  // n_steps * dim, row-major

    std::span<const double> at(std::size_t k) const { return {increments.data() + k * law.dim, law.dim}; }
    std::size_t size() const { return increments.size() / law.dim; }
};

inline NoisePath generate_noise_path(const StableLaw& law, const PathGrid& grid, const StreamKey& key) {
    law.validate();
    grid.validate();
    NoisePath path{grid, law, key, std::vector<double>(grid.n_steps * law.dim)};
    NoiseStream stream(law, grid.step(), key);
    for (std::size_t k = 0; k < grid.n_steps; ++k)
        stream.next({path.increments.data() + k * law.dim, law.dim});
    return path;
}

struct SamplePath {
    PathGrid grid;
    std::size_t dim = 1;
    std::vector<double> values;  // (n_steps + 1) * dim, row-major
    bool diverged = false;

    std::span<const double> at(std::size_t k) const { return {values.data() + k * dim, dim}; }
    std::span<double> at(std::size_t k) { return {values.data() + k * dim, dim}; }
    std::size_t size() const { return values.size() / dim; }
};

/// Pure drift b(x, t), with an optional Lipschitz certificate and an optional
/// linear decay rate lambda >= 0 such that b(x, t) + lambda x is the
/// remainder treated explicitly by exponential_euler.
class DriftField {
public:
    using Eval = std::function<void(std::span<const double> x, double t, std::span<double> out)>;

    DriftField() = default;
    DriftField(std::size_t dim, Eval eval, std::optional<double> lipschitz = std::nullopt, double linear_rate = 0.0,
               std::string name = {})
        : dim_(dim), eval_(std::move(eval)), lipschitz_(lipschitz), linear_rate_(linear_rate), name_(std::move(name)) {
        if (dim_ < 1) throw DomainError("DriftField: dim must be >= 1");
        if (!eval_) throw DomainError("DriftField: empty evaluation handle");
        if (!(linear_rate_ >= 0.0)) throw DomainError("DriftField: linear rate must be >= 0");
    }

    /// Drift applying the same scalar map to every coordinate.
    static DriftField componentwise(std::size_t dim, std::function<double(double)> fn,
                                    std::optional<double> lipschitz = std::nullopt, double linear_rate = 0.0,
                                    std::string name = {}) {
        return DriftField(
            dim,
            [fn = std::move(fn)](std::span<const double> x, double, std::span<double> out) {
                for (std::size_t i = 0; i < x.size(); ++i) out[i] = fn(x[i]);
            },
            lipschitz, linear_rate, std::move(name));
    }

    void operator()(std::span<const double> x, double t, std::span<double> out) const { eval_(x, t, out); }

    State operator()(std::span<const double> x, double t = 0.0) const {
        State out(dim_);
        eval_(x, t, out);
        return out;
    }

    std::size_t dim() const { return dim_; }
    const std::optional<double>& lipschitz() const { return lipschitz_; }
    double linear_rate() const { return linear_rate_; }
    const std::string& name() const { return name_; }

private:
    std::size_t dim_ = 1;
    Eval eval_;
    std::optional<double> lipschitz_;
    double linear_rate_ = 0.0;
    std::string name_;
};

namespace detail {

inline bool all_finite(std::span<const double> x) {
    for (double v : x)
        if (!std::isfinite(v)) return false;
    return true;
}

inline void check_integration_inputs(const DriftField& drift, std::span<const double> sigma,
                                     std::span<const double> x0, const PathGrid& grid, const NoisePath& noise) {
    if (!(noise.grid == grid)) throw DomainError("integrator: noise path grid differs from integration grid");
    const std::size_t d = drift.dim();
    if (x0.size() != d || sigma.size() != d || noise.law.dim != d)
        throw DomainError("integrator: dimension mismatch between drift, sigma, x0 and noise");
}

// Marks the path diverged and blanks every value after step k.
inline void mark_diverged(SamplePath& path, std::size_t k) {
    path.diverged = true;
    std::fill(path.values.begin() + static_cast<std::ptrdiff_t>((k + 1) * path.dim), path.values.end(),
              std::numeric_limits<double>::quiet_NaN());
}

}  // namespace detail

/// Explicit Euler-Maruyama:
///   x[k+1] = x[k] + b(x[k], t_k) h + sigma * dL_k.
/// A non-finite state flags the path as diverged instead of throwing.
inline SamplePath euler_maruyama(const DriftField& drift, std::span<const double> sigma, std::span<const double> x0,
                                 const PathGrid& grid, const NoisePath& noise) {
    detail::check_integration_inputs(drift, sigma, x0, grid, noise);
    const std::size_t d = drift.dim();
    const double h = grid.step();
    SamplePath path{grid, d, std::vector<double>((grid.n_steps + 1) * d)};
    std::copy(x0.begin(), x0.end(), path.values.begin());
    State b(d);
    for (std::size_t k = 0; k < grid.n_steps; ++k) {
        auto cur = path.at(k);
        auto nxt = path.at(k + 1);
        drift(cur, grid.time(k), b);
        const auto dl = noise.at(k);
        for (std::size_t i = 0; i < d; ++i) nxt[i] = cur[i] + b[i] * h + sigma[i] * dl[i];
        if (!detail::all_finite(nxt)) {
            detail::mark_diverged(path, k);
            break;
        }
    }
    return path;
}

/// Coefficients of one exponential-Euler step for the linear part -lambda x.
struct ExponentialStep {
    double decay = 1.0;         // exp(-lambda h)
    double remainder = 0.0;     // (1 - exp(-lambda h)) / lambda, or h when lambda = 0
    double noise_factor = 1.0;  // ((1 - exp(-alpha lambda h)) / (alpha lambda h))^{1/alpha}

    static ExponentialStep make(double lambda, double h, double alpha) {
        if (lambda == 0.0) return {1.0, h, 1.0};
        const double lh = lambda * h;
        return {std::exp(-lh), -std::expm1(-lh) / lambda, std::pow(-std::expm1(-alpha * lh) / (alpha * lh), 1.0 / alpha)};
    }
};

/// One-step form of the exponential Euler scheme for streaming use: long
/// chains advance in place without materializing a path.
class ExponentialStepper {
public:
    ExponentialStepper(const DriftField& drift, std::span<const double> sigma, double h, double alpha)
        : drift_(&drift), sigma_(sigma.begin(), sigma.end()), lambda_(drift.linear_rate()),
          step_(ExponentialStep::make(lambda_, h, alpha)), b_(drift.dim()) {
        if (!(h > 0.0)) throw DomainError("ExponentialStepper: step must be positive");
        if (sigma_.size() != drift.dim()) throw DomainError("ExponentialStepper: sigma dimension mismatch");
    }

    /// Writes the successor of cur into nxt (which may alias cur) and
    /// reports whether it is finite. dl is the raw increment over the step.
    bool advance(std::span<const double> cur, double t, std::span<const double> dl, std::span<double> nxt) {
        (*drift_)(cur, t, b_);
        for (std::size_t i = 0; i < b_.size(); ++i)
            nxt[i] = step_.decay * cur[i] + step_.remainder * (b_[i] + lambda_ * cur[i]) +
                     sigma_[i] * step_.noise_factor * dl[i];
        return detail::all_finite(nxt);
    }

    const ExponentialStep& coefficients() const { return step_; }

private:
    const DriftField* drift_;
    State sigma_;
    double lambda_;
    ExponentialStep step_;
    State b_;
};

/// Exponential Euler for b(x) = -lambda x + r(x), lambda = drift.linear_rate():
///   x[k+1] = e^{-lambda h} x[k] + phi(h) r(x[k]) + sigma * kappa(h) * dL_k,
/// where kappa rescales the increment to the law of the stochastic
/// convolution over one step. Exact in law for linear drifts; reduces to
/// euler_maruyama when lambda = 0.
inline SamplePath exponential_euler(const DriftField& drift, std::span<const double> sigma,
                                    std::span<const double> x0, const PathGrid& grid, const NoisePath& noise) {
    detail::check_integration_inputs(drift, sigma, x0, grid, noise);
    if (drift.linear_rate() == 0.0) return euler_maruyama(drift, sigma, x0, grid, noise);
    ExponentialStepper stepper(drift, sigma, grid.step(), noise.law.alpha);
    SamplePath path{grid, drift.dim(), std::vector<double>((grid.n_steps + 1) * drift.dim())};
    std::copy(x0.begin(), x0.end(), path.values.begin());
    for (std::size_t k = 0; k < grid.n_steps; ++k) {
        if (!stepper.advance(path.at(k), grid.time(k), noise.at(k), path.at(k + 1))) {
            detail::mark_diverged(path, k);
            break;
        }
    }
    return path;
}

/// Exact-in-law stepping of dY = -lambda Y dt + sigma dL:
///   Y[k+1] = e^{-lambda h} Y[k] + sigma xi_k,
/// xi_k alpha-stable with unit-convention scale ((1 - e^{-alpha lambda h})/(alpha lambda))^{1/alpha}.
inline SamplePath ou_exact_path(double lambda, double sigma, const StableLaw& law, std::span<const double> x0,
                                const PathGrid& grid, const StreamKey& key) {
    if (!(lambda > 0.0)) throw DomainError("ou_exact_path: lambda must be positive");
    const std::size_t d = law.dim;
    const auto linear = DriftField::componentwise(
        d, [lambda](double y) { return -lambda * y; }, lambda, lambda, "ou");
    const State sig(d, sigma);
    return exponential_euler(linear, sig, x0, grid, generate_noise_path(law, grid, key));
}

struct LagNorm {
    double lag;
    double norm;
};

struct HolderEstimate {
    std::vector<LagNorm> norms;
    double slope = std::numeric_limits<double>::quiet_NaN();  // fitted log-log exponent
};

/// For each lag h: max over grid times t of the median-of-means estimate of
/// (E|X_{t+h} - X_t|^p)^{1/p}, plus the log-log slope over the lags.
inline HolderEstimate holder_increment_estimate(std::span<const SamplePath> paths, double p, double alpha,
                                                std::span<const double> lags) {
    require_moment_order(p, alpha);
    if (paths.empty()) throw std::invalid_argument("holder_increment_estimate: no paths");
    const PathGrid grid = paths.front().grid;
    const std::size_t d = paths.front().dim;
    for (const auto& path : paths)
        if (!(path.grid == grid) || path.dim != d) throw DomainError("holder_increment_estimate: paths on different grids");
    const double h = grid.step();

    std::vector<const SamplePath*> kept;
    for (const auto& path : paths)
        if (!path.diverged) kept.push_back(&path);
    if (kept.empty()) throw DivergenceError("holder_increment_estimate: every path diverged");

    HolderEstimate out;
    std::vector<double> powers(kept.size());
    for (double lag : lags) {
        const double ratio = lag / h;
        const auto steps = static_cast<std::size_t>(std::llround(ratio));
        if (steps < 1 || std::abs(ratio - static_cast<double>(steps)) > 1e-9 * ratio || steps > grid.n_steps)
            throw DomainError("holder_increment_estimate: lag must be a positive multiple of the grid step");
        double best = 0.0;
        for (std::size_t t = 0; t + steps <= grid.n_steps; ++t) {
            for (std::size_t i = 0; i < kept.size(); ++i) {
                const auto a = kept[i]->at(t + steps);
                const auto b = kept[i]->at(t);
                double n2 = 0.0;
                for (std::size_t c = 0; c < d; ++c) n2 += (a[c] - b[c]) * (a[c] - b[c]);
                powers[i] = std::pow(n2, 0.5 * p);
            }
            best = std::max(best, lp_norm_from_powers(powers, p).value);
        }
        out.norms.push_back({lag, best});
    }

    std::vector<double> lx, ly;
    for (const auto& ln : out.norms) {
        if (ln.norm > 0.0) {
            lx.push_back(std::log(ln.lag));
            ly.push_back(std::log(ln.norm));
        }
    }
    if (lx.size() >= 2 && lx.size() == out.norms.size()) out.slope = least_squares(lx, ly).slope;
    return out;
}

/// Debug dump: columns t, x1..x_dim.
inline void write_csv(std::ostream& os, const SamplePath& path) {
    const auto old_precision = os.precision(17);
    os << "t";
    for (std::size_t i = 0; i < path.dim; ++i) os << ",x" << (i + 1);
    os << '\n';
    for (std::size_t k = 0; k < path.size(); ++k) {
        os << path.grid.time(k);
        for (double v : path.at(k)) os << ',' << v;
        os << '\n';
    }
    os.precision(old_precision);
}

}  // namespace levysync
