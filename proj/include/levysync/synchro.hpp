#pragma once

// Coupled systems driven by one shared alpha-stable noise, the change of
// variables to slow-fast form, the drifts of every derived system, and a
// probe-based check of the structural hypotheses on (f, g).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "levysync/errors.hpp"
#include "levysync/rng.hpp"
#include "levysync/sde.hpp"
#include "levysync/stable_noise.hpp"

namespace levysync {

/// dX = (f(X) + nu (Y - X)) dt + sigma1 dL,  dY = (g(Y) + nu (X - Y)) dt + sigma2 dL,
/// with the same driver L in both lines.
struct CoupledSpec {
    DriftField f;
    DriftField g;
    double sigma1 = 1.0;
    double sigma2 = 1.0;
    double nu = 1.0;
    StableLaw law;
    std::string id;

    static CoupledSpec make(DriftField f, DriftField g, double sigma1, double sigma2, double nu, StableLaw law,
                            std::string id = {}) {
        CoupledSpec spec{std::move(f), std::move(g), sigma1, sigma2, nu, law, std::move(id)};
        spec.validate();
        return spec;
    }

    void validate() const {
        law.validate();
        if (sigma1 == 0.0 || sigma2 == 0.0 || !std::isfinite(sigma1) || !std::isfinite(sigma2))
            throw DomainError("CoupledSpec: noise intensities must be finite and non-zero");
        if (!(nu > 0.0) || !std::isfinite(nu)) throw DomainError("CoupledSpec: coupling strength nu must be > 0");
        if (f.dim() != law.dim || g.dim() != law.dim) throw DomainError("CoupledSpec: drift and noise dimensions differ");
    }

    double epsilon() const { return 1.0 / nu; }
    std::size_t dim() const { return law.dim; }

    /// Same spec with a different coupling strength.
    CoupledSpec with_nu(double new_nu) const {
        CoupledSpec out = *this;
        out.nu = new_nu;
        out.validate();
        return out;
    }
};

/// Slow component X = (x + y)/2 and fast component Y = (x - y)/(2 eps^{1/alpha}).
struct SlowFastState {
    State x_slow;
    State y_fast;
    double epsilon = 1.0;
};

/// eps^{1/alpha}: the amplitude linking the fast component to x - y.
inline double fast_amplitude(double epsilon, double alpha) { return std::pow(epsilon, 1.0 / alpha); }

inline SlowFastState to_slowfast(std::span<const double> x, std::span<const double> y, double nu, double alpha) {
    if (!(nu > 0.0)) throw DomainError("to_slowfast: nu must be > 0");
    if (x.size() != y.size()) throw DomainError("to_slowfast: dimension mismatch");
    const double eps = 1.0 / nu;
    const double s = fast_amplitude(eps, alpha);
    SlowFastState out{State(x.size()), State(x.size()), eps};
    for (std::size_t i = 0; i < x.size(); ++i) {
        out.x_slow[i] = 0.5 * (x[i] + y[i]);
        out.y_fast[i] = (x[i] - y[i]) / (2.0 * s);
    }
    return out;
}

/// Inverse map: x = X + eps^{1/alpha} Y, y = X - eps^{1/alpha} Y.
inline std::pair<State, State> from_slowfast(const SlowFastState& s, double alpha) {
    if (s.x_slow.size() != s.y_fast.size()) throw DomainError("from_slowfast: dimension mismatch");
    const double a = fast_amplitude(s.epsilon, alpha);
    std::pair<State, State> out{State(s.x_slow.size()), State(s.x_slow.size())};
    for (std::size_t i = 0; i < s.x_slow.size(); ++i) {
        out.first[i] = s.x_slow[i] + a * s.y_fast[i];
        out.second[i] = s.x_slow[i] - a * s.y_fast[i];
    }
    return out;
}

inline std::pair<State, State> coupled_drift(const CoupledSpec& spec, std::span<const double> x,
                                             std::span<const double> y) {
    const std::size_t d = spec.dim();
    if (x.size() != d || y.size() != d) throw DomainError("coupled_drift: dimension mismatch");
    std::pair<State, State> out{spec.f(x), spec.g(y)};
    for (std::size_t i = 0; i < d; ++i) {
        out.first[i] += spec.nu * (y[i] - x[i]);
        out.second[i] += spec.nu * (x[i] - y[i]);
    }
    return out;
}

/// Noise intensities of the slow and fast channels for a given eps.
struct ChannelIntensities {
    double slow;
    double fast;
};

inline ChannelIntensities slowfast_noise(const CoupledSpec& spec, double epsilon) {
    return {0.5 * (spec.sigma1 + spec.sigma2),
            (spec.sigma1 - spec.sigma2) / (2.0 * fast_amplitude(epsilon, spec.law.alpha))};
}

namespace detail {

// F = f(x + eps^{1/alpha} y), G = g(x - eps^{1/alpha} y), written into the two buffers.
inline void evaluate_fg(const CoupledSpec& spec, std::span<const double> x, std::span<const double> y, double amp,
                        std::span<double> shifted, std::span<double> big_f, std::span<double> big_g) {
    for (std::size_t i = 0; i < x.size(); ++i) shifted[i] = x[i] + amp * y[i];
    spec.f(shifted, 0.0, big_f);
    for (std::size_t i = 0; i < x.size(); ++i) shifted[i] = x[i] - amp * y[i];
    spec.g(shifted, 0.0, big_g);
}

}  // namespace detail

/// Drift pair of the slow-fast system:
///   dX = 1/2 [F + G] dt,
///   dY = (1/eps) [1/2 eps^{1-1/alpha} (F - G)] dt - (2/eps) Y dt.
inline std::pair<State, State> slowfast_drift(const CoupledSpec& spec, const SlowFastState& s) {
    if (!(s.epsilon > 0.0)) throw DomainError("slowfast_drift: eps must be > 0");
    const std::size_t d = spec.dim();
    if (s.x_slow.size() != d || s.y_fast.size() != d) throw DomainError("slowfast_drift: dimension mismatch");
    const double eps = s.epsilon;
    const double alpha = spec.law.alpha;
    const double amp = fast_amplitude(eps, alpha);
    State shifted(d), big_f(d), big_g(d);
    detail::evaluate_fg(spec, s.x_slow, s.y_fast, amp, shifted, big_f, big_g);
    const double coupling = 0.5 * std::pow(eps, 1.0 - 1.0 / alpha) / eps;
    std::pair<State, State> out{State(d), State(d)};
    for (std::size_t i = 0; i < d; ++i) {
        out.first[i] = 0.5 * (big_f[i] + big_g[i]);
        out.second[i] = coupling * (big_f[i] - big_g[i]) - (2.0 / eps) * s.y_fast[i];
    }
    return out;
}

/// Fast drift with the slow state frozen at x. Its noise intensity is
/// slowfast_noise(spec, eps).fast.
inline State frozen_fast_drift(const CoupledSpec& spec, std::span<const double> x, std::span<const double> y,
                               double epsilon) {
    if (!(epsilon > 0.0)) throw DomainError("frozen_fast_drift: eps must be > 0");
    const std::size_t d = spec.dim();
    if (x.size() != d || y.size() != d) throw DomainError("frozen_fast_drift: dimension mismatch");
    const double alpha = spec.law.alpha;
    State shifted(d), big_f(d), big_g(d), out(d);
    detail::evaluate_fg(spec, x, y, fast_amplitude(epsilon, alpha), shifted, big_f, big_g);
    const double coupling = 0.5 * std::pow(epsilon, 1.0 - 1.0 / alpha) / epsilon;
    for (std::size_t i = 0; i < d; ++i) out[i] = coupling * (big_f[i] - big_g[i]) - (2.0 / epsilon) * y[i];
    return out;
}

/// Frozen fast drift as a DriftField in y. Its linear rate is
/// 2/eps + (lambda_f + lambda_g)/2, the decay carried by the linear parts.
inline DriftField frozen_fast_field(const CoupledSpec& spec, State x, double epsilon) {
    if (!(epsilon > 0.0)) throw DomainError("frozen_fast_field: eps must be > 0");
    const std::size_t d = spec.dim();
    const double amp = fast_amplitude(epsilon, spec.law.alpha);
    const double coupling = 0.5 * std::pow(epsilon, 1.0 - 1.0 / spec.law.alpha) / epsilon;
    const double rate = 2.0 / epsilon + 0.5 * (spec.f.linear_rate() + spec.g.linear_rate());
    std::optional<double> lip;
    if (spec.f.lipschitz() && spec.g.lipschitz())
        lip = 2.0 / epsilon + 0.5 * (*spec.f.lipschitz() + *spec.g.lipschitz());
    return DriftField(
        d,
        [spec, x = std::move(x), amp, coupling, epsilon](std::span<const double> y, double, std::span<double> out) {
            const std::size_t n = y.size();
            thread_local State buf;
            buf.resize(3 * n);
            std::span<double> shifted(buf.data(), n), big_f(buf.data() + n, n), big_g(buf.data() + 2 * n, n);
            detail::evaluate_fg(spec, x, y, amp, shifted, big_f, big_g);
            for (std::size_t i = 0; i < n; ++i) out[i] = coupling * (big_f[i] - big_g[i]) - (2.0 / epsilon) * y[i];
        },
        lip, rate, "frozen_fast");
}

/// Slow drift with the fast state frozen at y: 1/2 [F(X, y) + G(X, y)].
inline DriftField frozen_slow_field(const CoupledSpec& spec, State y, double epsilon) {
    const std::size_t d = spec.dim();
    const double amp = fast_amplitude(epsilon, spec.law.alpha);
    const double rate = 0.5 * (spec.f.linear_rate() + spec.g.linear_rate());
    std::optional<double> lip;
    if (spec.f.lipschitz() && spec.g.lipschitz()) lip = 0.5 * (*spec.f.lipschitz() + *spec.g.lipschitz());
    return DriftField(
        d,
        [spec, y = std::move(y), amp](std::span<const double> x, double, std::span<double> out) {
            const std::size_t n = x.size();
            thread_local State buf;
            buf.resize(3 * n);
            std::span<double> shifted(buf.data(), n), big_f(buf.data() + n, n), big_g(buf.data() + 2 * n, n);
            detail::evaluate_fg(spec, x, y, amp, shifted, big_f, big_g);
            for (std::size_t i = 0; i < n; ++i) out[i] = 0.5 * (big_f[i] + big_g[i]);
        },
        lip, rate, "frozen_slow");
}

/// Index of the knot [s/delta] for time s.
inline std::size_t knot_index(double s, double delta) {
    return static_cast<std::size_t>(std::floor(s / delta + 1e-12));
}

/// Number of grid steps per knot interval; throws unless the grid step
/// divides delta.
inline std::size_t knot_stride(double delta, double grid_step) {
    if (!(delta > 0.0) || !(grid_step > 0.0)) throw DomainError("auxiliary: delta and grid step must be positive");
    const double ratio = delta / grid_step;
    const auto m = static_cast<std::size_t>(std::llround(ratio));
    if (m < 1 || std::abs(ratio - static_cast<double>(m)) > 1e-9 * ratio)
        throw DomainError("auxiliary: grid step does not divide delta");
    return m;
}

/// Drift pair of the auxiliary processes: the slow-fast drift with the slow
/// argument of F, G held at the knot value X^eps_{[s/delta] delta}.
inline std::pair<State, State> auxiliary_drift(const CoupledSpec& spec, std::span<const double> knot_value,
                                               double s, std::span<const double> y_tilde, double epsilon,
                                               double delta, double grid_step) {
    (void)knot_stride(delta, grid_step);
    if (!(s >= 0.0)) throw DomainError("auxiliary_drift: time must be >= 0");
    const std::size_t d = spec.dim();
    if (knot_value.size() != d || y_tilde.size() != d) throw DomainError("auxiliary_drift: dimension mismatch");
    const double alpha = spec.law.alpha;
    State shifted(d), big_f(d), big_g(d);
    detail::evaluate_fg(spec, knot_value, y_tilde, fast_amplitude(epsilon, alpha), shifted, big_f, big_g);
    const double coupling = 0.5 * std::pow(epsilon, 1.0 - 1.0 / alpha) / epsilon;
    std::pair<State, State> out{State(d), State(d)};
    for (std::size_t i = 0; i < d; ++i) {
        out.first[i] = 0.5 * (big_f[i] + big_g[i]);
        out.second[i] = coupling * (big_f[i] - big_g[i]) - (2.0 / epsilon) * y_tilde[i];
    }
    return out;
}

/// 1/2 (f(x) + g(x)), the eps -> 0 limit of the averaged coefficients.
inline State averaged_drift_exact(const CoupledSpec& spec, std::span<const double> x) {
    State out = spec.f(x);
    const State gx = spec.g(x);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = 0.5 * (out[i] + gx[i]);
    return out;
}

inline DriftField averaged_field(const CoupledSpec& spec) {
    const double rate = 0.5 * (spec.f.linear_rate() + spec.g.linear_rate());
    std::optional<double> lip;
    if (spec.f.lipschitz() && spec.g.lipschitz()) lip = 0.5 * (*spec.f.lipschitz() + *spec.g.lipschitz());
    return DriftField(
        spec.dim(),
        [spec](std::span<const double> x, double, std::span<double> out) {
            thread_local State gx;
            gx.resize(x.size());
            spec.f(x, 0.0, out);
            spec.g(x, 0.0, gx);
            for (std::size_t i = 0; i < x.size(); ++i) out[i] = 0.5 * (out[i] + gx[i]);
        },
        lip, rate, "averaged");
}

// ---------------------------------------------------------------------------
// Built-in drift library

using DriftParams = std::map<std::string, double>;

struct DriftInfo {
    std::string name;
    std::string formula;
    DriftParams defaults;
};

inline const std::vector<DriftInfo>& drift_catalog() {
    static const std::vector<DriftInfo> catalog{
        {"constant", "f(x) = c", {{"c", 0.0}}},
        {"linear", "f(x) = -a x", {{"a", 1.0}}},
        {"tanh", "f(x) = b tanh(k x)   (bounded)", {{"b", -1.0}, {"k", 1.0}}},
        {"tanh_dissipative", "f(x) = -a x + b tanh(x)", {{"a", 1.0}, {"b", 0.5}}},
        {"cubic", "f(x) = a x - b x^3   (not globally Lipschitz)", {{"a", 1.0}, {"b", 1.0}}},
    };
    return catalog;
}

/// Builds a componentwise drift from the library. Unknown names or
/// parameters are validation errors.
inline DriftField make_drift(const std::string& name, const DriftParams& params, std::size_t dim) {
    const auto& catalog = drift_catalog();
    const auto it = std::find_if(catalog.begin(), catalog.end(), [&](const DriftInfo& d) { return d.name == name; });
    if (it == catalog.end()) throw ValidationError("unknown drift '" + name + "'");
    DriftParams p = it->defaults;
    for (const auto& [key, value] : params) {
        if (!p.contains(key)) throw ValidationError("drift '" + name + "' has no parameter '" + key + "'");
        if (!std::isfinite(value)) throw ValidationError("drift '" + name + "': parameter '" + key + "' not finite");
        p[key] = value;
    }
    if (name == "constant") {
        const double c = p["c"];
        return DriftField::componentwise(dim, [c](double) { return c; }, 0.0, 0.0, name);
    }
    if (name == "linear") {
        const double a = p["a"];
        return DriftField::componentwise(dim, [a](double x) { return -a * x; }, std::abs(a), std::max(a, 0.0), name);
    }
    if (name == "tanh") {
        const double b = p["b"], k = p["k"];
        return DriftField::componentwise(dim, [b, k](double x) { return b * std::tanh(k * x); }, std::abs(b * k), 0.0,
                                         name);
    }
    if (name == "tanh_dissipative") {
        const double a = p["a"], b = p["b"];
        return DriftField::componentwise(dim, [a, b](double x) { return -a * x + b * std::tanh(x); },
                                         std::abs(a) + std::abs(b), std::max(a, 0.0), name);
    }
    // cubic
    const double a = p["a"], b = p["b"];
    return DriftField::componentwise(dim, [a, b](double x) { return a * x - b * x * x * x; }, std::nullopt, 0.0, name);
}

// ---------------------------------------------------------------------------
// Hypothesis probes

struct ProbeBox {
    double lo = -10.0;
    double hi = 10.0;
};

struct HypothesisOptions {
    std::optional<double> radius;  // R; default is a quarter of the box width
    std::uint64_t seed = 0x5eedULL;
    double fd_step = 1e-6;
    double zero_tolerance = 1e-9;
};

struct HypothesisCertificate {
    double lipschitz_L = 0.0;
    double growth_M1 = 0.0;
    double dissipativity_M2 = 0.0;
    double radius_R = 0.0;
    double M3 = 0.0;  // sup |f|
    double M4 = 0.0;  // sup |g| / (1 + |y|)
    double M5 = 0.0;  // sup |grad f|
    double M6 = 0.0;  // sup |grad g|
    /// min over probes of -<y, 1/2 (f(x+y) - g(x-y)) - 2y> / |y|^2 at eps = 1,
    /// i.e. the dissipativity of the full fast drift including relaxation.
    double effective_dissipativity = 0.0;
    std::vector<std::string> warnings;
    std::string verified_on;
};

namespace detail {

inline double norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// Frobenius norm of the finite-difference Jacobian.
inline double jacobian_norm(const DriftField& field, std::span<const double> x, double step) {
    const std::size_t d = x.size();
    State xp(x.begin(), x.end()), xm(x.begin(), x.end()), fp(d), fm(d);
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
        const double h = step * std::max(1.0, std::abs(x[j]));
        xp[j] = x[j] + h;
        xm[j] = x[j] - h;
        field(xp, 0.0, fp);
        field(xm, 0.0, fm);
        for (std::size_t i = 0; i < d; ++i) {
            const double g = (fp[i] - fm[i]) / (2.0 * h);
            s += g * g;
        }
        xp[j] = xm[j] = x[j];
    }
    return std::sqrt(s);
}

}  // namespace detail

/// Probe-based estimates of the Lipschitz, growth, dissipativity and
/// boundedness constants of (f, g) on a box. The dissipativity condition is
/// tested literally, <y, f(y) - g(y)> <= -M2 |y|^2 for |y| >= R; a probe
/// that breaks it raises HypothesisViolation with the witness point.
inline HypothesisCertificate validate_hypotheses(const CoupledSpec& spec, const ProbeBox& box, std::size_t n_probe,
                                                 const HypothesisOptions& options = {}) {
    if (!(box.hi > box.lo) || !std::isfinite(box.hi - box.lo)) throw DomainError("validate_hypotheses: empty box");
    if (n_probe < 1000) throw DomainError("validate_hypotheses: need n_probe >= 1000");
    const std::size_t d = spec.dim();
    const double half_diag = 0.5 * std::sqrt(static_cast<double>(d)) * std::max(std::abs(box.lo), std::abs(box.hi));
    const double radius = options.radius.value_or(0.25 * (box.hi - box.lo));
    if (!(radius >= 0.0) || radius >= 2.0 * half_diag) throw DomainError("validate_hypotheses: radius outside box");

    RandomStream rng({options.seed, 0, Purpose::Probe});
    auto draw = [&](State& v) {
        for (double& c : v) c = box.lo + (box.hi - box.lo) * rng.uniform_open();
    };

    HypothesisCertificate cert;
    cert.radius_R = radius;
    cert.dissipativity_M2 = std::numeric_limits<double>::infinity();
    cert.effective_dissipativity = std::numeric_limits<double>::infinity();
    State x1(d), x2(d), f1(d), f2(d), g1(d), g2(d), y(d), diff(d), xp(d), xm(d);
    State witness;
    std::size_t n_far = 0;

    for (std::size_t k = 0; k < n_probe; ++k) {
        draw(x1);
        draw(x2);
        spec.f(x1, 0.0, f1);
        spec.f(x2, 0.0, f2);
        spec.g(x1, 0.0, g1);
        spec.g(x2, 0.0, g2);
        for (const auto& v : {f1, f2, g1, g2})
            if (!detail::all_finite(v)) throw HypothesisViolation("H.1", x1, "drift not finite at probe");
        for (std::size_t i = 0; i < d; ++i) diff[i] = x1[i] - x2[i];
        const double dx = detail::norm(diff);
        if (dx > 0.0) {
            for (std::size_t i = 0; i < d; ++i) diff[i] = f1[i] - f2[i];
            cert.lipschitz_L = std::max(cert.lipschitz_L, detail::norm(diff) / dx);
            for (std::size_t i = 0; i < d; ++i) diff[i] = g1[i] - g2[i];
            cert.lipschitz_L = std::max(cert.lipschitz_L, detail::norm(diff) / dx);
        }
        const double n1 = detail::norm(x1);
        cert.growth_M1 = std::max({cert.growth_M1, detail::norm(f1) / (1.0 + n1), detail::norm(g1) / (1.0 + n1)});
        cert.M3 = std::max(cert.M3, detail::norm(f1));
        cert.M4 = std::max(cert.M4, detail::norm(g1) / (1.0 + n1));
        cert.M5 = std::max(cert.M5, detail::jacobian_norm(spec.f, x1, options.fd_step));
        cert.M6 = std::max(cert.M6, detail::jacobian_norm(spec.g, x1, options.fd_step));

        // Dissipativity probes need |y| >= R; redraw x1 as y until it qualifies.
        y = x1;
        for (int tries = 0; detail::norm(y) < radius && tries < 64; ++tries) draw(y);
        const double ny = detail::norm(y);
        if (ny < radius || ny == 0.0) continue;
        ++n_far;
        spec.f(y, 0.0, f1);
        spec.g(y, 0.0, g1);
        for (std::size_t i = 0; i < d; ++i) diff[i] = f1[i] - g1[i];
        const double m = -detail::dot(y, diff) / (ny * ny);
        if (m < cert.dissipativity_M2) {
            cert.dissipativity_M2 = m;
            witness = y;
        }
        // Full fast drift at eps = 1 with the slow state x2.
        for (std::size_t i = 0; i < d; ++i) {
            xp[i] = x2[i] + y[i];
            xm[i] = x2[i] - y[i];
        }
        spec.f(xp, 0.0, f2);
        spec.g(xm, 0.0, g2);
        for (std::size_t i = 0; i < d; ++i) diff[i] = 0.5 * (f2[i] - g2[i]) - 2.0 * y[i];
        cert.effective_dissipativity = std::min(cert.effective_dissipativity, -detail::dot(y, diff) / (ny * ny));
    }
    if (n_far == 0) throw DomainError("validate_hypotheses: no probe reached |y| >= R");

    if (cert.dissipativity_M2 < -options.zero_tolerance) {
        std::ostringstream msg;
        msg << "<y, f(y) - g(y)> = " << -cert.dissipativity_M2 << " |y|^2 > 0 at |y| = " << detail::norm(witness);
        throw HypothesisViolation("H.2", witness, msg.str());
    }
    if (cert.dissipativity_M2 <= options.zero_tolerance) {
        cert.dissipativity_M2 = 0.0;
        cert.warnings.push_back("H.2 holds only with M2 = 0");
    }
    if (cert.effective_dissipativity <= 0.0)
        cert.warnings.push_back("fast drift including the -2y relaxation is not dissipative on the box");
    if (!spec.f.lipschitz() || !spec.g.lipschitz())
        cert.warnings.push_back("no analytic Lipschitz certificate; L is a probe estimate only");

    std::ostringstream where;
    where << "box [" << box.lo << ", " << box.hi << "]^" << d << ", n_probe = " << n_probe << ", R = " << radius;
    cert.verified_on = where.str();
    return cert;
}

}  // namespace levysync
