#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace levysync {

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// An L^p order that is not strictly inside (1, alpha). Every estimator raises
/// this same type so callers can treat the moment condition uniformly.
class MomentOrderError : public DomainError {
public:
    MomentOrderError(double p, double alpha)
        : DomainError("L^p order p=" + std::to_string(p) +
                      " must satisfy 1 < p < alpha=" + std::to_string(alpha)),
          p_(p), alpha_(alpha) {}
    double p() const noexcept { return p_; }
    double alpha() const noexcept { return alpha_; }

private:
    double p_;
    double alpha_;
};

inline void require_moment_order(double p, double alpha) {
    if (!(p > 1.0 && p < alpha)) throw MomentOrderError(p, alpha);
}

class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class FitError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NotRelaxedError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Path families compared by an estimator were not generated from the same
/// seed manifest.
class SeedMismatchError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A probe point falsified one of the structural hypotheses on (f, g).
class HypothesisViolation : public std::runtime_error {
public:
    HypothesisViolation(std::string hypothesis, std::vector<double> witness, const std::string& detail)
        : std::runtime_error(hypothesis + " violated: " + detail),
          hypothesis_(std::move(hypothesis)), witness_(std::move(witness)) {}
    const std::string& hypothesis() const noexcept { return hypothesis_; }
    const std::vector<double>& witness() const noexcept { return witness_; }

private:
    std::string hypothesis_;
    std::vector<double> witness_;
};

class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, std::string field, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + (field.empty() ? "" : " [" + field + "]") +
                             ": " + what),
          line_(line), field_(std::move(field)) {}
    std::size_t line() const noexcept { return line_; }
    const std::string& field() const noexcept { return field_; }

private:
    std::size_t line_;
    std::string field_;
};

class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace levysync
