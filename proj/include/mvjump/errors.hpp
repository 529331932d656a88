#pragma once

#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Dense>

namespace mvjump {

/// Inconsistent dimensions or malformed input data.
class StructuralError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Argument outside the domain of an operation (time outside [0,T], negative
/// portfolio component, oracle preconditions not met, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// An iterative method failed to reach its tolerance. Carries the last
/// iterate and its residual so callers can inspect how far off it was.
class NumericError : public std::runtime_error {
public:
    NumericError(const std::string& what, Eigen::VectorXd last_iterate, double residual)
        : std::runtime_error(what), last_iterate_(std::move(last_iterate)), residual_(residual) {}

    explicit NumericError(const std::string& what) : std::runtime_error(what) {}

    const Eigen::VectorXd& last_iterate() const noexcept { return last_iterate_; }
    double residual() const noexcept { return residual_; }

private:
    Eigen::VectorXd last_iterate_;
    double residual_ = 0.0;
};

/// The backward ODE left the band [alpha, 1] that the exact solution is known
/// to stay in; the step is too coarse.
class IntegrationError : public NumericError {
public:
    IntegrationError(const std::string& what, double time) : NumericError(what), time_(time) {}
    double time() const noexcept { return time_; }

private:
    double time_;
};

/// A derived quantity violated a property it must satisfy (signals a broken
/// upstream computation rather than bad user input).
class InvariantError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

}  // namespace mvjump
