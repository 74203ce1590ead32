#pragma once

#include <stdexcept>
#include <string>

namespace seasonal_spline {

/// Malformed input: bad operator spec, grid, block lengths, config.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Operator kind has no evaluator on the requested path.
class UnsupportedOperatorError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Fourier tail bound cannot meet the requested tolerance with the configured term count.
class TruncationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NotPeriodizableError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IntegrationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A measurement functional is not admissible for the operator pair.
class AdmissibilityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The null space of the regularizer is not resolved by the measurements.
class IllPosedNullspaceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConditioningError : public std::runtime_error {
public:
    ConditioningError(const std::string& what, double jitter)
        : std::runtime_error(what), jitter_(jitter) {}
    double jitter() const { return jitter_; }

private:
    double jitter_;
};

} // namespace seasonal_spline
