#pragma once

#include <stdexcept>
#include <string>

namespace svsc {

// Invalid or non-finite inputs, or a request outside an operation's domain.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Calibration did not converge; carries the best residual seen.
class CalibrationError : public NumericalError {
public:
    CalibrationError(const std::string& what, double best_residual)
        : NumericalError(what), best_residual_(best_residual) {}
    double best_residual() const noexcept { return best_residual_; }

private:
    double best_residual_;
};

// Reflected-strike root could not be bracketed.
class ReplicationError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class EstimationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace svsc
