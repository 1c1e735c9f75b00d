#pragma once

#include <stdexcept>
#include <string>

namespace lgpc {

/// Malformed or out-of-contract input (bad shapes, non-finite values, unknown names).
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A numerical procedure could not produce a usable result.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Correlation parameters outside the positive-definite cone.
class DomainError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// Total kernel mass at an evaluation point is too small to fit anything.
class DegenerateNeighborhood : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// Conditioning block of a correlation matrix is (numerically) singular.
class SingularConditioning : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// Accept-reject sampling could not reach the minimum acceptance rate.
class EnvelopeFailure : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// No observation falls inside the integration region of the test statistic.
class EmptyRegion : public NumericalError {
public:
    using NumericalError::NumericalError;
};

}  // namespace lgpc
