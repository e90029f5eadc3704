#pragma once

#include <stdexcept>
#include <string>

namespace armo {

/// Input violates a documented precondition (bad dimensions, bad config,
/// malformed manifest). CLI exit code 2.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Stored data is not in the expected container format (bad magic,
/// unsupported version, truncation). Also exit code 2.
class FormatError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// A computation produced or received non-finite values, or a solver
/// broke down. CLI exit code 3.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace armo
