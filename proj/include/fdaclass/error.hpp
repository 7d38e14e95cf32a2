#pragma once

#include <stdexcept>
#include <string>

namespace fdaclass {

// Bad input data or arguments (CLI exit code 2).
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A numerical routine could not produce a trustworthy result (exit code 3).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Raised when a normal-equation or Newton system is singular within tolerance.
class SingularSystemError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

// Invalid experiment configuration (exit code 4).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace fdaclass
