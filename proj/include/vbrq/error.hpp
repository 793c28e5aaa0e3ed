#pragma once

#include <stdexcept>
#include <string>

namespace vbrq {

/// Inputs violate a documented contract (dimensions, parameter ranges).
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A factorization or inversion failed on numerically valid-looking input.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// File access or parse failure.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace vbrq
