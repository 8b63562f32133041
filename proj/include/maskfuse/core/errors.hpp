#pragma once

#include <stdexcept>
#include <string>

namespace maskfuse {

// Bad configuration values (sizes not divisible, counts out of range, ...).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Inputs that violate a documented precondition or invariant.
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// File parsing / serialization failures.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-finite values or failed numerical procedures.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace maskfuse
