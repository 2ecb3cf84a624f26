#pragma once

#include <stdexcept>
#include <string>

namespace lsim {

// Base class for all toolkit errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape/dimension mismatch between tensors, graphs or checkpoints.
struct DimError : Error {
    explicit DimError(const std::string& msg) : Error(msg) {}
};

// Malformed or invalid input data (JSON schema violations, bad TSV rows, ...).
struct DataError : Error {
    explicit DataError(const std::string& msg) : Error(msg) {}
};

// File could not be read or written.
struct IoError : Error {
    explicit IoError(const std::string& msg) : Error(msg) {}
};

// Non-finite value where a finite one is required (NaN loss, corrupt input).
struct NumericError : Error {
    explicit NumericError(const std::string& msg) : Error(msg) {}
};

}  // namespace lsim
