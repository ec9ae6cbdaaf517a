#pragma once

#include <stdexcept>
#include <string>

namespace loadwatch {

// Base for everything thrown by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad configuration values or malformed config/option input. CLI exit code 2.
struct ConfigError : Error {
    using Error::Error;
};

// Malformed or insufficient data (CSV parse failures, empty series,
// missing model files, ...). CLI exit code 3.
struct DataError : Error {
    using Error::Error;
};

// Non-finite values where finite ones are required (NaN loss etc). CLI exit code 4.
struct NumericError : Error {
    using Error::Error;
};

// Tensor shape contract violations.
struct ShapeError : Error {
    using Error::Error;
};

// Thrown when a threshold window has no samples.
struct InsufficientHistoryError : DataError {
    using DataError::DataError;
};

} // namespace loadwatch
