#pragma once

#include <stdexcept>
#include <string>

namespace hbar {

/// Base class for all errors thrown by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Operand shapes are incompatible (message names both shapes).
struct DimensionError : Error {
    using Error::Error;
};

/// A documented precondition was violated by the caller.
struct ContractError : Error {
    using Error::Error;
};

/// A NaN/Inf was produced where finiteness is required.
struct NumericError : Error {
    using Error::Error;
};

/// Experiment configuration is malformed or inconsistent.
struct ConfigError : Error {
    using Error::Error;
};

/// A data file or checkpoint is missing, truncated or mismatched.
struct ArtifactError : Error {
    using Error::Error;
};

}  // namespace hbar
