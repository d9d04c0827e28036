#pragma once

#include <stdexcept>
#include <string>

namespace disco {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Bad user-supplied configuration (CLI exit code 2).
struct ConfigError : Error {
  using Error::Error;
};

/// Unreadable or malformed input data (CLI exit code 3).
struct DataError : Error {
  using Error::Error;
};

/// Too few rows to train or split.
struct InsufficientDataError : DataError {
  using DataError::DataError;
};

/// Matrix/vector dimensions do not line up.
struct ShapeError : Error {
  using Error::Error;
};

/// Caller violated a documented precondition.
struct ContractError : Error {
  using Error::Error;
};

/// The requested operation needs model artifacts (embeddings, gradients)
/// the given model kind cannot provide.
struct CapabilityError : Error {
  using Error::Error;
};

/// Training produced a non-finite quantity; carries the epoch it happened in.
struct NumericalError : Error {
  int epoch;
  NumericalError(const std::string& what, int epoch_index)
      : Error(what), epoch(epoch_index) {}
};

}  // namespace disco
