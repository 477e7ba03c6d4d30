#pragma once

#include <stdexcept>
#include <string>

namespace oggbn {

// Base for all engine errors. Subclasses group by which exit code the CLI maps
// them to: ConfigError -> 2, DataError -> 3, anything else -> 4.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
  using Error::Error;
};
struct DataError : Error {
  using Error::Error;
};

// sparse-core
struct DuplicateEntry : DataError {
  using DataError::DataError;
};
struct LevelOutOfRange : DataError {
  using DataError::DataError;
};
struct IndexOutOfRange : DataError {
  using DataError::DataError;
};

// samplers
struct NonPositiveParameter : Error {
  using Error::Error;
};
struct AllZeroWeights : Error {
  using Error::Error;
};

// thresholds
struct NonPositiveDelta : Error {
  using Error::Error;
};
struct EmptyDenominator : Error {
  using Error::Error;
};

// graph side
struct ZeroRateEdge : Error {
  using Error::Error;
};

// model states
struct BadDimensions : ConfigError {
  using ConfigError::ConfigError;
};
struct EmptyStateList : Error {
  using Error::Error;
};

// data io
struct ParseError : DataError {
  using DataError::DataError;
};
struct ValueOutOfRange : DataError {
  using DataError::DataError;
};
struct NonPositiveCount : DataError {
  using DataError::DataError;
};

// eval
struct NoEvaluableUsers : DataError {
  using DataError::DataError;
};

// cli / checkpoints
struct MissingCheckpoint : DataError {
  using DataError::DataError;
};
struct UnknownUser : DataError {
  using DataError::DataError;
};

}  // namespace oggbn
