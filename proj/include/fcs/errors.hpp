#pragma once

#include <stdexcept>
#include <string>

namespace fcs {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor axis or shape disagreement.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Kernel/stride/padding or block geometry that cannot be realized.
class GeometryError : public Error {
 public:
  using Error::Error;
};

/// Invalid user-supplied configuration value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// API misuse, e.g. a non-scalar loss passed to backward.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values where finite ones are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Training produced a NaN/Inf loss.
class DivergenceError : public NumericError {
 public:
  using NumericError::NumericError;
};

/// Unreadable or truncated input file.
class IngestionError : public Error {
 public:
  using Error::Error;
};

/// Input file in a format we do not read.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint payload failed integrity checks.
class ChecksumError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint written by an incompatible format version.
class MigrationError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint architecture differs from the one requested.
class ArchMismatchError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

}  // namespace fcs
