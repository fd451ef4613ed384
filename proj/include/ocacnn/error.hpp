#pragma once

#include <stdexcept>

namespace ocacnn {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes or layer specs that do not fit together.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A caller broke a precondition (non-scalar backward root, bad argument).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values where finite ones are required.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Missing, undecodable or inconsistent data on disk.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Malformed binary or text file (bad magic, version, truncated payload).
class FormatError : public DataError {
 public:
  using DataError::DataError;
};

/// Unknown keys or unparsable values in a run configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace ocacnn
