#pragma once

#include <stdexcept>
#include <string>

namespace stabletree {

/// Base of every error raised by the library. The CLI maps the concrete
/// subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad configuration or a violated calling contract.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class ContractError : public Error {
 public:
  using Error::Error;
};

/// Input data does not conform to its schema, or could not be parsed.
class DataError : public Error {
 public:
  using Error::Error;
};

class SchemaError : public DataError {
 public:
  using DataError::DataError;
};

/// A tree was used against a schema it was not built for.
class IncompatibleTreeError : public DataError {
 public:
  using DataError::DataError;
};

class DegenerateSplitError : public Error {
 public:
  using Error::Error;
};

class DegenerateOracleError : public Error {
 public:
  using Error::Error;
};

class OracleIoError : public Error {
 public:
  using Error::Error;
};

/// The rejection sampler could not place enough draws inside a node region.
class SamplerStarvationError : public Error {
 public:
  using Error::Error;
};

/// An internal invariant failed; always a bug.
class InvariantError : public Error {
 public:
  using Error::Error;
};

}  // namespace stabletree
