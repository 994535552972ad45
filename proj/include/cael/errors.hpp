#pragma once

#include <stdexcept>
#include <string>

namespace cael {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller passed an argument outside an operation's domain.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// The target policy puts mass on an action the behavior policy never plays
/// (violated overlap); importance weights are undefined there.
class UnsupportedAction : public Error {
 public:
  using Error::Error;
};

/// Logged data violates an invariant (e.g. non-positive propensity).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Input file does not match its declared schema (missing column, wrong width).
class SchemaError : public DataError {
 public:
  using DataError::DataError;
};

/// A cell could not be parsed; the message names the row.
class ParseError : public DataError {
 public:
  using DataError::DataError;
};

/// Experiment or tool configuration is invalid.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss; usually the learning rate is too high.
class TrainingDiverged : public Error {
 public:
  using Error::Error;
};

/// Filesystem failure while reading or writing artifacts.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace cael
