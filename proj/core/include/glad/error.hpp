#pragma once

#include <stdexcept>
#include <string>

namespace glad {

/// Base class for every error thrown by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible matrix/tensor dimensions. The message names both shapes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Semantically invalid input (NaN logits, empty transcript, bad ratio, ...).
class InvalidInputError : public Error {
 public:
  using Error::Error;
};

/// A serialized transcript that violates the separator-token grammar.
class MalformedSequenceError : public InvalidInputError {
 public:
  using InvalidInputError::InvalidInputError;
};

/// Invalid model or run configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A mixture request whose target overlap band cannot be reached.
class InfeasibleBandError : public Error {
 public:
  using Error::Error;
};

/// Filesystem / stream failures. CLI maps these to exit code 2.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace glad
