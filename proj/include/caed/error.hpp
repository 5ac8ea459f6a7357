#pragma once

#include <stdexcept>
#include <string>

namespace caed {

/// Base for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Array or operator dimensions do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A hyper-parameter or argument is outside its admissible range.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Malformed file contents (bad magic, truncation, size mismatch).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Configuration document violates the schema. The message carries the key path.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace caed
