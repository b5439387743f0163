#pragma once

#include <stdexcept>
#include <string>

namespace dimcollapse {

// Base of every error thrown by the library. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shapes, non-finite entries, asymmetry beyond tolerance.
class InvalidInputError : public Error {
 public:
  using Error::Error;
};

// Too few samples / vectors for the operation to be defined.
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

class UnsupportedModeError : public Error {
 public:
  using Error::Error;
};

// Singular values closer than the rate formulas tolerate.
class DegenerateSpectrumError : public Error {
 public:
  using Error::Error;
};

// A column that had to be normalized has zero norm.
class NormalizationError : public Error {
 public:
  using Error::Error;
};

class StateError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  DivergenceError(long step, const std::string& what);
  long step() const noexcept { return step_; }

 private:
  long step_;
};

// Bad config key, bad value, parse failure.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace dimcollapse
