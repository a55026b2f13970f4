#pragma once

#include <stdexcept>
#include <string>

namespace causalkm {

/// Base of every error thrown by the library. The CLI maps subclasses onto
/// exit codes (config 2, data 3, numeric/fit 4).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

/// Model fitting failed (singular design, too few units, ...).
class FitError : public Error {
 public:
  using Error::Error;
};

class InitError : public Error {
 public:
  using Error::Error;
};

class OptimizationError : public Error {
 public:
  using Error::Error;
};

/// Operation applied to an object in the wrong state, e.g. reparametrizing
/// a matrix that is already in contrast form.
class StateError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

}  // namespace causalkm
