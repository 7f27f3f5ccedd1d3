#pragma once

#include <stdexcept>
#include <string>

namespace barfiq {

// Root of the library's exception hierarchy. The CLI maps each subtype to an
// exit code (config/usage 1, data 2, numerical 3).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Precondition on a value (non-finite angle, empty vector, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Inconsistent or invalid configuration (odd d_model, P > L, unknown key).
class ConfigError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// Malformed or missing input files, degenerate datasets.
class DataError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss or gradient, broken statevector normalization.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace barfiq
