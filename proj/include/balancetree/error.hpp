#pragma once

#include <stdexcept>
#include <string>

namespace balancetree {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or invalid input data (I/O, parsing, validation).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A leaf whose weighted mass is zero in one group.
class DegenerateLeafError : public Error {
 public:
  using Error::Error;
};

/// |log w| exceeded the representable range at some sample point.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace balancetree
