#pragma once

#include <stdexcept>
#include <string>

namespace rstdr {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A Cholesky pivot fell below tolerance.
class NotPositiveDefinite : public Error {
 public:
  NotPositiveDefinite(const std::string& what, long pivot_index = -1)
      : Error(what), pivot_index_(pivot_index) {}
  long pivot_index() const noexcept { return pivot_index_; }

 private:
  long pivot_index_;
};

class InvalidShape : public Error {
 public:
  using Error::Error;
};

class InvalidSimplex : public Error {
 public:
  using Error::Error;
};

class InvalidRange : public Error {
 public:
  using Error::Error;
};

class TooManyKnots : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure inside a chain, tagged with the iteration it happened on.
class ChainError : public Error {
 public:
  ChainError(const std::string& what, long iteration)
      : Error(what), iteration_(iteration) {}
  long iteration() const noexcept { return iteration_; }

 private:
  long iteration_;
};

}  // namespace rstdr
