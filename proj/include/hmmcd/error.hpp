#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace hmmcd {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of a function (e.g. a quantile of p >= 1).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Invalid user-supplied parameter. `field()` names the offending parameter.
class ParameterError : public Error {
 public:
  ParameterError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Model validation failure. `key()` is the offending document key, `row()` the
/// offending row (or -1 when the whole key is at fault).
class ValidationError : public Error {
 public:
  ValidationError(std::string key, long row, const std::string& what)
      : Error(key + (row >= 0 ? "[" + std::to_string(row) + "]" : std::string()) + ": " + what),
        key_(std::move(key)),
        row_(row) {}
  const std::string& key() const noexcept { return key_; }
  long row() const noexcept { return row_; }

 private:
  std::string key_;
  long row_;
};

class BracketError : public Error {
 public:
  using Error::Error;
};

class CalibrationError : public Error {
 public:
  using Error::Error;
};

class SolverError : public Error {
 public:
  using Error::Error;
};

/// A Monte-Carlo conditioning event had too few survivors to yield an estimate.
class DegenerateEstimateError : public Error {
 public:
  using Error::Error;
};

class CapTooSmallError : public Error {
 public:
  using Error::Error;
};

/// An exhaustive enumeration would exceed its configured size cap.
class SizeError : public Error {
 public:
  using Error::Error;
};

/// An adversary rule was paired with an information model that does not grant
/// the coordinates it reads.
class CausalityError : public Error {
 public:
  using Error::Error;
};

}  // namespace hmmcd
