#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace dagd {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand dimensions do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A numeric parameter is outside its admissible range.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// CSV ingestion failure. Carries the 1-based row/column of the offending
/// cell where one exists (0 when not applicable).
class IngestError : public Error {
 public:
  enum class Kind { missing_file, empty_data, missing_column, non_numeric, ragged_row, constant_column };

  IngestError(Kind kind, std::string what, std::size_t row = 0, std::size_t col = 0)
      : Error(std::move(what)), kind_(kind), row_(row), col_(col) {}

  Kind kind() const noexcept { return kind_; }
  std::size_t row() const noexcept { return row_; }
  std::size_t col() const noexcept { return col_; }

 private:
  Kind kind_;
  std::size_t row_;
  std::size_t col_;
};

/// Inconsistent trainer or experiment configuration. `field` is a dotted
/// path into the configuration when the error originates from a config file.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::string what, std::string field = {})
      : Error(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Training blew up: a weight left the admissible magnitude range.
class DivergenceError : public Error {
 public:
  DivergenceError(std::size_t epoch, std::string what)
      : Error(std::move(what)), epoch_(epoch) {}

  std::size_t epoch() const noexcept { return epoch_; }

 private:
  std::size_t epoch_;
};

}  // namespace dagd
