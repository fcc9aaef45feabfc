#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace enreg {

// Broad error families. The CLI maps these onto exit codes 1, 2 and 3.
enum class ErrorKind { config, data, numerical };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

struct DataError : Error {
  explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

struct NumericalError : Error {
  explicit NumericalError(const std::string& what)
      : Error(ErrorKind::numerical, what) {}
};

struct FormatError : DataError {
  using DataError::DataError;
};

struct EmptyInputError : DataError {
  using DataError::DataError;
};

struct DimensionError : DataError {
  using DataError::DataError;
};

struct BoundsError : DataError {
  using DataError::DataError;
};

struct CountError : DataError {
  using DataError::DataError;
};

struct InsufficientDataError : DataError {
  using DataError::DataError;
};

struct UndefinedMetricError : DataError {
  using DataError::DataError;
};

// Solver precondition violated by the caller (e.g. unstandardized design).
struct ContractError : DataError {
  using DataError::DataError;
};

struct IoError : DataError {
  using DataError::DataError;
};

// Non-numeric CSV cell. Row and column are 1-based, as a user sees them in an editor.
class ParseError : public DataError {
 public:
  ParseError(std::size_t row, std::size_t col, const std::string& cell)
      : DataError("parse error at row " + std::to_string(row) + ", column " +
                  std::to_string(col) + ": '" + cell + "' is not a finite number"),
        row_(row),
        col_(col) {}
  std::size_t row() const noexcept { return row_; }
  std::size_t col() const noexcept { return col_; }

 private:
  std::size_t row_;
  std::size_t col_;
};

class LengthError : public DataError {
 public:
  LengthError(std::size_t expected, std::size_t actual)
      : DataError("truncated payload: expected " + std::to_string(expected) +
                  " bytes, got " + std::to_string(actual)),
        expected_(expected),
        actual_(actual) {}
  std::size_t expected() const noexcept { return expected_; }
  std::size_t actual() const noexcept { return actual_; }

 private:
  std::size_t expected_;
  std::size_t actual_;
};

}  // namespace enreg
