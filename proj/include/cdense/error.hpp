#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cdense {

// Broad error classes; each maps to a distinct process exit code in the CLI.
enum class ErrorKind {
  usage = 2,
  io = 3,
  parse = 4,
  validation = 5,
  data = 6,
  numeric = 7,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ErrorKind::usage, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::io, what) {}
};

class ParseError : public Error {
 public:
  ParseError(std::size_t offset, const std::string& what)
      : Error(ErrorKind::parse, "offset " + std::to_string(offset) + ": " + what),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

// A corpus line that could not be decoded.
class RecordError : public Error {
 public:
  RecordError(std::size_t line, const std::string& what)
      : Error(ErrorKind::parse, "line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what)
      : Error(ErrorKind::validation, what) {}
};

class DuplicateIdError : public ValidationError {
 public:
  explicit DuplicateIdError(const std::string& id)
      : ValidationError("duplicate id '" + id + "'") {}
};

class MissingParseError : public ValidationError {
 public:
  explicit MissingParseError(const std::string& id)
      : ValidationError("lead '" + id + "' lacks parse trees") {}
};

class EmptyLeadError : public ValidationError {
 public:
  explicit EmptyLeadError(const std::string& id)
      : ValidationError("lead '" + id + "' has no tokens") {}
};

class EmptySummaryError : public ValidationError {
 public:
  EmptySummaryError() : ValidationError("summary has no tuples") {}
};

class SpaceMismatchError : public ValidationError {
 public:
  explicit SpaceMismatchError(const std::string& what) : ValidationError(what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

class DegenerateDistributionError : public DataError {
 public:
  explicit DegenerateDistributionError(const std::string& what) : DataError(what) {}
};

class SingleClassError : public DataError {
 public:
  SingleClassError() : DataError("training data contains a single class") {}
};

class DataLeakError : public DataError {
 public:
  explicit DataLeakError(const std::string& id)
      : DataError("id '" + id + "' appears in both train and dev") {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ErrorKind::numeric, what) {}
};

}  // namespace cdense
