#pragma once

#include <stdexcept>
#include <string>

namespace ramp {

// Base for every error the library raises. The CLI maps it to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, long row) : Error(what), row_(row) {}
  long row() const noexcept { return row_; }

 private:
  long row_;
};

class RaggedDayError : public Error {
 public:
  RaggedDayError(const std::string& what, std::string date) : Error(what), date_(std::move(date)) {}
  const std::string& date() const noexcept { return date_; }

 private:
  std::string date_;
};

class EmptySliceError : public Error {
 public:
  using Error::Error;
};

class InsufficientHistoryError : public Error {
 public:
  using Error::Error;
};

class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class ConstraintViolation : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

}  // namespace ramp
