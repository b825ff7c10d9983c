#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mainstreamlab {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input line. line() is 1-based.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class EmptyDatasetError : public Error {
 public:
  using Error::Error;
};

// Raised when a rank correlation has a constant input vector.
class UndefinedCorrelationError : public Error {
 public:
  using Error::Error;
};

}  // namespace mainstreamlab
