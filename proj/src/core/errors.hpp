#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace avood {

// Error taxonomy for the whole library. The numeric values double as process
// exit codes at the CLI boundary and as status codes in the C API.
enum class ErrorKind : int {
  config = 2,   // bad arguments, dimension mismatches, invalid configs
  data = 3,     // file-format problems, split/hygiene violations
  numeric = 4,  // non-finite values, failed convergence
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error(ErrorKind::config, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

// Malformed file contents; carries the byte offset where parsing stopped.
class FormatError : public DataError {
 public:
  FormatError(const std::string& what, size_t offset)
      : DataError(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}
  size_t offset() const { return offset_; }

 private:
  size_t offset_;
};

// An unseen-class sample reached a training path.
class HygieneError : public DataError {
 public:
  explicit HygieneError(const std::string& what) : DataError(what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ErrorKind::numeric, what) {}
};

class ConvergenceError : public NumericError {
 public:
  explicit ConvergenceError(const std::string& what) : NumericError(what) {}
};

}  // namespace avood
