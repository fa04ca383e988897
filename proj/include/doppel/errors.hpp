#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace doppel {

// Error kinds double as the status codes exported through the C API, so the
// numeric values are part of the ABI.
enum class ErrorKind : int {
  input = 1,
  dimension = 2,
  state = 3,
  lookup = 4,
  conflict = 5,
  unsupported_map = 6,
  numeric = 7,
  config = 8,
  parse = 9,
  export_failure = 10,
  evaluation = 11,
  search_failure = 12,
  io = 13,
  internal = 14,
};

const char* error_kind_name(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class InputError : public Error {
 public:
  explicit InputError(const std::string& m) : Error(ErrorKind::input, m) {}
};

class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& m) : Error(ErrorKind::dimension, m) {}
};

class StateError : public Error {
 public:
  explicit StateError(const std::string& m) : Error(ErrorKind::state, m) {}
};

class LookupError : public Error {
 public:
  explicit LookupError(const std::string& m) : Error(ErrorKind::lookup, m) {}
};

class ConflictError : public Error {
 public:
  explicit ConflictError(const std::string& m) : Error(ErrorKind::conflict, m) {}
};

class UnsupportedMapError : public Error {
 public:
  explicit UnsupportedMapError(const std::string& m) : Error(ErrorKind::unsupported_map, m) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& m) : Error(ErrorKind::numeric, m) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& m) : Error(ErrorKind::config, m) {}
};

/// Raised by the protobuf reader; `offset()` is the absolute byte position
/// in the buffer where decoding failed.
class ParseError : public Error {
 public:
  ParseError(const std::string& m, std::size_t offset)
      : Error(ErrorKind::parse, m + " (at byte " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class ExportError : public Error {
 public:
  explicit ExportError(const std::string& m) : Error(ErrorKind::export_failure, m) {}
};

class EvaluationError : public Error {
 public:
  explicit EvaluationError(const std::string& m) : Error(ErrorKind::evaluation, m) {}
};

class SearchFailure : public Error {
 public:
  explicit SearchFailure(const std::string& m) : Error(ErrorKind::search_failure, m) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& m) : Error(ErrorKind::io, m) {}
};

}  // namespace doppel
