#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace kgax {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file; carries the 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}
  explicit ParseError(const std::string& what) : Error(what) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_ = 0;
};

/// Well-formed input that violates a data contract (unknown names, empty sets,
/// exhausted samplers).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration key or value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf produced or consumed by a numeric routine.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Model file failures. Each kind is a distinct type so callers can tell them apart.
class ModelFormatError : public Error {
 public:
  using Error::Error;
};

class BadMagicError : public ModelFormatError {
 public:
  BadMagicError() : ModelFormatError("bad magic: not a KGAX model file") {}
};

class VersionMismatchError : public ModelFormatError {
 public:
  VersionMismatchError(unsigned found, unsigned expected)
      : ModelFormatError("version mismatch: file has format version " + std::to_string(found) +
                         ", expected " + std::to_string(expected)) {}
};

class TruncatedPayloadError : public ModelFormatError {
 public:
  explicit TruncatedPayloadError(const std::string& where)
      : ModelFormatError("truncated payload while reading " + where) {}
};

}  // namespace kgax
