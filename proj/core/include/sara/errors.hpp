#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sara {

// Malformed PENMAN text, bad corpus records, invalid alignments.
class DataError : public std::runtime_error {
public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// PENMAN parse failure; carries the byte offset of the offending token.
class ParseError : public DataError {
public:
  ParseError(const std::string& msg, std::size_t offset)
      : DataError(msg + " (at byte " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::size_t offset() const { return offset_; }

private:
  std::size_t offset_;
};

// Tensor shape mismatches and other structural misuse of the math layer.
class ShapeError : public std::runtime_error {
public:
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite values, failed gradient checks, diverged training.
class NumericError : public std::runtime_error {
public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid configuration (rates out of range, inconsistent dims, ...).
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace sara
