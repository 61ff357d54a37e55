#pragma once

#include <stdexcept>
#include <string>

namespace fairenc {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Record violates the attribute schema (unknown group, bad probability vector).
class SchemaError : public Error {
 public:
  using Error::Error;
};

// A line-delimited input file could not be parsed.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Non-finite value encountered; the message names the offending quantity.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class PairingError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

}  // namespace fairenc
