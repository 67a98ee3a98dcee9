#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gagn {

// Root of every error the library throws. The CLI maps the subclasses onto
// exit codes (config 2, data 3, numeric 4).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class ParseError : public DataError {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& what)
      : DataError(file + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class SchemaError : public DataError {
 public:
  using DataError::DataError;
};

// Perturbation cannot be realised on the given graph (not enough non-edges,
// rewiring gave up).
class CapacityError : public DataError {
 public:
  using DataError::DataError;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class UnsupportedGraphError : public DataError {
 public:
  using DataError::DataError;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace gagn
