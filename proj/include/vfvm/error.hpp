#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace vfvm {

// Every failure raised by the library derives from Error. The C API maps the
// subclasses onto its status codes (argument 2, data 3, fitting 4).
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class ArgumentError : public Error {
public:
  using Error::Error;
};

// Inconsistent or malformed input data.
class DataError : public Error {
public:
  using Error::Error;
};

// Dimension mismatches, indices outside a grid, empty voxel sets.
class StructuralError : public DataError {
public:
  using DataError::DataError;
};

class ParseError : public DataError {
public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
    : DataError(source + ":" + std::to_string(line) + ": " + what)
    , line_(line)
  {}

  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

// Model document carries a schema version this build cannot read.
class SchemaError : public DataError {
public:
  using DataError::DataError;
};

class FittingError : public Error {
public:
  using Error::Error;
};

} // namespace vfvm
