#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lhn {

// Base of every error thrown by the library. Callers that only care about
// "something went wrong" catch this; the CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

class ParameterError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

// Empty dataset, too few rows, n < folds and similar input problems.
class InputError : public Error {
 public:
  using Error::Error;
};

class InsufficientDataError : public InputError {
 public:
  using InputError::InputError;
};

class UndefinedClassError : public Error {
 public:
  using Error::Error;
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t row, const std::string& what)
      : Error("row " + std::to_string(row) + ": " + what), row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

class DegenerateClassError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  FormatError(std::size_t offset, const std::string& what)
      : Error("offset " + std::to_string(offset) + ": " + what), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class UnsupportedVersionError : public Error {
 public:
  using Error::Error;
};

class ArchitectureInfeasibleError : public Error {
 public:
  ArchitectureInfeasibleError(std::size_t layer, const std::string& what)
      : Error("layer " + std::to_string(layer) + ": " + what), layer_(layer) {}
  std::size_t layer() const noexcept { return layer_; }

 private:
  std::size_t layer_;
};

class TrainingDivergedError : public Error {
 public:
  using Error::Error;
};

}  // namespace lhn
