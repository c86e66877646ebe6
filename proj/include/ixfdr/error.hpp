#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace ixfdr {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid user-facing configuration (sizes, levels, step counts).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A precondition of an operation was violated by the caller (shape mismatch,
// asymmetric matrix, ...). Indicates a programming error upstream.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

// Malformed or invalid input data (CSV parsing, response validation).
class DataError : public Error {
 public:
  using Error::Error;
};

// Non-finite values produced during a numerical computation.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class TrainingDiverged : public NumericalError {
 public:
  TrainingDiverged(int epoch, const std::string& what)
      : NumericalError(what), epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

class DegenerateFeatureError : public DataError {
 public:
  DegenerateFeatureError(std::vector<std::size_t> columns, const std::string& what)
      : DataError(what), columns_(std::move(columns)) {}
  const std::vector<std::size_t>& columns() const { return columns_; }

 private:
  std::vector<std::size_t> columns_;
};

}  // namespace ixfdr
