#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>

namespace gnr {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Error hierarchy. The CLI maps each family onto a distinct exit code.
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

class ShapeError : public DataError {
 public:
  using DataError::DataError;
};

class ProviderError : public Error {
 public:
  explicit ProviderError(const std::string& what, int status = 0) : Error(what), status_(status) {}
  int status() const noexcept { return status_; }

 private:
  int status_;
};

class TransportError : public ProviderError {
 public:
  using ProviderError::ProviderError;
};

class TimeoutError : public ProviderError {
 public:
  using ProviderError::ProviderError;
};

// Provider output that could not be parsed into the expected shape.
class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace gnr
