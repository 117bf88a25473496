#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace lmc {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CatalogError : public Error {
 public:
  using Error::Error;
};

class ParamError : public Error {
 public:
  using Error::Error;
};

class PerturbationTooLarge : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class PlanError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class GridError : public Error {
 public:
  using Error::Error;
};

class GridTooSmall : public GridError {
 public:
  using GridError::GridError;
};

class Unsupported : public Error {
 public:
  using Error::Error;
};

// Raised when an LMC iterate leaves the finite doubles.
class DivergenceError : public Error {
 public:
  DivergenceError(std::int64_t step, const std::string& what)
      : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}

  std::int64_t step() const noexcept { return step_; }

 private:
  std::int64_t step_;
};

}  // namespace lmc
