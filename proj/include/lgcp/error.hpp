#ifndef LGCP_ERROR_HPP
#define LGCP_ERROR_HPP

#include <stdexcept>
#include <string>

namespace lgcp {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad arguments, malformed files, schema violations. CLI exit code 2.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

class InsufficientData : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

class InsufficientSamples : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

/// Numerical failures. CLI exit code 3.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Circulant embedding produced eigenvalues below the clamping tolerance.
class EmbeddingFailure : public NumericalError {
 public:
  EmbeddingFailure(const std::string& what, double deficit)
      : NumericalError(what), deficit_(deficit) {}
  double deficit() const { return deficit_; }

 private:
  double deficit_;
};

class NumericalOverflow : public NumericalError {
 public:
  NumericalOverflow(const std::string& what, double max_predictor)
      : NumericalError(what), max_predictor_(max_predictor) {}
  double max_linear_predictor() const { return max_predictor_; }

 private:
  double max_predictor_;
};

class OptimizationFailure : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class DegenerateRegion : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace lgcp

#endif  // LGCP_ERROR_HPP
