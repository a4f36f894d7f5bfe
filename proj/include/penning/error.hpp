#pragma once

#include <stdexcept>
#include <string>

namespace penning {

/// Base of all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad input: malformed config, violated precondition, unstable trap parameters.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Something went wrong inside a numerical stage.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class SingularConfigurationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class ConvergenceError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Minimizer stopped on a stationary point whose Hessian has a negative direction.
class SaddlePointError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Imaginary mode frequency (axial or in-plane).
class InstabilityError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Zero planar frequency where none is expected (rotating wall on).
class DegenerateModeError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class ResonanceError : public NumericalError {
 public:
  ResonanceError(const std::string& what, int mode) : NumericalError(what), mode_(mode) {}
  int mode() const noexcept { return mode_; }

 private:
  int mode_;
};

class DefectPlacementError : public NumericalError {
 public:
  DefectPlacementError(const std::string& what, int step) : NumericalError(what), step_(step) {}
  int step() const noexcept { return step_; }

 private:
  int step_;
};

}  // namespace penning
