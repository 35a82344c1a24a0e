#pragma once

#include <stdexcept>
#include <string>

namespace nmjump {

// Base class for everything this library throws on purpose.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Bad or inconsistent input data (non-Hermitian where Hermitian is required,
// malformed model files, out-of-range configuration values, ...).
class ValidationError : public Error {
public:
  using Error::Error;
};

// The operator handed to the PSD square root has an eigenvalue below the
// clamping window, i.e. the a >= ||(C-D)psi||^2 inequality was violated.
class PsdError : public Error {
public:
  using Error::Error;
};

// Adaptive integration or root finding could not reach the requested
// accuracy (step-size underflow, lost bracket).
class IntegrationError : public Error {
public:
  using Error::Error;
};

// The excited-state amplitude c(t) hit zero: the time-local rates diverge
// there and the generator cannot be evaluated past that point.
class AmplitudeZeroError : public Error {
public:
  using Error::Error;
};

// A solver produced results that fail its own accuracy diagnostics
// (trace drift, denominator underflow in the W12 extraction, ...).
class AccuracyError : public Error {
public:
  using Error::Error;
};

// The Monte Carlo ratio estimator became ill-conditioned: the mean of
// <psi2|psi1> fell below the underflow floor.
class EstimatorError : public Error {
public:
  using Error::Error;
};

}  // namespace nmjump
