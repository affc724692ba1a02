#pragma once

#include <stdexcept>
#include <string>

namespace mplex {

// Root of every error thrown by the library. Infeasibility of a certificate
// or a synthesis run is reported as data, never through these types.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes do not conform (non-square input, partition mismatch, ...).
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A value lies outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

// The delayed rate equation has no positive root (sigma_bar <= sigma_under).
class InfeasibleRateError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent network model.
class ModelError : public Error {
 public:
  using Error::Error;
};

// A delayed lookup reaches before the stored history.
class HistoryUnderflowError : public Error {
 public:
  using Error::Error;
};

// A delay channel produced a value outside (0, tau_max].
class ScheduleError : public Error {
 public:
  using Error::Error;
};

// Singular or ill-conditioned coordinate transformation.
class TransformError : public Error {
 public:
  using Error::Error;
};

// An ISS envelope was requested from an infeasible certificate.
class EnvelopeError : public Error {
 public:
  using Error::Error;
};

// Invalid solver or simulation configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Input file could not be parsed; the message carries location context.
class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace mplex
