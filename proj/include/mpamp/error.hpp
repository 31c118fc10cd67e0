#pragma once

#include <stdexcept>
#include <string>

namespace mpamp {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid model or algorithm parameter.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Row partition impossible (M not divisible by P).
class PartitionError : public Error {
 public:
  using Error::Error;
};

/// Non-finite or otherwise unusable input value.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Quadrature or iteration failed to produce a usable number.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Iteration cap reached before convergence.
class ConvergenceError : public NumericalError {
 public:
  ConvergenceError(const std::string& what, double last_rate, double last_distortion)
      : NumericalError(what), last_rate_(last_rate), last_distortion_(last_distortion) {}
  double last_rate() const { return last_rate_; }
  double last_distortion() const { return last_distortion_; }

 private:
  double last_rate_;
  double last_distortion_;
};

/// Argument outside the domain a table or search covers.
class RangeError : public Error {
 public:
  using Error::Error;
};

/// Coded block produced under a different quantizer spec.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

/// Coded payload is malformed.
class DecodeError : public Error {
 public:
  using Error::Error;
};

/// Experiment configuration rejected; message names the offending field.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace mpamp
