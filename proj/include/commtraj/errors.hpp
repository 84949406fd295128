#pragma once

#include <stdexcept>
#include <string>

namespace commtraj {

// Base for every error raised by the library. The CLI maps the concrete
// subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input outside the documented domain (non-positive mass, t < 0, ...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

// A Gramian or normal matrix is too ill-conditioned to trust the solve.
class ConditioningError : public Error {
 public:
  using Error::Error;
};

// Internal cross-check failed (e.g. thresholds not strictly increasing).
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class PlanningError : public Error {
 public:
  using Error::Error;
};

// Raised by the nonlinear validator when the attitude leaves the safe cone.
class ValidationError : public Error {
 public:
  ValidationError(const std::string& what, double time)
      : Error(what), time_(time) {}
  double time() const { return time_; }

 private:
  double time_;
};

}  // namespace commtraj
