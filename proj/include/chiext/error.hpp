#pragma once

#include <cstddef>
#include <exception>
#include <stdexcept>
#include <string>
#include <utility>

namespace chiext {

// Base of every error raised by the library. The CLI maps ConfigError (and
// its subclasses) to exit code 2 and NumericError (and subclasses) to 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "error"; }
};

class ConfigError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "config"; }
};

// Parameter combination that the model does not define (e.g. k=0 with
// kappa<1 for the limit process, or |r| = 1 at a positive lag).
class DegenerateError : public ConfigError {
 public:
  using ConfigError::ConfigError;
  const char* kind() const noexcept override { return "degenerate"; }
};

class OutOfRangeError : public ConfigError {
 public:
  using ConfigError::ConfigError;
  const char* kind() const noexcept override { return "out_of_range"; }
};

class NumericError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "numeric"; }
};

class NonEmbeddableError : public NumericError {
 public:
  NonEmbeddableError(double min_eigenvalue, double clip_mass)
      : NumericError("covariance is not embeddable: min eigenvalue " +
                     std::to_string(min_eigenvalue) + ", negative mass " +
                     std::to_string(clip_mass)),
        min_eigenvalue_(min_eigenvalue),
        clip_mass_(clip_mass) {}
  const char* kind() const noexcept override { return "non_embeddable"; }
  double min_eigenvalue() const noexcept { return min_eigenvalue_; }
  double clip_mass() const noexcept { return clip_mass_; }

 private:
  double min_eigenvalue_;
  double clip_mass_;
};

class InfeasibleError : public NumericError {
 public:
  using NumericError::NumericError;
  const char* kind() const noexcept override { return "infeasible"; }
};

// Wraps a failure raised inside one replication; cause() rethrows the
// original exception so callers can still dispatch on its type.
class ReplicationError : public Error {
 public:
  ReplicationError(std::size_t index, const std::string& what,
                   std::exception_ptr cause)
      : Error("replication " + std::to_string(index) + ": " + what),
        index_(index),
        cause_(std::move(cause)) {}
  const char* kind() const noexcept override { return "replication"; }
  std::size_t index() const noexcept { return index_; }
  const std::exception_ptr& cause() const noexcept { return cause_; }

 private:
  std::size_t index_;
  std::exception_ptr cause_;
};

}  // namespace chiext
