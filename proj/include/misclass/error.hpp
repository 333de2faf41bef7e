#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace misclass {

// Base of every error raised by the library. The C API maps the concrete
// subclass onto an mc_status code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent user input (files, configuration, site data).
class InputError : public Error {
 public:
  using Error::Error;
};

// Factorization or other floating-point failure. Carries a diagnostic such as
// a condition estimate when one is available.
class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, double diagnostic)
      : Error(what), diagnostic_(diagnostic) {}
  explicit NumericalError(const std::string& what) : Error(what) {}
  double diagnostic() const noexcept { return diagnostic_; }

 private:
  double diagnostic_ = 0.0;
};

// Truncation interval carries (numerically) no probability mass.
class DegenerateSupportError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// No shape in the search bracket satisfies the percentile constraint.
class ElicitationInfeasibleError : public InputError {
 public:
  ElicitationInfeasibleError(const std::string& what, double best_residual)
      : InputError(what), best_residual_(best_residual) {}
  double best_residual() const noexcept { return best_residual_; }

 private:
  double best_residual_;
};

// Count correction left a site with no eligible participants.
class SiteDegenerateError : public NumericalError {
 public:
  SiteDegenerateError(const std::string& what, std::string site_id)
      : NumericalError(what), site_id_(std::move(site_id)) {}
  const std::string& site_id() const noexcept { return site_id_; }

 private:
  std::string site_id_;
};

// Convergence diagnostic is not defined for the supplied chains.
class DiagnosticUndefinedError : public DomainError {
 public:
  using DomainError::DomainError;
};

}  // namespace misclass
