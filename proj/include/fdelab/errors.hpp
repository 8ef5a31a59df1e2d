#pragma once

#include <stdexcept>
#include <string>

namespace fdelab {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid grid or run configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A caller broke an operation's precondition (grid mismatch, missing
// Dirichlet tag, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Physical/model parameters outside the admissible range (p <= 1, b >= lambda_1).
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Evaluation outside the time/space domain of a closed-form object.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Too little data to estimate a derived quantity.
class EstimationError : public Error {
 public:
  using Error::Error;
};

// Initial-data factory produced a non-positive profile.
class ConstructionError : public Error {
 public:
  using Error::Error;
};

// Iterative solver failed; `last_residual` is the residual at the point of failure.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, double last_residual)
      : Error(what), last_residual_(last_residual) {}
  double last_residual() const noexcept { return last_residual_; }

 private:
  double last_residual_;
};

}  // namespace fdelab
