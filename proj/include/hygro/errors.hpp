#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace hygro {

/// Argument outside the validated range of a closure (e.g. temperature, phi <= 0).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Material or interface parameters violating their invariants.
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Degenerate geometry or inconsistent mesh topology.
class MeshError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed configuration or input file.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical failure: Newton divergence, singular factorization, step rejection.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, std::vector<double> residual_history = {})
      : std::runtime_error(what), history_(std::move(residual_history)) {}

  const std::vector<double>& residual_history() const noexcept { return history_; }

 private:
  std::vector<double> history_;
};

/// Signals that the current Newton step must be rejected (dt halving).
class StepRejected : public SolverError {
 public:
  using SolverError::SolverError;
};

}  // namespace hygro
