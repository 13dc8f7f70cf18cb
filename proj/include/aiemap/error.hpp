#pragma once

#include <stdexcept>
#include <string>

namespace aiemap {

// Argument outside the mathematical domain of an operation (bad coordinate,
// zero matrix dimension, empty search set, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Malformed or missing configuration: device files, profile files, CLI flags.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A well-formed request with no solution (empty feasible set, no legal tiling,
// bank overflow). Carries free-form diagnostics for the caller.
class InfeasibleError : public std::runtime_error {
 public:
  explicit InfeasibleError(const std::string& what, std::string diagnostics = {})
      : std::runtime_error(what), diagnostics_(std::move(diagnostics)) {}

  const std::string& diagnostics() const noexcept { return diagnostics_; }

 private:
  std::string diagnostics_;
};

class CalibrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Simulation stalled before reaching its horizon.
class DeadlockError : public std::runtime_error {
 public:
  explicit DeadlockError(const std::string& what, std::string blocked = {})
      : std::runtime_error(what), blocked_(std::move(blocked)) {}

  const std::string& blocked_nodes() const noexcept { return blocked_; }

 private:
  std::string blocked_;
};

}  // namespace aiemap
