#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace mfkit {

/// Invalid configuration (bad grid, missing callables, out-of-range values).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid mathematical input (dimension mismatch, empty atom set, ...).
class DomainError : public std::runtime_error {
 public:
  explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

/// Atom sets that defeat an estimator (e.g. all-duplicate points).
class DegenerateInputError : public std::runtime_error {
 public:
  explicit DegenerateInputError(const std::string& what) : std::runtime_error(what) {}
};

/// Non-finite cost or coefficient value during evaluation.
class EvaluationError : public std::runtime_error {
 public:
  explicit EvaluationError(const std::string& what) : std::runtime_error(what) {}
};

/// Non-finite state during time stepping, with the offending cell.
class SimulationError : public std::runtime_error {
 public:
  SimulationError(const std::string& what, int scenario, int particle, int step)
      : std::runtime_error(what), scenario(scenario), particle(particle), step(step) {}
  int scenario;
  int particle;
  int step;
};

/// Optimizer divergence; carries the cost trace up to the failure.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, std::vector<double> trace)
      : std::runtime_error(what), trace(std::move(trace)) {}
  std::vector<double> trace;
};

}  // namespace mfkit
