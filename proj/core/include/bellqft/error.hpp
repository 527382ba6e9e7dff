#pragma once

#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace bellqft {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user input or a state that violates a documented precondition.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Problem size exceeds what the selected method supports.
class DimensionError : public Error {
 public:
  using Error::Error;
};

class SolverError : public Error {
 public:
  using Error::Error;
};

/// Raised by sample_jump when rate * dt exceeds the first-order guard.
class StepSizeError : public Error {
 public:
  StepSizeError(const std::string& what, double total_rate, double dt)
      : Error(what), total_rate(total_rate), dt(dt) {}

  double total_rate;
  double dt;
};

/// The configuration sits on (or numerically at) a node of the wavefunction,
/// so velocities and jump rates are undefined there.
class NodeError : public Error {
 public:
  explicit NodeError(const std::string& what) : Error(what) {}
  NodeError(const std::string& what, double time, std::vector<double> positions)
      : Error(what), time(time), positions(std::move(positions)) {}

  double time = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> positions;
};

}  // namespace bellqft
