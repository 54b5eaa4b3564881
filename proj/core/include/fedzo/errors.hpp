#pragma once

#include <stdexcept>
#include <string>

namespace fedzo {

/// Invalid configuration: bad compressor parameters, malformed sweeps,
/// nonpositive constants, dimension mismatches.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Non-finite values encountered while evaluating a loss or an update.
/// Carries the step (and agent, when applicable) where it happened.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, int step, int agent = -1)
      : std::runtime_error(what), step(step), agent(agent) {}
  int step;
  int agent;
};

/// Iterate escaped the divergence guard (norm above the configured bound).
/// Runs that throw this are recorded as failed seeds, not aborted experiments.
class DivergenceError : public NumericalError {
 public:
  DivergenceError(const std::string& what, int step, int agent = -1)
      : NumericalError(what, step, agent) {}
};

/// Filesystem problems while emitting results; message includes the path.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace fedzo
