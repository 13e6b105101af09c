#pragma once

#include <stdexcept>
#include <string>

namespace chebtt {

// Evaluation point lies outside the tensor's domain box. Callers that want
// clamping or fallback behaviour must opt in at their own layer.
class OutOfDomainError : public std::runtime_error {
 public:
  explicit OutOfDomainError(const std::string& what) : std::runtime_error(what) {}
};

// A grid evaluation produced a non-finite value; the message carries the
// offending multi-index.
class BuildError : public std::runtime_error {
 public:
  explicit BuildError(const std::string& what) : std::runtime_error(what) {}
};

// Implied-vol inversion has no solution: the target price violates the
// no-arbitrage band. lower/upper carry the band that was violated.
class NoSolutionError : public std::runtime_error {
 public:
  NoSolutionError(const std::string& what, double lower, double upper)
      : std::runtime_error(what), lower_bound(lower), upper_bound(upper) {}
  double lower_bound;
  double upper_bound;
};

// Covariance assembly or factorization failed (should not happen for valid
// parameters; kept distinct so the CLI can map it to a numerical-failure exit).
class SimulationError : public std::runtime_error {
 public:
  explicit SimulationError(const std::string& what) : std::runtime_error(what) {}
};

// Invalid configuration or malformed input file.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Tensor completion broke down numerically (non-finite loss); the message
// carries the stage and iteration for diagnosis.
class CompletionError : public std::runtime_error {
 public:
  explicit CompletionError(const std::string& what) : std::runtime_error(what) {}
};

// An iterative solver exhausted its iteration budget without meeting its
// tolerance. Distinct from NoSolutionError: a root exists but was not reached.
class SolverError : public std::runtime_error {
 public:
  explicit SolverError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace chebtt
