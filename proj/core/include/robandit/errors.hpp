#pragma once

#include <stdexcept>
#include <string>

namespace robandit {

// Dimension mismatches and out-of-range indices use std::invalid_argument.

/// Operation called before its inputs are usable (empty log, too few records).
class InvalidState : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input data violates a documented contract (zero propensity, non-finite value,
/// reward outside [-1, 1]).
class InvalidData : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class OptimizationFailed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The bread matrix of a sandwich estimate is too ill-conditioned to invert.
class InferenceUnavailable : public std::runtime_error {
 public:
  InferenceUnavailable(const std::string& what, double condition_number)
      : std::runtime_error(what), condition_number_(condition_number) {}

  double condition_number() const noexcept { return condition_number_; }

 private:
  double condition_number_;
};

class FitFailed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Replay cannot stay unbiased (observed ratio above the rejection bound).
class EvaluationInvalid : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace robandit
