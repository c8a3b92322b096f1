#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cond {

enum class ErrorCode {
  kInvalidArgument,
  kNotPositiveDefinite,
  kCapacity,
  kInvalidState,
  kDegenerateConstraint,
  kInvalidMatrix,
  kInvariantViolation,
  kDivergence,
  kNumeric,
  kValidation,
  kIo,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Raised by the velocity fixed-point iteration when an iterate stops being
/// finite. Carries the residual history up to the failure.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::vector<double> trace)
      : Error(ErrorCode::kDivergence, what), trace_(std::move(trace)) {}

  const std::vector<double>& trace() const noexcept { return trace_; }

 private:
  std::vector<double> trace_;
};

}  // namespace cond
