#pragma once

#include <stdexcept>
#include <string>

namespace rigcal {

/// Failure categories reported by the library. CLI exit codes and the
/// machine-readable error output are derived from these.
enum class ErrorCode {
  InvalidArgument,
  ParseError,
  IoFailure,
  BehindCamera,
  NoConvergence,
  DegenerateDirections,
  DegenerateGeometry,
  InsufficientViews,
  DisconnectedGraph,
  NumericalFailure,
  NonMonotonicTimestamps,
  EmptyStream,
  NoConsensus,
  RankDeficientNormals,
  FrameMismatch,
};

const char* error_code_name(ErrorCode code);

/// True for codes that indicate bad solver geometry or failed optimization
/// (as opposed to malformed input).
bool is_solver_error(ErrorCode code);

class CalibError : public std::runtime_error {
 public:
  CalibError(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void throw_error(ErrorCode code, const std::string& message) {
  throw CalibError(code, message);
}

}  // namespace rigcal
