#include "rigcal/errors.hpp"

namespace rigcal {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument:
      return "InvalidArgument";
    case ErrorCode::ParseError:
      return "ParseError";
    case ErrorCode::IoFailure:
      return "IoFailure";
    case ErrorCode::BehindCamera:
      return "BehindCamera";
    case ErrorCode::NoConvergence:
      return "NoConvergence";
    case ErrorCode::DegenerateDirections:
      return "DegenerateDirections";
    case ErrorCode::DegenerateGeometry:
      return "DegenerateGeometry";
    case ErrorCode::InsufficientViews:
      return "InsufficientViews";
    case ErrorCode::DisconnectedGraph:
      return "DisconnectedGraph";
    case ErrorCode::NumericalFailure:
      return "NumericalFailure";
    case ErrorCode::NonMonotonicTimestamps:
      return "NonMonotonicTimestamps";
    case ErrorCode::EmptyStream:
      return "EmptyStream";
    case ErrorCode::NoConsensus:
      return "NoConsensus";
    case ErrorCode::RankDeficientNormals:
      return "RankDeficientNormals";
    case ErrorCode::FrameMismatch:
      return "FrameMismatch";
  }
  return "Unknown";
}

bool is_solver_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::BehindCamera:
    case ErrorCode::NoConvergence:
    case ErrorCode::DegenerateDirections:
    case ErrorCode::DegenerateGeometry:
    case ErrorCode::InsufficientViews:
    case ErrorCode::DisconnectedGraph:
    case ErrorCode::NumericalFailure:
    case ErrorCode::NoConsensus:
    case ErrorCode::RankDeficientNormals:
      return true;
    default:
      return false;
  }
}

}  // namespace rigcal
