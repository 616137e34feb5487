#include "confex/error.hpp"

namespace confex {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::NonBinaryExposure: return "NonBinaryExposure";
    case ErrorCode::NonBinaryOutcome: return "NonBinaryOutcome";
    case ErrorCode::DegenerateExposure: return "DegenerateExposure";
    case ErrorCode::DegenerateColumn: return "DegenerateColumn";
    case ErrorCode::IncompleteRow: return "IncompleteRow";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::SeparationDetected: return "SeparationDetected";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::CovarianceNotPSD: return "CovarianceNotPSD";
    case ErrorCode::ModelFitFailed: return "ModelFitFailed";
    case ErrorCode::TooManyKnots: return "TooManyKnots";
    case ErrorCode::DegenerateX: return "DegenerateX";
    case ErrorCode::StudyAborted: return "StudyAborted";
  }
  return "Unknown";
}

bool is_data_error(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MissingColumn:
    case ErrorCode::NonBinaryExposure:
    case ErrorCode::NonBinaryOutcome:
    case ErrorCode::DegenerateExposure:
    case ErrorCode::DegenerateColumn:
    case ErrorCode::IncompleteRow:
    case ErrorCode::ParseError:
    case ErrorCode::IoFailure:
      return true;
    default:
      return false;
  }
}

}  // namespace confex
