#pragma once

#include <stdexcept>
#include <string>

namespace confex {

enum class ErrorCode {
  // data
  MissingColumn,
  NonBinaryExposure,
  NonBinaryOutcome,
  DegenerateExposure,
  DegenerateColumn,
  IncompleteRow,
  ParseError,
  IoFailure,
  // argument validation
  InvalidArgument,
  DimensionMismatch,
  LengthMismatch,
  // numerics
  NonConvergence,
  SeparationDetected,
  RankDeficient,
  CovarianceNotPSD,
  ModelFitFailed,
  TooManyKnots,
  DegenerateX,
  StudyAborted,
};

const char* to_string(ErrorCode code) noexcept;

// True for codes that describe bad input data rather than a numerical failure.
bool is_data_error(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace confex
