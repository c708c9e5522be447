#pragma once

#include <stdexcept>
#include <string>

namespace kppw {

enum class ErrorCode {
  InvalidInput,
  NotIrreducible,
  NonConvergence,
  SingularMatrix,
  BracketFailure,
  DiagnosticMismatch,
  NoRealRoots,
  SingularC,
  NonPositiveLambdaA,
  HypothesisViolated,
  StepTooLarge,
  IntervalOutOfRange,
  StepFailure,
  CapExceeded,
  InsufficientSamples,
  EdgeWindowEmpty,
  UnknownPreset,
  ParseError,
  ValidationError,
  IoError,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::NotIrreducible: return "NotIrreducible";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::SingularMatrix: return "SingularMatrix";
    case ErrorCode::BracketFailure: return "BracketFailure";
    case ErrorCode::DiagnosticMismatch: return "DiagnosticMismatch";
    case ErrorCode::NoRealRoots: return "NoRealRoots";
    case ErrorCode::SingularC: return "SingularC";
    case ErrorCode::NonPositiveLambdaA: return "NonPositiveLambdaA";
    case ErrorCode::HypothesisViolated: return "HypothesisViolated";
    case ErrorCode::StepTooLarge: return "StepTooLarge";
    case ErrorCode::IntervalOutOfRange: return "IntervalOutOfRange";
    case ErrorCode::StepFailure: return "StepFailure";
    case ErrorCode::CapExceeded: return "CapExceeded";
    case ErrorCode::InsufficientSamples: return "InsufficientSamples";
    case ErrorCode::EdgeWindowEmpty: return "EdgeWindowEmpty";
    case ErrorCode::UnknownPreset: return "UnknownPreset";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ValidationError: return "ValidationError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace kppw
