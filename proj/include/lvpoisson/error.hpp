#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lvp {

enum class ErrorKind {
  InvalidArgument,
  NotAntisymmetric,
  NoPositiveFixedPoint,
  DomainError,
  StageDivergence,
  StepUnderflow,
  SingularFormula,
  NoConvergence,
  SingularReduced,
  ContinuationStall,
  NotFound,
  MissingArtifact,
  ParseError,
  ValidationError,
  FormatError,
  IoError,
};

constexpr std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::NotAntisymmetric: return "NotAntisymmetric";
    case ErrorKind::NoPositiveFixedPoint: return "NoPositiveFixedPoint";
    case ErrorKind::DomainError: return "DomainError";
    case ErrorKind::StageDivergence: return "StageDivergence";
    case ErrorKind::StepUnderflow: return "StepUnderflow";
    case ErrorKind::SingularFormula: return "SingularFormula";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::SingularReduced: return "SingularReduced";
    case ErrorKind::ContinuationStall: return "ContinuationStall";
    case ErrorKind::NotFound: return "NotFound";
    case ErrorKind::MissingArtifact: return "MissingArtifact";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::ValidationError: return "ValidationError";
    case ErrorKind::FormatError: return "FormatError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

/// Single exception type for the library; callers branch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind), message_(what) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& message() const noexcept { return message_; }

  /// Same kind, message prefixed with context.
  Error with_context(const std::string& context) const { return Error(kind_, context + ": " + message_); }

 private:
  ErrorKind kind_;
  std::string message_;
};

}  // namespace lvp
