#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace nlacoustic {

enum class ErrorKind {
  NonPositiveExtent,
  ShapeMismatch,
  EmptyInput,
  InvalidInterval,
  InfeasibleConstraints,
  NonDegeneracyViolated,
  InnerIterationDiverged,
  RangeExceeded,
  InvalidAlpha,
  OutOfDomain,
  InfeasibleSlopeConstraint,
  TooFewSamples,
  DerivativeUnavailable,
  DerivativeTooSmall,
  DegenerateRange,
  SingularWeightSystem,
  SingularNormalEquations,
  NonMonotoneEta,
  EmptyWindow,
  InvalidConfig,
  Io,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NonPositiveExtent: return "NonPositiveExtent";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::InvalidInterval: return "InvalidInterval";
    case ErrorKind::InfeasibleConstraints: return "InfeasibleConstraints";
    case ErrorKind::NonDegeneracyViolated: return "NonDegeneracyViolated";
    case ErrorKind::InnerIterationDiverged: return "InnerIterationDiverged";
    case ErrorKind::RangeExceeded: return "RangeExceeded";
    case ErrorKind::InvalidAlpha: return "InvalidAlpha";
    case ErrorKind::OutOfDomain: return "OutOfDomain";
    case ErrorKind::InfeasibleSlopeConstraint: return "InfeasibleSlopeConstraint";
    case ErrorKind::TooFewSamples: return "TooFewSamples";
    case ErrorKind::DerivativeUnavailable: return "DerivativeUnavailable";
    case ErrorKind::DerivativeTooSmall: return "DerivativeTooSmall";
    case ErrorKind::DegenerateRange: return "DegenerateRange";
    case ErrorKind::SingularWeightSystem: return "SingularWeightSystem";
    case ErrorKind::SingularNormalEquations: return "SingularNormalEquations";
    case ErrorKind::NonMonotoneEta: return "NonMonotoneEta";
    case ErrorKind::EmptyWindow: return "EmptyWindow";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

/// Exception carrying a machine-checkable kind next to the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  /// Usage/configuration problems map to exit code 2, everything else to 1.
  bool is_usage_error() const noexcept {
    return kind_ == ErrorKind::InvalidConfig || kind_ == ErrorKind::Io;
  }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace nlacoustic
