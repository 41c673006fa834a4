#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tsr {

enum class ErrorCode {
  InvalidPartitionSize,
  InvalidSample,
  DimensionMismatch,
  InvalidStabilityInput,
  ZeroDegreeVertex,
  NotSymmetric,
  ZeroConstraintVector,
  GraphDisconnected,
  ZeroRowSum,
  SingularSystem,
  ConstraintSpansNullSpace,
  PseudoTargetUnavailable,
  NotPSDKernel,
  NotInRange,
  InvalidProblem,
  BoundDiverges,
  EmptyNeighborhood,
  InvalidInstance,
  InvalidConfidence,
  ParseError,
  ZeroVarianceFeature,
  NoFeasibleRadius,
  NoSweepData,
  IoError,
  InvalidConfig,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidPartitionSize: return "InvalidPartitionSize";
    case ErrorCode::InvalidSample: return "InvalidSample";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidStabilityInput: return "InvalidStabilityInput";
    case ErrorCode::ZeroDegreeVertex: return "ZeroDegreeVertex";
    case ErrorCode::NotSymmetric: return "NotSymmetric";
    case ErrorCode::ZeroConstraintVector: return "ZeroConstraintVector";
    case ErrorCode::GraphDisconnected: return "GraphDisconnected";
    case ErrorCode::ZeroRowSum: return "ZeroRowSum";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::ConstraintSpansNullSpace: return "ConstraintSpansNullSpace";
    case ErrorCode::PseudoTargetUnavailable: return "PseudoTargetUnavailable";
    case ErrorCode::NotPSDKernel: return "NotPSDKernel";
    case ErrorCode::NotInRange: return "NotInRange";
    case ErrorCode::InvalidProblem: return "InvalidProblem";
    case ErrorCode::BoundDiverges: return "BoundDiverges";
    case ErrorCode::EmptyNeighborhood: return "EmptyNeighborhood";
    case ErrorCode::InvalidInstance: return "InvalidInstance";
    case ErrorCode::InvalidConfidence: return "InvalidConfidence";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ZeroVarianceFeature: return "ZeroVarianceFeature";
    case ErrorCode::NoFeasibleRadius: return "NoFeasibleRadius";
    case ErrorCode::NoSweepData: return "NoSweepData";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// that callers (the CLI in particular) can map it to an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

namespace detail {

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) throw Error(code, what);
}

}  // namespace detail

}  // namespace tsr
