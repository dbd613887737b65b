#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace nvsim {

enum class ErrorCode {
  SlotOverflow,
  DlmRequiresDram,
  NonPositiveParameter,
  DuplicateNodeId,
  HeterogeneousCluster,
  NodeBusy,
  HitRateOutOfRange,
  InfeasibleRequest,
  CyclicWorkflow,
  InsufficientCapacity,
  UnknownDataset,
  AccessDenied,
  TierFull,
  MemberWithoutBapm,
  EventInPast,
  SyntaxError,
  UnitError,
  OrderingViolation,
  InvariantViolation,
  InvalidArgument,
};

std::string_view to_string(ErrorCode code);

/// Error raised by every fallible nvsim operation. The code is stable and is
/// what callers (and the CLI exit-code mapping) dispatch on; the message is
/// for humans and carries field paths or ids where they exist.
class SimError : public std::runtime_error {
 public:
  SimError(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace nvsim
