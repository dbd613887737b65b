#include "nvsim/error.hpp"

namespace nvsim {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::SlotOverflow: return "SlotOverflow";
    case ErrorCode::DlmRequiresDram: return "DlmRequiresDram";
    case ErrorCode::NonPositiveParameter: return "NonPositiveParameter";
    case ErrorCode::DuplicateNodeId: return "DuplicateNodeId";
    case ErrorCode::HeterogeneousCluster: return "HeterogeneousCluster";
    case ErrorCode::NodeBusy: return "NodeBusy";
    case ErrorCode::HitRateOutOfRange: return "HitRateOutOfRange";
    case ErrorCode::InfeasibleRequest: return "InfeasibleRequest";
    case ErrorCode::CyclicWorkflow: return "CyclicWorkflow";
    case ErrorCode::InsufficientCapacity: return "InsufficientCapacity";
    case ErrorCode::UnknownDataset: return "UnknownDataset";
    case ErrorCode::AccessDenied: return "AccessDenied";
    case ErrorCode::TierFull: return "TierFull";
    case ErrorCode::MemberWithoutBapm: return "MemberWithoutBapm";
    case ErrorCode::EventInPast: return "EventInPast";
    case ErrorCode::SyntaxError: return "SyntaxError";
    case ErrorCode::UnitError: return "UnitError";
    case ErrorCode::OrderingViolation: return "OrderingViolation";
    case ErrorCode::InvariantViolation: return "InvariantViolation";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

SimError::SimError(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

}  // namespace nvsim
