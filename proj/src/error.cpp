#include "condense/error.hpp"

namespace condense {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::ZeroInverse: return "ZeroInverse";
    case ErrorCode::InvalidField: return "InvalidField";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::CycleDetected: return "CycleDetected";
    case ErrorCode::RoleConflict: return "RoleConflict";
    case ErrorCode::DanglingReference: return "DanglingReference";
    case ErrorCode::DuplicateArc: return "DuplicateArc";
    case ErrorCode::TreeViolation: return "TreeViolation";
    case ErrorCode::NotADestination: return "NotADestination";
    case ErrorCode::ArityMismatch: return "ArityMismatch";
    case ErrorCode::DomainMismatch: return "DomainMismatch";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::MissingAssignment: return "MissingAssignment";
    case ErrorCode::NotATree: return "NotATree";
    case ErrorCode::InconsistentDimensions: return "InconsistentDimensions";
    case ErrorCode::CapExceeded: return "CapExceeded";
    case ErrorCode::MismatchedScenarios: return "MismatchedScenarios";
    case ErrorCode::InvalidScenario: return "InvalidScenario";
  }
  return "Unknown";
}

}  // namespace condense
