#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace condense {

enum class ErrorCode {
  ZeroInverse,
  InvalidField,
  DimensionMismatch,
  CycleDetected,
  RoleConflict,
  DanglingReference,
  DuplicateArc,
  TreeViolation,
  NotADestination,
  ArityMismatch,
  DomainMismatch,
  DomainError,
  MissingAssignment,
  NotATree,
  InconsistentDimensions,
  CapExceeded,
  MismatchedScenarios,
  InvalidScenario,
};

std::string_view to_string(ErrorCode code) noexcept;

// Every library failure carries a code so callers (the CLI in particular)
// can map it onto exit statuses without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace condense
