#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace decept {

enum class ErrorKind {
  RowNotStochastic,
  EmptyActionSet,
  UnknownState,
  UnknownAction,
  PolicyMismatch,
  NonAbsorbingTarget,
  InfiniteOccupancy,
  NegativeEntry,
  OutOfRange,
  InvalidParams,
  InvalidGraph,
  UnreachableTarget,
  SolverFailure,
  Infeasible,
  TargetUnattainable,
  UpperBoundNotFeasible,
  AllFailed,
  TruncatedPath,
  TooManyAgents,
  KappaTooLarge,
  InfiniteLLR,
  InfeasibleSupervisorTask,
  MissingField,
  ParseError,
  SeedMissing,
  Io,
};

std::string_view to_string(ErrorKind kind);

/// Single exception type for the library; `kind()` carries the failure class.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace decept
