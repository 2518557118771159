#include "decept/error.hpp"

namespace decept {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::RowNotStochastic: return "RowNotStochastic";
    case ErrorKind::EmptyActionSet: return "EmptyActionSet";
    case ErrorKind::UnknownState: return "UnknownState";
    case ErrorKind::UnknownAction: return "UnknownAction";
    case ErrorKind::PolicyMismatch: return "PolicyMismatch";
    case ErrorKind::NonAbsorbingTarget: return "NonAbsorbingTarget";
    case ErrorKind::InfiniteOccupancy: return "InfiniteOccupancy";
    case ErrorKind::NegativeEntry: return "NegativeEntry";
    case ErrorKind::OutOfRange: return "OutOfRange";
    case ErrorKind::InvalidParams: return "InvalidParams";
    case ErrorKind::InvalidGraph: return "InvalidGraph";
    case ErrorKind::UnreachableTarget: return "UnreachableTarget";
    case ErrorKind::SolverFailure: return "SolverFailure";
    case ErrorKind::Infeasible: return "Infeasible";
    case ErrorKind::TargetUnattainable: return "TargetUnattainable";
    case ErrorKind::UpperBoundNotFeasible: return "UpperBoundNotFeasible";
    case ErrorKind::AllFailed: return "AllFailed";
    case ErrorKind::TruncatedPath: return "TruncatedPath";
    case ErrorKind::TooManyAgents: return "TooManyAgents";
    case ErrorKind::KappaTooLarge: return "KappaTooLarge";
    case ErrorKind::InfiniteLLR: return "InfiniteLLR";
    case ErrorKind::InfeasibleSupervisorTask: return "InfeasibleSupervisorTask";
    case ErrorKind::MissingField: return "MissingField";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::SeedMissing: return "SeedMissing";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

}  // namespace decept
