#include "cqsim/errors.hpp"

namespace cqsim {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::MissingFile: return "MissingFile";
    case ErrorKind::SchemaViolation: return "SchemaViolation";
    case ErrorKind::InvariantViolation: return "InvariantViolation";
    case ErrorKind::DomainError: return "DomainError";
    case ErrorKind::IOError: return "IOError";
    case ErrorKind::InfeasibleAllocation: return "InfeasibleAllocation";
    case ErrorKind::UnknownQueryId: return "UnknownQueryId";
    case ErrorKind::UnresolvedPlaceholder: return "UnresolvedPlaceholder";
    case ErrorKind::StoreRegistryMismatch: return "StoreRegistryMismatch";
    case ErrorKind::BindFailure: return "BindFailure";
  }
  return "Error";
}

bool Error::is_validation() const noexcept {
  switch (kind_) {
    case ErrorKind::MissingFile:
    case ErrorKind::SchemaViolation:
    case ErrorKind::InvariantViolation:
    case ErrorKind::DomainError:
    case ErrorKind::UnknownQueryId:
    case ErrorKind::UnresolvedPlaceholder:
    case ErrorKind::StoreRegistryMismatch:
      return true;
    default:
      return false;
  }
}

}  // namespace cqsim
