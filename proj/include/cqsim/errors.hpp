#pragma once

#include <stdexcept>
#include <string>

namespace cqsim {

enum class ErrorKind {
  MissingFile,
  SchemaViolation,
  InvariantViolation,
  DomainError,
  IOError,
  InfeasibleAllocation,
  UnknownQueryId,
  UnresolvedPlaceholder,
  StoreRegistryMismatch,
  BindFailure,
};

const char* to_string(ErrorKind kind) noexcept;

/// Every failure raised by the library carries one of the kinds above so the
/// CLI can map it onto an exit code without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  /// True for failures caused by bad input (flags, files, configs) rather than
  /// by the environment.
  bool is_validation() const noexcept;

 private:
  ErrorKind kind_;
};

}  // namespace cqsim
