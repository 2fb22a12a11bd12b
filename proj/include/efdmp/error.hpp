// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <stdexcept>
#include <string>

namespace efdmp {

enum class ErrorKind {
  ZeroVariance,
  TooShort,
  InvalidData,
  InvalidConfig,
  NotPositiveDefinite,
  DimensionMismatch,
  OutOfSupport,
  InconsistentState,
  NonFiniteLogWeight,
  NonFiniteElbo,
  SingularSystem,
  LengthMismatch,
  MissingVolumes,
  Io,
  Parse,
};

const char* to_string(ErrorKind kind);

// All library failures are reported through this exception; kind() lets
// callers (and tests) branch on the failure class without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

  // Message without the kind prefix, for re-wrapping with more context.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

}  // namespace efdmp
