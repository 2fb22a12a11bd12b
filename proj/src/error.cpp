// Apache License, Version 2.0, refer to LICENSE.txt

#include "efdmp/error.hpp"

namespace efdmp {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ZeroVariance: return "ZeroVariance";
    case ErrorKind::TooShort: return "TooShort";
    case ErrorKind::InvalidData: return "InvalidData";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::OutOfSupport: return "OutOfSupport";
    case ErrorKind::InconsistentState: return "InconsistentState";
    case ErrorKind::NonFiniteLogWeight: return "NonFiniteLogWeight";
    case ErrorKind::NonFiniteElbo: return "NonFiniteElbo";
    case ErrorKind::SingularSystem: return "SingularSystem";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::MissingVolumes: return "MissingVolumes";
    case ErrorKind::Io: return "Io";
    case ErrorKind::Parse: return "Parse";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind), detail_(message) {}

}  // namespace efdmp
