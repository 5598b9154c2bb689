#include "bpl/errors.hpp"

namespace bpl {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::AllZero: return "AllZero";
    case ErrorKind::NegativeDensity: return "NegativeDensity";
    case ErrorKind::DimensionError: return "DimensionError";
    case ErrorKind::DomainError: return "DomainError";
    case ErrorKind::QuadratureFail: return "QuadratureFail";
    case ErrorKind::PropertyViolation: return "PropertyViolation";
    case ErrorKind::SolverFail: return "SolverFail";
    case ErrorKind::MarginalMismatch: return "MarginalMismatch";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::PositivityError: return "PositivityError";
    case ErrorKind::NonpositiveDensity: return "NonpositiveDensity";
    case ErrorKind::LeakError: return "LeakError";
    case ErrorKind::DriftExceeded: return "DriftExceeded";
    case ErrorKind::NonZeroAverage: return "NonZeroAverage";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::ReproMismatch: return "ReproMismatch";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace bpl
