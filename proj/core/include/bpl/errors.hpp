#pragma once

#include <stdexcept>
#include <string>

namespace bpl {

enum class ErrorKind {
  InvalidArgument,
  AllZero,
  NegativeDensity,
  DimensionError,
  DomainError,
  QuadratureFail,
  PropertyViolation,
  SolverFail,
  MarginalMismatch,
  NoConvergence,
  PositivityError,
  NonpositiveDensity,
  LeakError,
  DriftExceeded,
  NonZeroAverage,
  ConfigError,
  ReproMismatch,
  IoError,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what);
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& what);

}  // namespace bpl
