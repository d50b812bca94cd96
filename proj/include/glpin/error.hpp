#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace glpin {

enum class ErrorCode {
  HoleOverlap,
  HoleTooCloseToBoundary,
  NonPositiveRadius,
  ResolutionTooCoarse,
  LoopBroken,
  DomainError,
  GridMismatch,
  NoConvergence,
  SingularFluxSystem,
  BoxTooSmall,
  AtThreshold,
  NonIntegerCirculation,
  ZeroOnLoop,
  AmbiguousWinding,
  ConfigError,
  SchemaMismatch,
  DegreeMismatch,
  BulkVortexFound,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries a machine-readable code so the
// CLI can map it to a structured report and exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Hole-indexed failures (validation, thresholds) also record the hole.
class HoleError : public Error {
 public:
  HoleError(ErrorCode code, int hole, const std::string& what)
      : Error(code, what + " (hole " + std::to_string(hole) + ")"), hole_(hole) {}

  int hole() const noexcept { return hole_; }

 private:
  int hole_;
};

}  // namespace glpin
