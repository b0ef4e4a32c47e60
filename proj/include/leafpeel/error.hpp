#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace leafpeel {

enum class ErrorCode {
  // data / structural
  CycleDetected,
  Disconnected,
  NonPositiveLength,
  RootNotBoundary,
  UnknownVertex,
  InvalidTree,
  NotASheaf,
  ParseError,
  IncompatibleBundles,
  GridMismatch,
  // numerical
  StepFailure,
  HorizonTooShort,
  CFLViolation,
  IncompatibleControl,
  SpectrumHit,
  ClusterUnresolved,
  TooManyRays,
  NonDecaying,
  ConsistencyFailure,
  PeelSingularity,
  InconsistentSheafData,
  LeadingAmplitudeZero,
  InconsistentTrains,
  WindowEmpty,
  NoReflection,
  IllConditioned,
  AmbiguousGrouping,
  NonIntegerDegree,
  NoCertifiedSheaf,
};

std::string_view to_string(ErrorCode code) noexcept;

/// True for errors caused by malformed or incompatible input rather than a
/// numerical failure. The CLI maps these to exit status 2 (otherwise 3).
bool is_data_error(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& detail) { throw Error(code, detail); }

}  // namespace leafpeel
