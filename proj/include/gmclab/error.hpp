#pragma once

#include <stdexcept>
#include <string>

namespace gmclab {

// Numeric values are part of the C ABI (see gmclab.h); append only.
enum class ErrorCode : int {
  Ok = 0,
  InvalidArgument = 1,
  CoincidentPoints = 2,
  OutOfDomain = 3,
  CircleLeavesDomain = 4,
  NotNested = 5,
  NotPSD = 6,
  FactorizationFailed = 7,
  UnsupportedRadius = 8,
  NonFiniteShift = 9,
  SupercriticalGamma = 10,
  MissingVariance = 11,
  MismatchedGrids = 12,
  NotDisk = 13,
  UnsupportedScheme = 14,
  BallTooSmallForGrid = 15,
  BallLeavesDomain = 16,
  AllCensored = 17,
  DegenerateMeasure = 18,
  OutOfL2Regime = 19,
  UnknownConvexityTag = 20,
  MassUnreachable = 21,
  WindowTooNarrow = 22,
  EmptyBall = 23,
  ConfigInvalid = 24,
  IoError = 25,
  Internal = 26,
};

const char* error_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_name(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace gmclab
