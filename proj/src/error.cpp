#include "gmclab/error.hpp"

namespace gmclab {

const char* error_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::Ok:
      return "Ok";
    case ErrorCode::InvalidArgument:
      return "InvalidArgument";
    case ErrorCode::CoincidentPoints:
      return "CoincidentPoints";
    case ErrorCode::OutOfDomain:
      return "OutOfDomain";
    case ErrorCode::CircleLeavesDomain:
      return "CircleLeavesDomain";
    case ErrorCode::NotNested:
      return "NotNested";
    case ErrorCode::NotPSD:
      return "NotPSD";
    case ErrorCode::FactorizationFailed:
      return "FactorizationFailed";
    case ErrorCode::UnsupportedRadius:
      return "UnsupportedRadius";
    case ErrorCode::NonFiniteShift:
      return "NonFiniteShift";
    case ErrorCode::SupercriticalGamma:
      return "SupercriticalGamma";
    case ErrorCode::MissingVariance:
      return "MissingVariance";
    case ErrorCode::MismatchedGrids:
      return "MismatchedGrids";
    case ErrorCode::NotDisk:
      return "NotDisk";
    case ErrorCode::UnsupportedScheme:
      return "UnsupportedScheme";
    case ErrorCode::BallTooSmallForGrid:
      return "BallTooSmallForGrid";
    case ErrorCode::BallLeavesDomain:
      return "BallLeavesDomain";
    case ErrorCode::AllCensored:
      return "AllCensored";
    case ErrorCode::DegenerateMeasure:
      return "DegenerateMeasure";
    case ErrorCode::OutOfL2Regime:
      return "OutOfL2Regime";
    case ErrorCode::UnknownConvexityTag:
      return "UnknownConvexityTag";
    case ErrorCode::MassUnreachable:
      return "MassUnreachable";
    case ErrorCode::WindowTooNarrow:
      return "WindowTooNarrow";
    case ErrorCode::EmptyBall:
      return "EmptyBall";
    case ErrorCode::ConfigInvalid:
      return "ConfigInvalid";
    case ErrorCode::IoError:
      return "IoError";
    case ErrorCode::Internal:
      return "Internal";
  }
  return "Unknown";
}

}  // namespace gmclab
