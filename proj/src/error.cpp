#include "leafpeel/error.hpp"

namespace leafpeel {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::CycleDetected: return "CycleDetected";
    case ErrorCode::Disconnected: return "Disconnected";
    case ErrorCode::NonPositiveLength: return "NonPositiveLength";
    case ErrorCode::RootNotBoundary: return "RootNotBoundary";
    case ErrorCode::UnknownVertex: return "UnknownVertex";
    case ErrorCode::InvalidTree: return "InvalidTree";
    case ErrorCode::NotASheaf: return "NotASheaf";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IncompatibleBundles: return "IncompatibleBundles";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::StepFailure: return "StepFailure";
    case ErrorCode::HorizonTooShort: return "HorizonTooShort";
    case ErrorCode::CFLViolation: return "CFLViolation";
    case ErrorCode::IncompatibleControl: return "IncompatibleControl";
    case ErrorCode::SpectrumHit: return "SpectrumHit";
    case ErrorCode::ClusterUnresolved: return "ClusterUnresolved";
    case ErrorCode::TooManyRays: return "TooManyRays";
    case ErrorCode::NonDecaying: return "NonDecaying";
    case ErrorCode::ConsistencyFailure: return "ConsistencyFailure";
    case ErrorCode::PeelSingularity: return "PeelSingularity";
    case ErrorCode::InconsistentSheafData: return "InconsistentSheafData";
    case ErrorCode::LeadingAmplitudeZero: return "LeadingAmplitudeZero";
    case ErrorCode::InconsistentTrains: return "InconsistentTrains";
    case ErrorCode::WindowEmpty: return "WindowEmpty";
    case ErrorCode::NoReflection: return "NoReflection";
    case ErrorCode::IllConditioned: return "IllConditioned";
    case ErrorCode::AmbiguousGrouping: return "AmbiguousGrouping";
    case ErrorCode::NonIntegerDegree: return "NonIntegerDegree";
    case ErrorCode::NoCertifiedSheaf: return "NoCertifiedSheaf";
  }
  return "Unknown";
}

bool is_data_error(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::CycleDetected:
    case ErrorCode::Disconnected:
    case ErrorCode::NonPositiveLength:
    case ErrorCode::RootNotBoundary:
    case ErrorCode::UnknownVertex:
    case ErrorCode::InvalidTree:
    case ErrorCode::NotASheaf:
    case ErrorCode::ParseError:
    case ErrorCode::IncompatibleBundles:
    case ErrorCode::GridMismatch:
    case ErrorCode::NoCertifiedSheaf:
      return true;
    default:
      return false;
  }
}

}  // namespace leafpeel
