#include "mfpe/error.hpp"

namespace mfpe {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kZeroOfSigma: return "ZeroOfSigma";
    case ErrorCode::kOutOfDomain: return "OutOfDomain";
    case ErrorCode::kNonConvergence: return "NonConvergence";
    case ErrorCode::kSeriesDivergence: return "SeriesDivergence";
    case ErrorCode::kIllConditioned: return "IllConditioned";
    case ErrorCode::kStepUnderflow: return "StepUnderflow";
    case ErrorCode::kBlowup: return "Blowup";
    case ErrorCode::kEmptyEnsemble: return "EmptyEnsemble";
    case ErrorCode::kGridTooCoarse: return "GridTooCoarse";
    case ErrorCode::kInstability: return "Instability";
    case ErrorCode::kGridMismatch: return "GridMismatch";
    case ErrorCode::kUnsupportedReference: return "UnsupportedReference";
  }
  return "Unknown";
}

bool is_numerical(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kGridMismatch:
    case ErrorCode::kUnsupportedReference:
    case ErrorCode::kOutOfDomain:
    case ErrorCode::kZeroOfSigma:
      return false;
    default:
      return true;
  }
}

}  // namespace mfpe
