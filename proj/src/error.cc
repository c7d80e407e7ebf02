#include "mvtap/error.h"

namespace mvtap {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidCamera: return "INVALID_CAMERA";
    case ErrorCode::kDegenerateProjection: return "DEGENERATE_PROJECTION";
    case ErrorCode::kNonPositiveDepth: return "NON_POSITIVE_DEPTH";
    case ErrorCode::kInsufficientObservations:
      return "INSUFFICIENT_OBSERVATIONS";
    case ErrorCode::kDegenerateConfiguration:
      return "DEGENERATE_CONFIGURATION";
    case ErrorCode::kInvalidCount: return "INVALID_COUNT";
    case ErrorCode::kInvalidConfig: return "INVALID_CONFIG";
    case ErrorCode::kSamplingExhausted: return "SAMPLING_EXHAUSTED";
    case ErrorCode::kNoVisibleFrame: return "NO_VISIBLE_FRAME";
    case ErrorCode::kDimensionMismatch: return "DIMENSION_MISMATCH";
    case ErrorCode::kShapeMismatch: return "SHAPE_MISMATCH";
    case ErrorCode::kOddDimension: return "ODD_DIMENSION";
    case ErrorCode::kIterationOverflow: return "ITERATION_OVERFLOW";
    case ErrorCode::kIOError: return "IO_ERROR";
    case ErrorCode::kFormatError: return "FORMAT_ERROR";
  }
  return "UNKNOWN";
}

}  // namespace mvtap
