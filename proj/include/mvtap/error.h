#ifndef MVTAP_ERROR_H_
#define MVTAP_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace mvtap {

enum class ErrorCode {
  kInvalidCamera,
  kDegenerateProjection,
  kNonPositiveDepth,
  kInsufficientObservations,
  kDegenerateConfiguration,
  kInvalidCount,
  kInvalidConfig,
  kSamplingExhausted,
  kNoVisibleFrame,
  kDimensionMismatch,
  kShapeMismatch,
  kOddDimension,
  kIterationOverflow,
  kIOError,
  kFormatError,
};

// Stable upper-snake identifier printed by the CLI before any detail.
std::string_view ErrorCodeName(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(detail), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace mvtap

#endif  // MVTAP_ERROR_H_
