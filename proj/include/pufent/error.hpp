#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pufent {

enum class ErrorCode {
  kParseError,
  kDuplicatePathId,
  kEmptyPath,
  kUnsatisfiableParams,
  kNonpositiveDelay,
  kDimensionMismatch,
  kDegenerateInstance,
  kPolarityMismatch,
  kCapacityExceeded,
  kNoConsecutiveSubclasses,
  kSingularFit,
  kLengthMismatch,
  kInvalidArgument,
  kIoError,
};

/// Stable identifier printed by the CLI and matched by scripts.
constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kParseError: return "PARSE_ERROR";
    case ErrorCode::kDuplicatePathId: return "DUPLICATE_PATH_ID";
    case ErrorCode::kEmptyPath: return "EMPTY_PATH";
    case ErrorCode::kUnsatisfiableParams: return "UNSATISFIABLE_PARAMS";
    case ErrorCode::kNonpositiveDelay: return "NONPOSITIVE_DELAY";
    case ErrorCode::kDimensionMismatch: return "DIMENSION_MISMATCH";
    case ErrorCode::kDegenerateInstance: return "DEGENERATE_INSTANCE";
    case ErrorCode::kPolarityMismatch: return "POLARITY_MISMATCH";
    case ErrorCode::kCapacityExceeded: return "CAPACITY_EXCEEDED";
    case ErrorCode::kNoConsecutiveSubclasses: return "NO_CONSECUTIVE_SUBCLASSES";
    case ErrorCode::kSingularFit: return "SINGULAR_FIT";
    case ErrorCode::kLengthMismatch: return "LENGTH_MISMATCH";
    case ErrorCode::kInvalidArgument: return "INVALID_ARGUMENT";
    case ErrorCode::kIoError: return "IO_ERROR";
  }
  return "UNKNOWN";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), message_(what) {}

  ErrorCode code() const noexcept { return code_; }
  /// The message without the code prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

}  // namespace pufent
