#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace anchorpose {

enum class ErrorCode {
  kPointBehindCamera,
  kNonPositiveDepth,
  kDegenerateFrame,
  kNotARotation,
  kParseError,
  kUnsupportedPlyVariant,
  kEmptyModel,
  kKTooLarge,
  kIndexOutOfRange,
  kEmptyIntersection,
  kObjectMismatch,
  kShapeMismatch,
  kNonFinite,
  kNoForeground,
  kDegenerateConfiguration,
  kNoConsensus,
  kPrecondition,
  kEmptyInput,
  kZeroDiameter,
  kObjectOutOfView,
  kBinUnfillable,
  kIdMismatch,
  kIo,
  kInvalidArgument,
};

std::string_view error_code_name(ErrorCode code);

// Process exit status for the CLI; 0 is reserved for success.
int error_exit_code(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace anchorpose
