#include "anchorpose/error.hpp"

namespace anchorpose {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kPointBehindCamera: return "PointBehindCamera";
    case ErrorCode::kNonPositiveDepth: return "NonPositiveDepth";
    case ErrorCode::kDegenerateFrame: return "DegenerateFrame";
    case ErrorCode::kNotARotation: return "NotARotation";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kUnsupportedPlyVariant: return "UnsupportedPlyVariant";
    case ErrorCode::kEmptyModel: return "EmptyModel";
    case ErrorCode::kKTooLarge: return "KTooLarge";
    case ErrorCode::kIndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::kEmptyIntersection: return "EmptyIntersection";
    case ErrorCode::kObjectMismatch: return "ObjectMismatch";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kNonFinite: return "NonFinite";
    case ErrorCode::kNoForeground: return "NoForeground";
    case ErrorCode::kDegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::kNoConsensus: return "NoConsensus";
    case ErrorCode::kPrecondition: return "Precondition";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kZeroDiameter: return "ZeroDiameter";
    case ErrorCode::kObjectOutOfView: return "ObjectOutOfView";
    case ErrorCode::kBinUnfillable: return "BinUnfillable";
    case ErrorCode::kIdMismatch: return "IdMismatch";
    case ErrorCode::kIo: return "IoError";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

int error_exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return 2;
    case ErrorCode::kIo: return 3;
    case ErrorCode::kParseError:
    case ErrorCode::kUnsupportedPlyVariant: return 4;
    case ErrorCode::kIdMismatch:
    case ErrorCode::kObjectMismatch:
    case ErrorCode::kShapeMismatch: return 5;
    case ErrorCode::kObjectOutOfView:
    case ErrorCode::kBinUnfillable: return 6;
    case ErrorCode::kNoForeground:
    case ErrorCode::kNoConsensus:
    case ErrorCode::kDegenerateConfiguration: return 7;
    default: return 1;
  }
}

}  // namespace anchorpose
