#include "georeg/error.hpp"

namespace georeg {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kDegenerateInput: return "DegenerateInput";
    case ErrorCode::kNoConsensus: return "NoConsensus";
    case ErrorCode::kFormatError: return "FormatError";
    case ErrorCode::kShapeError: return "ShapeError";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kOutOfBounds: return "OutOfBounds";
    case ErrorCode::kNoDataAtPixel: return "NoDataAtPixel";
    case ErrorCode::kEmptyResult: return "EmptyResult";
    case ErrorCode::kTooFewGroundPoints: return "TooFewGroundPoints";
    case ErrorCode::kNoIntersections: return "NoIntersections";
    case ErrorCode::kAmbiguous: return "Ambiguous";
    case ErrorCode::kNoCandidates: return "NoCandidates";
    case ErrorCode::kNoCorrespondences: return "NoCorrespondences";
    case ErrorCode::kDiverged: return "Diverged";
    case ErrorCode::kSingularCovariance: return "SingularCovariance";
  }
  return "Unknown";
}

bool is_data_error(ErrorCode code) {
  return code != ErrorCode::kInvalidArgument;
}

}  // namespace georeg
