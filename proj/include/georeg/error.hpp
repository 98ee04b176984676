#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace georeg {

enum class ErrorCode {
  kInvalidArgument,
  kDegenerateInput,
  kNoConsensus,
  kFormatError,
  kShapeError,
  kShapeMismatch,
  kIoError,
  kOutOfBounds,
  kNoDataAtPixel,
  kEmptyResult,
  kTooFewGroundPoints,
  kNoIntersections,
  kAmbiguous,
  kNoCandidates,
  kNoCorrespondences,
  kDiverged,
  kSingularCovariance,
};

std::string_view to_string(ErrorCode code);

// Every failure the library reports. `stage` names the pipeline step that
// raised it ("ransac", "match_filter", ...) so orchestration code can
// attribute errors without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string stage, const std::string& message)
      : std::runtime_error(message), code_(code), stage_(std::move(stage)) {}

  ErrorCode code() const { return code_; }
  const std::string& stage() const { return stage_; }

  // Same error re-attributed to an enclosing stage.
  Error with_stage(std::string stage) const {
    return Error(code_, std::move(stage), what());
  }

 private:
  ErrorCode code_;
  std::string stage_;
};

// True for errors caused by the data (exit code 2 in the CLI) rather than by
// the caller.
bool is_data_error(ErrorCode code);

}  // namespace georeg
