#include "odip/core/error.h"

namespace odip {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
      return "InvalidArgument";
    case ErrorCode::kNoOverlap:
      return "NoOverlap";
    case ErrorCode::kPlacementInfeasible:
      return "PlacementInfeasible";
    case ErrorCode::kGraspExhausted:
      return "GraspExhausted";
    case ErrorCode::kDegenerateTask:
      return "DegenerateTask";
    case ErrorCode::kEmptySupport:
      return "EmptySupport";
    case ErrorCode::kNoGroundTruth:
      return "NoGroundTruth";
    case ErrorCode::kConfig:
      return "ConfigError";
    case ErrorCode::kIo:
      return "IoError";
  }
  return "Unknown";
}

}  // namespace odip
