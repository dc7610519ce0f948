#ifndef ODIP_CORE_ERROR_H_
#define ODIP_CORE_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace odip {

enum class ErrorCode {
  kInvalidArgument,
  kNoOverlap,
  kPlacementInfeasible,
  kGraspExhausted,
  kDegenerateTask,
  kEmptySupport,
  kNoGroundTruth,
  kConfig,
  kIo,
};

std::string_view ErrorCodeName(ErrorCode code);

// All recoverable failures in the library surface as odip::Error.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + message),
        code_(code),
        detail_(message) {}

  ErrorCode code() const { return code_; }
  // The message without the code name.
  const std::string& detail() const { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace odip

#endif  // ODIP_CORE_ERROR_H_
