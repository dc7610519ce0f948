#ifndef ODIP_DETECTOR_PARAMS_IO_H_
#define ODIP_DETECTOR_PARAMS_IO_H_

#include <string>

#include "json.hpp"
#include "odip/detector/detector.h"

namespace odip::detector {

inline constexpr int kParamsSchemaVersion = 1;

nlohmann::json ParamsToJson(const DetectorParams& params);
// Throws Error(kInvalidArgument) on a malformed or wrong-version record.
DetectorParams ParamsFromJson(const nlohmann::json& json);

// Canonical text form; doubles are printed round-trip exact.
std::string SerializeParams(const DetectorParams& params);

}  // namespace odip::detector

#endif  // ODIP_DETECTOR_PARAMS_IO_H_
