#include "odip/detector/params_io.h"

#include <string>

#include "odip/core/error.h"

namespace odip::detector {

using nlohmann::json;

json ParamsToJson(const DetectorParams& params) {
  json prototypes = json::object();
  for (const auto& [category, shots] : params.prototypes) {
    json list = json::array();
    for (const Descriptor& d : shots) list.push_back(d);
    prototypes[std::to_string(category)] = std::move(list);
  }
  return {{"schema", "odip.detector_params"},
          {"version", kParamsSchemaVersion},
          {"u", params.u},
          {"tau", params.tau},
          {"margin", params.margin},
          {"prototypes", std::move(prototypes)}};
}

DetectorParams ParamsFromJson(const json& j) {
  try {
    if (j.at("schema") != "odip.detector_params" ||
        j.at("version").get<int>() != kParamsSchemaVersion) {
      throw Error(ErrorCode::kInvalidArgument,
                  "unsupported detector params record");
    }
    DetectorParams p;
    p.u = j.at("u").get<std::vector<double>>();
    p.tau = j.at("tau").get<double>();
    p.margin = j.at("margin").get<double>();
    if (p.u.size() != static_cast<std::size_t>(kDescriptorDim)) {
      throw Error(ErrorCode::kInvalidArgument, "metric has the wrong dimension");
    }
    for (const auto& [key, list] : j.at("prototypes").items()) {
      auto& store = p.prototypes[std::stoi(key)];
      for (const json& d : list) store.push_back(d.get<Descriptor>());
    }
    return p;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument,
                std::string("malformed detector params: ") + e.what());
  }
}

std::string SerializeParams(const DetectorParams& params) {
  return ParamsToJson(params).dump();
}

}  // namespace odip::detector
