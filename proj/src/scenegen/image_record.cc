#include "odip/scenegen/image_record.h"

#include <string>

#include "odip/core/error.h"

namespace odip::scenegen {

std::string_view ImageRoleName(ImageRole role) {
  switch (role) {
    case ImageRole::kUdoQuery: return "udo";
    case ImageRole::kMoaQuery: return "moa";
    case ImageRole::kSupport: return "support";
    case ImageRole::kEval: return "eval";
  }
  return "eval";
}

ImageRole ParseImageRole(std::string_view name) {
  if (name == "udo") return ImageRole::kUdoQuery;
  if (name == "moa") return ImageRole::kMoaQuery;
  if (name == "support") return ImageRole::kSupport;
  if (name == "eval") return ImageRole::kEval;
  throw Error(ErrorCode::kInvalidArgument,
              "unknown image role '" + std::string(name) + "'");
}

std::shared_ptr<const Image> RenderSource(const CaptureSource& source,
                                          const SceneConfig& config) {
  if (const auto* spec = std::get_if<SceneSpec>(&source)) {
    return std::make_shared<const Image>(GenerateScene(*spec, config).raster);
  }
  const auto& view = std::get<SupportViewSource>(source);
  return std::make_shared<const Image>(
      RenderSupportView(view.object, view.view_index, view.seed, config).raster);
}

}  // namespace odip::scenegen
