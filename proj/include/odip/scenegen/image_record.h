#ifndef ODIP_SCENEGEN_IMAGE_RECORD_H_
#define ODIP_SCENEGEN_IMAGE_RECORD_H_

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "odip/core/geometry.h"
#include "odip/core/image.h"
#include "odip/scenegen/scenegen.h"

namespace odip::scenegen {

enum class ImageRole { kUdoQuery, kMoaQuery, kSupport, kEval };

std::string_view ImageRoleName(ImageRole role);
ImageRole ParseImageRole(std::string_view name);

struct SupportViewSource {
  ObjectSpec object;
  int view_index = 0;
  std::uint64_t seed = 0;

  friend bool operator==(const SupportViewSource&,
                         const SupportViewSource&) = default;
};

// Everything needed to regenerate a raster bit-exactly.
using CaptureSource = std::variant<SceneSpec, SupportViewSource>;

struct ImageRecord {
  std::string id;
  ImageRole role = ImageRole::kEval;
  int stage = 0;
  CategoryId category;
  // Identifies the GOR round that produced the capture; empty otherwise.
  std::string round_key;
  std::shared_ptr<const Image> raster;
  CaptureSource source;
  // Evaluation-only privilege: never read by the learner.
  std::vector<Annotation> hidden_ground_truth;
};

// Re-renders a capture from its source.
std::shared_ptr<const Image> RenderSource(const CaptureSource& source,
                                          const SceneConfig& config);

}  // namespace odip::scenegen

#endif  // ODIP_SCENEGEN_IMAGE_RECORD_H_
