#ifndef ODIP_DETECTOR_FEATURES_H_
#define ODIP_DETECTOR_FEATURES_H_

#include <array>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "odip/core/geometry.h"
#include "odip/core/image.h"

namespace odip::detector {

// Descriptor layout: 4x4x4 joint RGB histogram over foreground pixels,
// log aspect ratio, foreground fill ratio, and the central second moments
// (xx, yy, xy) of the foreground in box-normalized coordinates, scaled by 12
// so that a filled box has unit xx and yy moments.
inline constexpr int kHistogramBins = 64;
inline constexpr int kAspectIndex = 64;
inline constexpr int kFillIndex = 65;
inline constexpr int kMomentIndex = 66;
inline constexpr int kDescriptorDim = 69;
inline constexpr double kMaxLogAspect = 1.4;

using Descriptor = std::array<double, kDescriptorDim>;

struct ProposalConfig {
  int border_band = 4;
  // Channel distance to the background above which a pixel is foreground.
  int foreground_threshold = 40;
  // Neighboring foreground pixels join a color component when their channel
  // distance is within this tolerance.
  int color_tolerance = 14;
  int min_component_area = 24;
  // Foreground blobs above this pixel area also get sliding windows.
  double max_single_object_area = 2400.0;
  std::vector<int> window_scales{24, 40, 64, 96};
  double window_min_fill = 0.5;
  double nms_iou = 0.8;
  int max_proposals = 120;
};

struct ForegroundMask {
  int width = 0;
  int height = 0;
  Rgb background;
  std::vector<std::uint8_t> bits;

  bool at(int x, int y) const {
    return bits[static_cast<std::size_t>(y) * width + x] != 0;
  }
};

// Modal color of the border band (5-bit quantized), averaged over the pixels
// of the modal bin.
Rgb EstimateBackground(const Image& image, int border_band);

ForegroundMask ComputeForeground(const Image& image,
                                 const ProposalConfig& config);

Descriptor Embed(const Image& image, const ForegroundMask& mask,
                 const BBox& box);
// Convenience overload that estimates the foreground itself.
Descriptor Embed(const Image& image, const BBox& box,
                 const ProposalConfig& config = {});

// Class-agnostic proposals: color-homogeneous components, whole foreground
// blobs, and snapped sliding windows over large blobs; NMS; capped.
std::vector<BBox> Propose(const Image& image, const ProposalConfig& config = {});

struct AnalyzedImage {
  std::vector<BBox> proposals;
  std::vector<Descriptor> descriptors;
};

AnalyzedImage Analyze(const Image& image, const ProposalConfig& config);

// Descriptor of a support close-up: the tight box around its foreground.
// All-zero histogram when the view has no foreground.
Descriptor DescribeSupport(const Image& image, const ProposalConfig& config);

// Thread-safe memo of per-image analyses, keyed by image id. Analyses depend
// only on the raster and the proposal config, never on detector params.
class FeatureCache {
 public:
  explicit FeatureCache(ProposalConfig config = {}) : config_(std::move(config)) {}

  const ProposalConfig& config() const { return config_; }

  std::shared_ptr<const AnalyzedImage> Analysis(const std::string& id,
                                                const Image& image);
  Descriptor SupportDescriptor(const std::string& id, const Image& image);
  std::size_t size() const;

 private:
  ProposalConfig config_;
  mutable std::mutex mutex_;
  std::unordered_map<std::string, std::shared_ptr<const AnalyzedImage>>
      analyses_;
  std::unordered_map<std::string, Descriptor> supports_;
};

}  // namespace odip::detector

#endif  // ODIP_DETECTOR_FEATURES_H_
