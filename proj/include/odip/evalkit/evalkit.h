#ifndef ODIP_EVALKIT_EVALKIT_H_
#define ODIP_EVALKIT_EVALKIT_H_

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "odip/core/geometry.h"
#include "odip/detector/detector.h"
#include "odip/scenegen/scenegen.h"

namespace odip::evalkit {

// 0.50:0.05:0.95, each value the exact decimal literal.
std::vector<double> CocoIouThresholds();

inline constexpr int kMaxDetectionsPerImage = 100;

struct ApResult {
  double ap = 0.0;    // mean over the given thresholds
  double ap50 = 0.0;  // at IoU 0.5
};

// Average precision of one category at one IoU threshold, all-point
// interpolated. Detections are matched greedily by descending score (ties by
// image index, then box order) to the unmatched same-image ground truth of
// highest IoU. Only the top max_per_image detections of each image count.
// nullopt when the category has no ground truth.
std::optional<double> AveragePrecisionAt(
    std::span<const std::vector<Detection>> detections,
    std::span<const std::vector<Annotation>> ground_truth, CategoryId category,
    double iou_threshold, int max_per_image = kMaxDetectionsPerImage);

std::optional<ApResult> ComputeAp(
    std::span<const std::vector<Detection>> detections,
    std::span<const std::vector<Annotation>> ground_truth, CategoryId category,
    std::span<const double> thresholds,
    int max_per_image = kMaxDetectionsPerImage);

struct CategoryResult {
  CategoryId category;
  std::string name;
  // Absent when the category has no ground truth in the dataset.
  std::optional<double> ap;
  std::optional<double> ap50;
  int detections = 0;
  int ground_truth = 0;
};

struct EvalResult {
  std::vector<CategoryResult> categories;
  // Unweighted mean over categories with ground truth.
  std::optional<double> ap;
  std::optional<double> ap50;
  int detections = 0;
  int ground_truth = 0;
};

struct EvalImage {
  std::string id;
  std::shared_ptr<const detector::AnalyzedImage> analysis;
  std::vector<Annotation> ground_truth;
};

struct EvalDataset {
  scenegen::TableKind kind = scenegen::TableKind::kEvalSparse;
  std::vector<EvalImage> images;
};

// Builds the held-out set and analyzes every image through the cache.
EvalDataset PrepareEvalDataset(scenegen::TableKind kind, int n_images,
                               std::span<const CategoryId> novel,
                               std::span<const CategoryId> base,
                               std::uint64_t seed,
                               const scenegen::SceneConfig& scene,
                               detector::FeatureCache& cache);

// Returns one or more k-shot support sets (draws) for a category.
using SupportSampler =
    std::function<std::vector<detector::SupportSet>(CategoryId, int k)>;

// Detects every category on every image; per-category AP is averaged over the
// sampler's draws.
EvalResult EvaluateModel(const detector::DetectorParams& params,
                         const SupportSampler& sampler,
                         const EvalDataset& dataset, int k,
                         std::span<const CategoryId> categories,
                         const detector::HeadConfig& head = {});

struct PseudoQuality {
  double mean_iou = 0.0;
  // Absent for an empty pseudo set.
  std::optional<double> precision;
  double recall = 0.0;
  int pseudo_boxes = 0;
  int ground_truth = 0;
};

// Each pseudo box is matched to its best-IoU same-category ground truth.
// precision = share of pseudo boxes matched at IoU >= 0.5; recall = share of
// ground truth covered by some same-category pseudo box at IoU >= 0.5.
PseudoQuality MeasurePseudoQuality(
    std::span<const std::vector<Annotation>> pseudo,
    std::span<const std::vector<Annotation>> ground_truth);

}  // namespace odip::evalkit

#endif  // ODIP_EVALKIT_EVALKIT_H_
