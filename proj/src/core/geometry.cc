#include "odip/core/geometry.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "odip/core/error.h"

namespace odip {

BBox::BBox(double x_min, double y_min, double x_max, double y_max)
    : x_min_(x_min), y_min_(y_min), x_max_(x_max), y_max_(y_max) {
  if (!std::isfinite(x_min) || !std::isfinite(y_min) ||
      !std::isfinite(x_max) || !std::isfinite(y_max)) {
    throw Error(ErrorCode::kInvalidArgument, "box coordinates must be finite");
  }
  if (!(x_min < x_max) || !(y_min < y_max)) {
    throw Error(ErrorCode::kInvalidArgument,
                "box must satisfy x_min < x_max and y_min < y_max");
  }
}

bool BoxLess(const BBox& a, const BBox& b) {
  if (a.x_min() != b.x_min()) return a.x_min() < b.x_min();
  if (a.y_min() != b.y_min()) return a.y_min() < b.y_min();
  if (a.x_max() != b.x_max()) return a.x_max() < b.x_max();
  return a.y_max() < b.y_max();
}

std::string_view CategoryRoleName(CategoryRole role) {
  return role == CategoryRole::kNovel ? "novel" : "base";
}

CategoryRole ParseCategoryRole(std::string_view name) {
  if (name == "novel") return CategoryRole::kNovel;
  if (name == "base") return CategoryRole::kBase;
  throw Error(ErrorCode::kInvalidArgument,
              "unknown category role '" + std::string(name) + "'");
}

std::string_view AnnotationSourceName(AnnotationSource source) {
  switch (source) {
    case AnnotationSource::kGroundTruth:
      return "ground-truth";
    case AnnotationSource::kRobotEstimate:
      return "robot-estimate";
    case AnnotationSource::kPseudo:
      return "pseudo";
  }
  return "ground-truth";
}

AnnotationSource ParseAnnotationSource(std::string_view name) {
  if (name == "ground-truth") return AnnotationSource::kGroundTruth;
  if (name == "robot-estimate") return AnnotationSource::kRobotEstimate;
  if (name == "pseudo") return AnnotationSource::kPseudo;
  throw Error(ErrorCode::kInvalidArgument,
              "unknown annotation source '" + std::string(name) + "'");
}

Annotation Annotation::GroundTruth(const BBox& box, CategoryId category) {
  return {box, category, false, 1.0, AnnotationSource::kGroundTruth};
}

Annotation Annotation::RobotEstimate(const BBox& box, CategoryId category) {
  return {box, category, false, 1.0, AnnotationSource::kRobotEstimate};
}

Annotation Annotation::Pseudo(const BBox& box, CategoryId category,
                              double confidence) {
  if (!(confidence >= 0.0 && confidence <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "pseudo confidence must lie in [0, 1]");
  }
  return {box, category, true, confidence, AnnotationSource::kPseudo};
}

double Iou(const BBox& a, const BBox& b) {
  const double iw =
      std::min(a.x_max(), b.x_max()) - std::max(a.x_min(), b.x_min());
  const double ih =
      std::min(a.y_max(), b.y_max()) - std::max(a.y_min(), b.y_min());
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

std::vector<Detection> Nms(std::span<const Detection> detections,
                           double iou_threshold) {
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "nms iou threshold must lie in (0, 1]");
  }
  std::vector<std::size_t> order(detections.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) {
                     const Detection& a = detections[i];
                     const Detection& b = detections[j];
                     if (a.score != b.score) return a.score > b.score;
                     return BoxLess(a.box, b.box);
                   });
  std::vector<Detection> kept;
  for (std::size_t i : order) {
    const Detection& candidate = detections[i];
    const bool suppressed =
        std::any_of(kept.begin(), kept.end(), [&](const Detection& k) {
          return k.category == candidate.category &&
                 Iou(k.box, candidate.box) >= iou_threshold;
        });
    if (!suppressed) kept.push_back(candidate);
  }
  return kept;
}

BBox ClipToImage(const BBox& box, double width, double height) {
  const double x0 = std::max(box.x_min(), 0.0);
  const double y0 = std::max(box.y_min(), 0.0);
  const double x1 = std::min(box.x_max(), width);
  const double y1 = std::min(box.y_max(), height);
  if (!(x0 < x1) || !(y0 < y1)) {
    throw Error(ErrorCode::kNoOverlap, "box lies outside the image");
  }
  return BBox(x0, y0, x1, y1);
}

}  // namespace odip
