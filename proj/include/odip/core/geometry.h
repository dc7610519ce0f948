#ifndef ODIP_CORE_GEOMETRY_H_
#define ODIP_CORE_GEOMETRY_H_

#include <span>
#include <string_view>
#include <vector>

namespace odip {

// Axis-aligned box in continuous pixel coordinates, origin top-left. The max
// edges are exclusive, so a single pixel (x, y) is the box (x, y, x+1, y+1).
class BBox {
 public:
  // Unit box at the origin, so every BBox value satisfies the invariants.
  BBox() : BBox(0.0, 0.0, 1.0, 1.0) {}
  // Throws Error(kInvalidArgument) unless the box is finite and non-empty.
  BBox(double x_min, double y_min, double x_max, double y_max);

  double x_min() const { return x_min_; }
  double y_min() const { return y_min_; }
  double x_max() const { return x_max_; }
  double y_max() const { return y_max_; }

  double width() const { return x_max_ - x_min_; }
  double height() const { return y_max_ - y_min_; }
  double area() const { return width() * height(); }
  double center_x() const { return 0.5 * (x_min_ + x_max_); }
  double center_y() const { return 0.5 * (y_min_ + y_max_); }

  friend bool operator==(const BBox&, const BBox&) = default;

 private:
  double x_min_;
  double y_min_;
  double x_max_;
  double y_max_;
};

// Lexicographic (x_min, y_min, x_max, y_max) order, used for tie-breaking.
bool BoxLess(const BBox& a, const BBox& b);

enum class CategoryRole { kBase, kNovel };

std::string_view CategoryRoleName(CategoryRole role);
CategoryRole ParseCategoryRole(std::string_view name);

struct CategoryId {
  int id = 0;
  CategoryRole role = CategoryRole::kBase;

  friend bool operator==(const CategoryId&, const CategoryId&) = default;
  friend bool operator<(const CategoryId& a, const CategoryId& b) {
    return a.id < b.id;
  }
};

enum class AnnotationSource { kGroundTruth, kRobotEstimate, kPseudo };

std::string_view AnnotationSourceName(AnnotationSource source);
AnnotationSource ParseAnnotationSource(std::string_view name);

struct Annotation {
  BBox box;
  CategoryId category;
  bool is_pseudo = false;
  double confidence = 1.0;
  AnnotationSource source = AnnotationSource::kGroundTruth;

  static Annotation GroundTruth(const BBox& box, CategoryId category);
  static Annotation RobotEstimate(const BBox& box, CategoryId category);
  // Throws Error(kInvalidArgument) when confidence is outside [0, 1].
  static Annotation Pseudo(const BBox& box, CategoryId category,
                           double confidence);

  friend bool operator==(const Annotation&, const Annotation&) = default;
};

struct Detection {
  BBox box;
  double score = 0.0;
  CategoryId category;

  friend bool operator==(const Detection&, const Detection&) = default;
};

// Intersection over union; 0 for disjoint boxes.
double Iou(const BBox& a, const BBox& b);

// Greedy per-category suppression. Detections are visited by descending
// score, ties broken by smaller x_min, then smaller y_min (then x_max, y_max).
// A detection is dropped when its IoU with an already kept detection of the
// same category reaches iou_threshold. Output is in visiting order.
std::vector<Detection> Nms(std::span<const Detection> detections,
                           double iou_threshold);

// Intersection of box with [0, width] x [0, height]. Throws
// Error(kNoOverlap) when the intersection is empty.
BBox ClipToImage(const BBox& box, double width, double height);

}  // namespace odip

#endif  // ODIP_CORE_GEOMETRY_H_
