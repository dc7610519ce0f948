#ifndef ODIP_SCENEGEN_SCENEGEN_H_
#define ODIP_SCENEGEN_SCENEGEN_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "odip/core/geometry.h"
#include "odip/core/image.h"
#include "odip/core/random.h"

namespace odip::scenegen {

// The first four archetypes are reserved for novel categories, the last two
// for base categories.
enum class Archetype {
  kSquare,
  kDisc,
  kWideRectangle,
  kTallEllipse,
  kTriangle,
  kRing,
};

bool IsNovelArchetype(Archetype shape);
std::string_view ArchetypeName(Archetype shape);
Archetype ParseArchetype(std::string_view name);

struct CategoryInfo {
  CategoryId id;
  std::string name;
  Archetype shape;
  Rgb color;
};

// Category registry shared by every run. Novel categories stand in for
// cube/can/box/bottle; base categories reuse their hues with base shapes so
// color alone never identifies a category.
class Catalog {
 public:
  explicit Catalog(std::vector<CategoryInfo> categories);

  static const Catalog& Default();

  const CategoryInfo& Get(int id) const;
  const CategoryInfo& ByName(std::string_view name) const;
  CategoryId Id(std::string_view name) const { return ByName(name).id; }
  std::vector<CategoryId> Novel() const;
  std::vector<CategoryId> Base() const;
  const std::vector<CategoryInfo>& all() const { return categories_; }

 private:
  std::vector<CategoryInfo> categories_;
};

enum class TableKind { kNTable, kBTable, kEvalSparse, kEvalDense };

std::string_view TableKindName(TableKind kind);
TableKind ParseTableKind(std::string_view name);

struct ObjectSpec {
  CategoryId category;
  Archetype shape = Archetype::kSquare;
  Rgb base_color;
  // Drives the instance hue/saturation/value jitter and the pixel noise.
  std::uint64_t color_seed = 0;
  // Nominal diameter in pixels (longest extent before rotation).
  double scale = 32.0;
  double rotation = 0.0;

  friend bool operator==(const ObjectSpec&, const ObjectSpec&) = default;
};

struct PlacedObject {
  ObjectSpec object;
  double center_x = 0.0;
  double center_y = 0.0;

  friend bool operator==(const PlacedObject&, const PlacedObject&) = default;
};

struct SceneSpec {
  TableKind kind = TableKind::kBTable;
  std::vector<PlacedObject> objects;
  int width = 256;
  int height = 256;
  Rgb background;
  std::uint64_t seed = 0;

  friend bool operator==(const SceneSpec&, const SceneSpec&) = default;
};

struct RenderedScene {
  Image raster;
  // One entry per placed object, in placement order. Hidden from the learner.
  std::vector<Annotation> ground_truth;
};

// Per-object draw masks recorded while rendering, for verification.
struct RenderTrace {
  struct Mask {
    int x0 = 0;
    int y0 = 0;
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> bits;
    bool at(int x, int y) const {
      return x >= x0 && y >= y0 && x < x0 + width && y < y0 + height &&
             bits[static_cast<std::size_t>(y - y0) * width + (x - x0)] != 0;
    }
  };
  std::vector<Mask> masks;
  // Index of the object owning each pixel after painting, -1 for table.
  std::vector<int> owner;
};

struct SceneConfig {
  int train_size = 256;
  int dense_size = 384;
  Rgb table_color{176, 164, 140};
  Rgb support_background{228, 228, 228};
  int noise_amplitude = 4;

  double min_scale = 24.0;
  double max_scale = 44.0;
  double max_rotation = 0.2;
  double hue_jitter_degrees = 10.0;
  double saturation_jitter = 0.08;
  double value_jitter = 0.08;

  double overlap_cap = 0.05;
  double clutter_cap = 0.4;
  // Bound on intersection / smaller-box area in cluttered scenes, so no
  // object is buried under another.
  double containment_cap = 0.5;
  int max_attempts = 200;
  // Cluttered scenes draw positions around a few centers; spread is the
  // standard deviation as a fraction of the image side.
  int cluster_count = 3;
  double cluster_spread = 0.12;
  double cluster_probability = 0.7;

  std::pair<int, int> sparse_count{4, 7};
  std::pair<int, int> dense_count{12, 22};
  // Probability that an eval-scene object is drawn from the novel pool.
  double eval_novel_fraction = 0.6;

  int views_per_grasp = 3;
  double view_rotation_floor = 0.03;
  double view_rotation_spread = 0.03;
  double view_scale_jitter = 0.08;
  int support_margin = 6;
};

inline constexpr int kMaxBTableBaseObjects = 5;
inline constexpr int kMaxDenseObjects = 22;

// Instance color after the seed-driven jitter.
Rgb InstanceColor(const ObjectSpec& object, const SceneConfig& config);

// True when the object covers pixel center (px, py) of the image plane.
bool CoversPoint(const PlacedObject& placed, double px, double py);

// Tight raster box of an object drawn alone, clipped to the image. Empty when
// no pixel center is covered.
std::optional<BBox> RasterBox(const PlacedObject& placed, int width,
                              int height);

// Throws Error(kInvalidArgument) when a SceneSpec invariant is violated.
void ValidateSceneSpec(const SceneSpec& spec, const SceneConfig& config);

// Deterministic rasterization; objects painted in placement order.
RenderedScene GenerateScene(const SceneSpec& spec, const SceneConfig& config,
                            RenderTrace* trace = nullptr);

ObjectSpec SampleObject(CategoryId category, Rng& rng,
                        const SceneConfig& config,
                        const Catalog& catalog = Catalog::Default());

double OverlapCapFor(TableKind kind, const SceneConfig& config);
bool IsCluttered(TableKind kind);

// Rejection-samples a position for `object` that respects the kind's overlap
// rules against the objects already in `spec`. nullopt after max_attempts.
std::optional<PlacedObject> FindPlacement(const SceneSpec& spec,
                                          const ObjectSpec& object, Rng& rng,
                                          const SceneConfig& config);

// Throws Error(kPlacementInfeasible) when an object cannot be placed.
SceneSpec SampleSceneSpec(TableKind kind, std::span<const CategoryId> pool,
                          std::pair<int, int> count_range, std::uint64_t seed,
                          const SceneConfig& config,
                          const Catalog& catalog = Catalog::Default());

struct SupportView {
  Image raster;
  // Jitter actually applied, for inspection.
  double rotation = 0.0;
  double scale = 0.0;
};

// Close-up of a single object on the neutral support background. View v is
// rotated by v * (floor + spread) plus a jitter in [-spread/2, spread/2], so
// distinct views differ by at least the floor.
SupportView RenderSupportView(const ObjectSpec& object, int view_index,
                              std::uint64_t seed, const SceneConfig& config);

// Held-out evaluation scenes; seeds come from the eval namespace.
std::vector<RenderedScene> MakeEvalDataset(
    TableKind kind, int n_images, std::span<const CategoryId> novel,
    std::span<const CategoryId> base, std::uint64_t seed,
    const SceneConfig& config, std::vector<SceneSpec>* specs = nullptr);

// Scene spec for eval image `index`, as used by MakeEvalDataset.
SceneSpec EvalSceneSpec(TableKind kind, int index,
                        std::span<const CategoryId> novel,
                        std::span<const CategoryId> base, std::uint64_t seed,
                        const SceneConfig& config);

}  // namespace odip::scenegen

#endif  // ODIP_SCENEGEN_SCENEGEN_H_
