#include "odip/scenegen/scenegen.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "odip/core/error.h"

namespace odip::scenegen {
namespace {

constexpr double kPi = std::numbers::pi;

struct Hsv {
  double h;  // degrees
  double s;
  double v;
};

Hsv ToHsv(Rgb c) {
  const double r = c.r / 255.0;
  const double g = c.g / 255.0;
  const double b = c.b / 255.0;
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double d = mx - mn;
  double h = 0.0;
  if (d > 0.0) {
    if (mx == r) {
      h = 60.0 * std::fmod((g - b) / d, 6.0);
    } else if (mx == g) {
      h = 60.0 * ((b - r) / d + 2.0);
    } else {
      h = 60.0 * ((r - g) / d + 4.0);
    }
  }
  if (h < 0.0) h += 360.0;
  return {h, mx > 0.0 ? d / mx : 0.0, mx};
}

Rgb FromHsv(Hsv hsv) {
  const double h = std::fmod(std::fmod(hsv.h, 360.0) + 360.0, 360.0);
  const double s = std::clamp(hsv.s, 0.0, 1.0);
  const double v = std::clamp(hsv.v, 0.0, 1.0);
  const double c = v * s;
  const double x = c * (1.0 - std::fabs(std::fmod(h / 60.0, 2.0) - 1.0));
  const double m = v - c;
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(h / 60.0) % 6) {
    case 0: r = c; g = x; break;
    case 1: r = x; g = c; break;
    case 2: g = c; b = x; break;
    case 3: g = x; b = c; break;
    case 4: r = x; b = c; break;
    default: r = c; b = x; break;
  }
  auto to8 = [&](double u) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(u + m, 0.0, 1.0) * 255.0));
  };
  return {to8(r), to8(g), to8(b)};
}

std::uint8_t AddNoise(std::uint8_t value, int delta) {
  return static_cast<std::uint8_t>(std::clamp(int{value} + delta, 0, 255));
}

Rgb Noisy(Rgb c, Rng& rng, int amplitude) {
  if (amplitude <= 0) return c;
  return {AddNoise(c.r, rng.UniformInt(-amplitude, amplitude)),
          AddNoise(c.g, rng.UniformInt(-amplitude, amplitude)),
          AddNoise(c.b, rng.UniformInt(-amplitude, amplitude))};
}

// Shape membership in object-local coordinates (rotation removed).
bool InsideShape(Archetype shape, double scale, double u, double v) {
  const double half = 0.5 * scale;
  switch (shape) {
    case Archetype::kSquare:
      return std::fabs(u) <= half && std::fabs(v) <= half;
    case Archetype::kDisc:
      return u * u + v * v <= half * half;
    case Archetype::kWideRectangle:
      return std::fabs(u) <= half && std::fabs(v) <= 0.5 * half;
    case Archetype::kTallEllipse: {
      const double a = 0.5 * half;
      return (u * u) / (a * a) + (v * v) / (half * half) <= 1.0;
    }
    case Archetype::kTriangle: {
      // Apex up; base of width `scale` at the bottom.
      const double h = scale * std::sqrt(3.0) / 2.0;
      const double t = (v + 0.5 * h) / h;
      return t >= 0.0 && t <= 1.0 && std::fabs(u) <= t * half;
    }
    case Archetype::kRing: {
      const double r2 = u * u + v * v;
      return r2 <= half * half && r2 >= 0.25 * half * half;
    }
  }
  return false;
}

// Half extents of the rotated shape's analytic bounding box, padded by one
// pixel so iteration windows always contain every covered pixel center.
std::pair<double, double> HalfExtents(const ObjectSpec& object) {
  const double r = 0.5 * object.scale * std::sqrt(2.0) + 1.0;
  return {r, r};
}

// Point-in-object test with the rotation precomputed.
class Coverage {
 public:
  explicit Coverage(const PlacedObject& placed)
      : placed_(placed),
        cos_(std::cos(placed.object.rotation)),
        sin_(std::sin(placed.object.rotation)) {}

  bool operator()(double px, double py) const {
    const double dx = px - placed_.center_x;
    const double dy = py - placed_.center_y;
    return InsideShape(placed_.object.shape, placed_.object.scale,
                       dx * cos_ + dy * sin_, -dx * sin_ + dy * cos_);
  }

 private:
  const PlacedObject& placed_;
  double cos_;
  double sin_;
};

std::string Lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(c));
  return out;
}

void PaintBackground(Image& image, Rgb base, std::uint64_t seed,
                     int amplitude) {
  Rng rng(DeriveSeed(seed, 0x626b67));
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      image.set(x, y, Noisy(base, rng, amplitude));
    }
  }
}

// Paints one object; returns its draw mask.
RenderTrace::Mask PaintObject(Image& image, const PlacedObject& placed,
                              const SceneConfig& config) {
  const auto [ex, ey] = HalfExtents(placed.object);
  RenderTrace::Mask mask;
  mask.x0 = std::max(0, static_cast<int>(std::floor(placed.center_x - ex)));
  mask.y0 = std::max(0, static_cast<int>(std::floor(placed.center_y - ey)));
  const int x1 = std::min(image.width(),
                          static_cast<int>(std::ceil(placed.center_x + ex)) + 1);
  const int y1 = std::min(image.height(),
                          static_cast<int>(std::ceil(placed.center_y + ey)) + 1);
  mask.width = std::max(0, x1 - mask.x0);
  mask.height = std::max(0, y1 - mask.y0);
  mask.bits.assign(static_cast<std::size_t>(mask.width) * mask.height, 0);

  const Rgb color = InstanceColor(placed.object, config);
  Rng rng(DeriveSeed(placed.object.color_seed, 0x6e6f6973));
  const Coverage covers(placed);
  for (int y = mask.y0; y < y1; ++y) {
    for (int x = mask.x0; x < x1; ++x) {
      if (!covers(x + 0.5, y + 0.5)) continue;
      image.set(x, y, Noisy(color, rng, config.noise_amplitude));
      mask.bits[static_cast<std::size_t>(y - mask.y0) * mask.width +
                (x - mask.x0)] = 1;
    }
  }
  return mask;
}

std::optional<BBox> MaskBox(const RenderTrace::Mask& mask) {
  int x_lo = mask.x0 + mask.width, y_lo = mask.y0 + mask.height;
  int x_hi = -1, y_hi = -1;
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (!mask.bits[static_cast<std::size_t>(y) * mask.width + x]) continue;
      x_lo = std::min(x_lo, mask.x0 + x);
      y_lo = std::min(y_lo, mask.y0 + y);
      x_hi = std::max(x_hi, mask.x0 + x);
      y_hi = std::max(y_hi, mask.y0 + y);
    }
  }
  if (x_hi < 0) return std::nullopt;
  return BBox(x_lo, y_lo, x_hi + 1, y_hi + 1);
}

bool RespectsOverlap(const BBox& candidate, const std::vector<BBox>& placed,
                     TableKind kind, const SceneConfig& config) {
  const double cap = OverlapCapFor(kind, config);
  for (const BBox& other : placed) {
    if (Iou(candidate, other) > cap) return false;
    if (IsCluttered(kind)) {
      const double iw = std::min(candidate.x_max(), other.x_max()) -
                        std::max(candidate.x_min(), other.x_min());
      const double ih = std::min(candidate.y_max(), other.y_max()) -
                        std::max(candidate.y_min(), other.y_min());
      if (iw > 0 && ih > 0 &&
          iw * ih > config.containment_cap *
                        std::min(candidate.area(), other.area())) {
        return false;
      }
    }
  }
  return true;
}

int ImageSideFor(TableKind kind, const SceneConfig& config) {
  return kind == TableKind::kEvalDense ? config.dense_size : config.train_size;
}

}  // namespace

bool IsNovelArchetype(Archetype shape) {
  return shape == Archetype::kSquare || shape == Archetype::kDisc ||
         shape == Archetype::kWideRectangle ||
         shape == Archetype::kTallEllipse;
}

std::string_view ArchetypeName(Archetype shape) {
  switch (shape) {
    case Archetype::kSquare: return "square";
    case Archetype::kDisc: return "disc";
    case Archetype::kWideRectangle: return "wide-rectangle";
    case Archetype::kTallEllipse: return "tall-ellipse";
    case Archetype::kTriangle: return "triangle";
    case Archetype::kRing: return "ring";
  }
  return "square";
}

Archetype ParseArchetype(std::string_view name) {
  for (Archetype a : {Archetype::kSquare, Archetype::kDisc,
                      Archetype::kWideRectangle, Archetype::kTallEllipse,
                      Archetype::kTriangle, Archetype::kRing}) {
    if (ArchetypeName(a) == name) return a;
  }
  throw Error(ErrorCode::kInvalidArgument,
              "unknown archetype '" + std::string(name) + "'");
}

Catalog::Catalog(std::vector<CategoryInfo> categories)
    : categories_(std::move(categories)) {
  for (std::size_t i = 0; i < categories_.size(); ++i) {
    const CategoryInfo& c = categories_[i];
    const bool novel = c.id.role == CategoryRole::kNovel;
    if (novel != IsNovelArchetype(c.shape)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "category '" + c.name + "' uses an archetype of the wrong role");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (categories_[j].id.id == c.id.id || categories_[j].name == c.name) {
        throw Error(ErrorCode::kInvalidArgument,
                    "duplicate category '" + c.name + "'");
      }
    }
  }
}

const Catalog& Catalog::Default() {
  static const Catalog catalog({
      {{0, CategoryRole::kNovel}, "cube", Archetype::kSquare, {205, 55, 45}},
      {{1, CategoryRole::kNovel}, "can", Archetype::kDisc, {45, 85, 200}},
      {{2, CategoryRole::kNovel}, "box", Archetype::kWideRectangle, {235, 190, 30}},
      {{3, CategoryRole::kNovel}, "bottle", Archetype::kTallEllipse, {40, 150, 70}},
      {{4, CategoryRole::kBase}, "wedge", Archetype::kTriangle, {200, 70, 40}},
      {{5, CategoryRole::kBase}, "tape", Archetype::kRing, {50, 95, 185}},
      {{6, CategoryRole::kBase}, "cone", Archetype::kTriangle, {45, 140, 85}},
      {{7, CategoryRole::kBase}, "washer", Archetype::kRing, {230, 180, 45}},
  });
  return catalog;
}

const CategoryInfo& Catalog::Get(int id) const {
  for (const CategoryInfo& c : categories_) {
    if (c.id.id == id) return c;
  }
  throw Error(ErrorCode::kInvalidArgument,
              "unknown category id " + std::to_string(id));
}

const CategoryInfo& Catalog::ByName(std::string_view name) const {
  const std::string key = Lower(name);
  for (const CategoryInfo& c : categories_) {
    if (c.name == key) return c;
  }
  throw Error(ErrorCode::kInvalidArgument,
              "unknown category '" + std::string(name) + "'");
}

std::vector<CategoryId> Catalog::Novel() const {
  std::vector<CategoryId> out;
  for (const CategoryInfo& c : categories_) {
    if (c.id.role == CategoryRole::kNovel) out.push_back(c.id);
  }
  return out;
}

std::vector<CategoryId> Catalog::Base() const {
  std::vector<CategoryId> out;
  for (const CategoryInfo& c : categories_) {
    if (c.id.role == CategoryRole::kBase) out.push_back(c.id);
  }
  return out;
}

std::string_view TableKindName(TableKind kind) {
  switch (kind) {
    case TableKind::kNTable: return "n-table";
    case TableKind::kBTable: return "b-table";
    case TableKind::kEvalSparse: return "sparse";
    case TableKind::kEvalDense: return "dense";
  }
  return "sparse";
}

TableKind ParseTableKind(std::string_view name) {
  if (name == "n-table") return TableKind::kNTable;
  if (name == "b-table") return TableKind::kBTable;
  if (name == "sparse" || name == "eval-sparse") return TableKind::kEvalSparse;
  if (name == "dense" || name == "eval-dense") return TableKind::kEvalDense;
  throw Error(ErrorCode::kInvalidArgument,
              "unknown table kind '" + std::string(name) + "'");
}

Rgb InstanceColor(const ObjectSpec& object, const SceneConfig& config) {
  Rng rng(DeriveSeed(object.color_seed, 0x636f6c));
  Hsv hsv = ToHsv(object.base_color);
  hsv.h += rng.Uniform(-config.hue_jitter_degrees, config.hue_jitter_degrees);
  hsv.s += rng.Uniform(-config.saturation_jitter, config.saturation_jitter);
  hsv.v += rng.Uniform(-config.value_jitter, config.value_jitter);
  return FromHsv(hsv);
}

bool CoversPoint(const PlacedObject& placed, double px, double py) {
  return Coverage(placed)(px, py);
}

std::optional<BBox> RasterBox(const PlacedObject& placed, int width,
                              int height) {
  const auto [ex, ey] = HalfExtents(placed.object);
  const int x0 = std::max(0, static_cast<int>(std::floor(placed.center_x - ex)));
  const int y0 = std::max(0, static_cast<int>(std::floor(placed.center_y - ey)));
  const int x1 =
      std::min(width, static_cast<int>(std::ceil(placed.center_x + ex)) + 1);
  const int y1 =
      std::min(height, static_cast<int>(std::ceil(placed.center_y + ey)) + 1);
  int x_lo = x1, y_lo = y1, x_hi = -1, y_hi = -1;
  const Coverage covers(placed);
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      if (!covers(x + 0.5, y + 0.5)) continue;
      x_lo = std::min(x_lo, x);
      y_lo = std::min(y_lo, y);
      x_hi = std::max(x_hi, x);
      y_hi = std::max(y_hi, y);
    }
  }
  if (x_hi < 0) return std::nullopt;
  return BBox(x_lo, y_lo, x_hi + 1, y_hi + 1);
}

double OverlapCapFor(TableKind kind, const SceneConfig& config) {
  return IsCluttered(kind) ? config.clutter_cap : config.overlap_cap;
}

bool IsCluttered(TableKind kind) {
  return kind == TableKind::kNTable || kind == TableKind::kEvalDense;
}

void ValidateSceneSpec(const SceneSpec& spec, const SceneConfig& config) {
  if (spec.width <= 0 || spec.height <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "scene dimensions must be positive");
  }
  int novel = 0;
  int base = 0;
  for (const PlacedObject& p : spec.objects) {
    if (p.object.category.role == CategoryRole::kNovel) {
      ++novel;
    } else {
      ++base;
    }
    if (IsNovelArchetype(p.object.shape) !=
        (p.object.category.role == CategoryRole::kNovel)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "object archetype does not match its category role");
    }
  }
  switch (spec.kind) {
    case TableKind::kBTable:
      if (base > kMaxBTableBaseObjects || novel > 1) {
        throw Error(ErrorCode::kInvalidArgument,
                    "B-table holds fewer than 6 base objects and at most 1 novel");
      }
      break;
    case TableKind::kNTable:
      if (base > 0) {
        throw Error(ErrorCode::kInvalidArgument, "N-table holds novel objects only");
      }
      for (const PlacedObject& p : spec.objects) {
        if (p.object.category != spec.objects.front().object.category) {
          throw Error(ErrorCode::kInvalidArgument,
                      "N-table objects must share one category");
        }
      }
      break;
    case TableKind::kEvalDense:
      if (spec.objects.size() > static_cast<std::size_t>(kMaxDenseObjects)) {
        throw Error(ErrorCode::kInvalidArgument,
                    "dense scenes hold at most 22 objects");
      }
      break;
    case TableKind::kEvalSparse:
      break;
  }
  std::vector<BBox> boxes;
  for (const PlacedObject& p : spec.objects) {
    std::optional<BBox> box = RasterBox(p, spec.width, spec.height);
    if (!box) {
      throw Error(ErrorCode::kInvalidArgument, "object covers no pixel");
    }
    if (!RespectsOverlap(*box, boxes, spec.kind, config)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "objects overlap beyond the kind's cap");
    }
    boxes.push_back(*box);
  }
}

RenderedScene GenerateScene(const SceneSpec& spec, const SceneConfig& config,
                            RenderTrace* trace) {
  ValidateSceneSpec(spec, config);
  RenderedScene scene;
  scene.raster = Image(spec.width, spec.height);
  PaintBackground(scene.raster, spec.background, spec.seed,
                  config.noise_amplitude);
  if (trace) {
    trace->masks.clear();
    trace->owner.assign(static_cast<std::size_t>(spec.width) * spec.height, -1);
  }
  for (std::size_t i = 0; i < spec.objects.size(); ++i) {
    const PlacedObject& placed = spec.objects[i];
    RenderTrace::Mask mask = PaintObject(scene.raster, placed, config);
    const std::optional<BBox> box = MaskBox(mask);
    // ValidateSceneSpec guarantees every object covers a pixel.
    scene.ground_truth.push_back(
        Annotation::GroundTruth(*box, placed.object.category));
    if (trace) {
      for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
          if (mask.bits[static_cast<std::size_t>(y) * mask.width + x]) {
            trace->owner[static_cast<std::size_t>(mask.y0 + y) * spec.width +
                         mask.x0 + x] = static_cast<int>(i);
          }
        }
      }
      trace->masks.push_back(std::move(mask));
    }
  }
  return scene;
}

ObjectSpec SampleObject(CategoryId category, Rng& rng,
                        const SceneConfig& config, const Catalog& catalog) {
  const CategoryInfo& info = catalog.Get(category.id);
  ObjectSpec object;
  object.category = info.id;
  object.shape = info.shape;
  object.base_color = info.color;
  object.color_seed = rng.NextU64();
  object.scale = rng.Uniform(config.min_scale, config.max_scale);
  object.rotation = rng.Uniform(-config.max_rotation, config.max_rotation);
  return object;
}

std::optional<PlacedObject> FindPlacement(const SceneSpec& spec,
                                          const ObjectSpec& object, Rng& rng,
                                          const SceneConfig& config) {
  std::vector<BBox> boxes;
  boxes.reserve(spec.objects.size());
  for (const PlacedObject& p : spec.objects) {
    if (auto box = RasterBox(p, spec.width, spec.height)) boxes.push_back(*box);
  }
  const double reach = 0.5 * object.scale * std::sqrt(2.0);
  const double lo_x = reach, hi_x = spec.width - reach;
  const double lo_y = reach, hi_y = spec.height - reach;
  if (!(lo_x < hi_x) || !(lo_y < hi_y)) return std::nullopt;

  // Cluster centers are a pure function of the scene seed.
  std::vector<std::pair<double, double>> centers;
  if (IsCluttered(spec.kind)) {
    Rng center_rng(DeriveSeed(spec.seed, 0x636c7573));
    const int count = spec.kind == TableKind::kNTable ? 1 : config.cluster_count;
    for (int c = 0; c < count; ++c) {
      centers.emplace_back(center_rng.Uniform(0.3, 0.7) * spec.width,
                           center_rng.Uniform(0.3, 0.7) * spec.height);
    }
  }
  for (int attempt = 0; attempt < config.max_attempts; ++attempt) {
    PlacedObject candidate{object, 0.0, 0.0};
    if (!centers.empty() && rng.Bernoulli(config.cluster_probability)) {
      const auto& [cx, cy] =
          centers[rng.UniformInt(0, static_cast<int>(centers.size()) - 1)];
      candidate.center_x = cx + rng.Normal() * config.cluster_spread * spec.width;
      candidate.center_y = cy + rng.Normal() * config.cluster_spread * spec.height;
      if (candidate.center_x < lo_x || candidate.center_x > hi_x ||
          candidate.center_y < lo_y || candidate.center_y > hi_y) {
        continue;
      }
    } else {
      candidate.center_x = rng.Uniform(lo_x, hi_x);
      candidate.center_y = rng.Uniform(lo_y, hi_y);
    }
    const std::optional<BBox> box =
        RasterBox(candidate, spec.width, spec.height);
    if (!box) continue;
    if (RespectsOverlap(*box, boxes, spec.kind, config)) return candidate;
  }
  return std::nullopt;
}

SceneSpec SampleSceneSpec(TableKind kind, std::span<const CategoryId> pool,
                          std::pair<int, int> count_range, std::uint64_t seed,
                          const SceneConfig& config, const Catalog& catalog) {
  if (pool.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "category pool is empty");
  }
  if (count_range.first < 0 || count_range.second < count_range.first) {
    throw Error(ErrorCode::kInvalidArgument, "invalid object count range");
  }
  std::vector<CategoryId> novel, base;
  for (CategoryId c : pool) {
    (c.role == CategoryRole::kNovel ? novel : base).push_back(c);
  }
  switch (kind) {
    case TableKind::kNTable:
      if (pool.size() != 1 || novel.size() != 1) {
        throw Error(ErrorCode::kInvalidArgument,
                    "N-table pool must be a single novel category");
      }
      break;
    case TableKind::kBTable:
      if (!novel.empty()) {
        throw Error(ErrorCode::kInvalidArgument,
                    "B-table scenes are sampled from base categories only");
      }
      if (count_range.second > kMaxBTableBaseObjects) {
        throw Error(ErrorCode::kInvalidArgument,
                    "B-table holds fewer than 6 base objects");
      }
      break;
    case TableKind::kEvalDense:
      if (count_range.second > kMaxDenseObjects) {
        throw Error(ErrorCode::kInvalidArgument,
                    "dense scenes hold at most 22 objects");
      }
      break;
    case TableKind::kEvalSparse:
      break;
  }

  Rng rng(seed);
  SceneSpec spec;
  spec.kind = kind;
  spec.width = spec.height = ImageSideFor(kind, config);
  spec.background = config.table_color;
  spec.seed = rng.NextU64();
  const int count = rng.UniformInt(count_range.first, count_range.second);
  for (int i = 0; i < count; ++i) {
    const std::vector<CategoryId>* group = nullptr;
    if (!novel.empty() && !base.empty()) {
      group = rng.Bernoulli(config.eval_novel_fraction) ? &novel : &base;
    } else {
      group = novel.empty() ? &base : &novel;
    }
    const CategoryId category =
        (*group)[rng.UniformInt(0, static_cast<int>(group->size()) - 1)];
    const ObjectSpec object = SampleObject(category, rng, config, catalog);
    std::optional<PlacedObject> placed = FindPlacement(spec, object, rng, config);
    if (!placed) {
      throw Error(ErrorCode::kPlacementInfeasible,
                  "no admissible position after " +
                      std::to_string(config.max_attempts) + " attempts");
    }
    spec.objects.push_back(*placed);
  }
  return spec;
}

SupportView RenderSupportView(const ObjectSpec& object, int view_index,
                              std::uint64_t seed, const SceneConfig& config) {
  if (view_index < 0) {
    throw Error(ErrorCode::kInvalidArgument, "view index must be non-negative");
  }
  Rng rng(DeriveSeed(seed, 0x76696577, view_index));
  const double spread = config.view_rotation_spread;
  ObjectSpec view = object;
  view.rotation = object.rotation +
                  view_index * (config.view_rotation_floor + spread) +
                  (spread > 0 ? rng.Uniform(-0.5 * spread, 0.5 * spread) : 0.0);
  const double jitter = config.view_scale_jitter;
  view.scale = object.scale *
               (1.0 + (jitter > 0 ? rng.Uniform(-jitter, jitter) : 0.0));
  view.color_seed = object.color_seed;

  // Render at the origin first to find the tight extent, then recenter.
  const int reach = static_cast<int>(std::ceil(view.scale)) + 4;
  PlacedObject probe{view, static_cast<double>(reach), static_cast<double>(reach)};
  const std::optional<BBox> extent = RasterBox(probe, 2 * reach, 2 * reach);
  const int margin = config.support_margin;
  const int w = static_cast<int>(extent->width()) + 2 * margin;
  const int h = static_cast<int>(extent->height()) + 2 * margin;
  PlacedObject placed{view, probe.center_x - extent->x_min() + margin,
                      probe.center_y - extent->y_min() + margin};

  SupportView out;
  out.raster = Image(w, h);
  PaintBackground(out.raster, config.support_background,
                  DeriveSeed(seed, 0x7362, view_index), config.noise_amplitude);
  PaintObject(out.raster, placed, config);
  out.rotation = view.rotation;
  out.scale = view.scale;
  return out;
}

SceneSpec EvalSceneSpec(TableKind kind, int index,
                        std::span<const CategoryId> novel,
                        std::span<const CategoryId> base, std::uint64_t seed,
                        const SceneConfig& config) {
  if (kind != TableKind::kEvalSparse && kind != TableKind::kEvalDense) {
    throw Error(ErrorCode::kInvalidArgument,
                "eval datasets are sparse or dense");
  }
  std::vector<CategoryId> pool(novel.begin(), novel.end());
  pool.insert(pool.end(), base.begin(), base.end());
  const auto range =
      kind == TableKind::kEvalDense ? config.dense_count : config.sparse_count;
  return SampleSceneSpec(
      kind, pool, range,
      DeriveSeed(seed, kEvalNamespace, static_cast<int>(kind), index), config);
}

std::vector<RenderedScene> MakeEvalDataset(
    TableKind kind, int n_images, std::span<const CategoryId> novel,
    std::span<const CategoryId> base, std::uint64_t seed,
    const SceneConfig& config, std::vector<SceneSpec>* specs) {
  if (n_images < 1) {
    throw Error(ErrorCode::kInvalidArgument, "eval dataset needs >= 1 image");
  }
  std::vector<RenderedScene> scenes;
  scenes.reserve(n_images);
  if (specs) specs->clear();
  for (int i = 0; i < n_images; ++i) {
    SceneSpec spec = EvalSceneSpec(kind, i, novel, base, seed, config);
    scenes.push_back(GenerateScene(spec, config));
    if (specs) specs->push_back(std::move(spec));
  }
  return scenes;
}

}  // namespace odip::scenegen
