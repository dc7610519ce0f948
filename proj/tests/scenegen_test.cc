#include <cmath>
#include <set>

#include "doctest.h"
#include "odip/core/error.h"
#include "odip/core/random.h"
#include "odip/scenegen/image_record.h"
#include "odip/scenegen/scenegen.h"

using namespace odip;
using namespace odip::scenegen;

namespace {

const Catalog& Cat() { return Catalog::Default(); }

void CheckPairwiseOverlap(const SceneSpec& spec, double cap) {
  std::vector<BBox> boxes;
  for (const PlacedObject& p : spec.objects) {
    const auto box = RasterBox(p, spec.width, spec.height);
    REQUIRE(box.has_value());
    boxes.push_back(*box);
  }
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    for (std::size_t j = i + 1; j < boxes.size(); ++j) {
      CHECK(Iou(boxes[i], boxes[j]) <= cap);
    }
  }
}

void CheckScales(const SceneSpec& spec, const SceneConfig& config) {
  for (const PlacedObject& p : spec.objects) {
    CHECK(p.object.scale >= config.min_scale);
    CHECK(p.object.scale <= config.max_scale);
  }
}

int NovelCount(const std::vector<Annotation>& gt) {
  int n = 0;
  for (const Annotation& a : gt) n += a.category.role == CategoryRole::kNovel;
  return n;
}

}  // namespace

TEST_CASE("catalog keeps novel and base archetypes apart") {
  for (const CategoryInfo& c : Cat().all()) {
    CHECK(IsNovelArchetype(c.shape) == (c.id.role == CategoryRole::kNovel));
  }
  CHECK(Cat().Novel().size() == 4);
  CHECK(Cat().Id("can").role == CategoryRole::kNovel);
}

TEST_CASE("rendering is deterministic") {
  const SceneConfig config;
  const std::vector<CategoryId> novel = Cat().Novel(), base = Cat().Base();
  const SceneSpec spec =
      EvalSceneSpec(TableKind::kEvalSparse, 3, novel, base, 9, config);
  const RenderedScene a = GenerateScene(spec, config);
  const RenderedScene b = GenerateScene(spec, config);
  CHECK(a.raster == b.raster);
  CHECK(a.ground_truth == b.ground_truth);
  CHECK(spec == EvalSceneSpec(TableKind::kEvalSparse, 3, novel, base, 9, config));
}

TEST_CASE("dense eval scenes hold at most 22 objects") {
  const SceneConfig config;
  const std::vector<CategoryId> novel = Cat().Novel(), base = Cat().Base();
  SceneSpec spec = SampleSceneSpec(TableKind::kEvalDense, novel, {22, 22}, 4,
                                   config);
  CHECK(GenerateScene(spec, config).ground_truth.size() <= 22);
  const auto scenes =
      MakeEvalDataset(TableKind::kEvalDense, 50, novel, base, 2, config);
  CHECK(scenes.size() == 50);
  for (const RenderedScene& s : scenes) CHECK(s.ground_truth.size() <= 22);
}

TEST_CASE("b-table with five base objects and one released novel object") {
  const SceneConfig config;
  SceneSpec spec = SampleSceneSpec(TableKind::kBTable, Cat().Base(), {5, 5},
                                   17, config);
  Rng rng(3);
  const ObjectSpec novel = SampleObject(Cat().Id("cube"), rng, config);
  const auto placed = FindPlacement(spec, novel, rng, config);
  REQUIRE(placed.has_value());
  spec.objects.push_back(*placed);
  const RenderedScene scene = GenerateScene(spec, config);
  CHECK(scene.ground_truth.size() == 6);
  CHECK(NovelCount(scene.ground_truth) == 1);
}

TEST_CASE("b-table refuses a sixth base object") {
  const SceneConfig config;
  const SceneSpec spec = SampleSceneSpec(TableKind::kBTable, Cat().Base(),
                                         {5, 5}, 17, config);
  Rng rng(8);
  const ObjectSpec wedge = SampleObject(Cat().Id("wedge"), rng, config);
  const auto placed = FindPlacement(spec, wedge, rng, config);
  REQUIRE(placed.has_value());
  SceneSpec extra = spec;
  extra.objects.push_back(*placed);
  try {
    ValidateSceneSpec(extra, config);
    FAIL("expected a rejection");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("fewer than 6") != std::string::npos);
  }
}

TEST_CASE("sampler examples") {
  const SceneConfig config;
  std::vector<CategoryId> pool = Cat().Novel();
  for (CategoryId b : Cat().Base()) pool.push_back(b);

  const SceneSpec sparse =
      SampleSceneSpec(TableKind::kEvalSparse, pool, {4, 7}, 12, config);
  CHECK(sparse.objects.size() >= 4);
  CHECK(sparse.objects.size() <= 7);

  const std::vector<CategoryId> can = {Cat().Id("can")};
  const SceneSpec ntable = SampleSceneSpec(TableKind::kNTable, can, {6, 9}, 12,
                                           config);
  for (const PlacedObject& p : ntable.objects) {
    CHECK(p.object.category == Cat().Id("can"));
  }

  CHECK(SampleSceneSpec(TableKind::kEvalSparse, pool, {1, 1}, 5, config)
            .objects.size() == 1);
}

TEST_CASE("sampler output satisfies the scene invariants") {
  const SceneConfig config;
  const std::vector<CategoryId> novel = Cat().Novel(), base = Cat().Base();
  for (int i = 0; i < 1000; ++i) {
    const SceneSpec sparse =
        EvalSceneSpec(TableKind::kEvalSparse, i, novel, base, 21, config);
    CHECK(sparse.objects.size() >= 4);
    CHECK(sparse.objects.size() <= 7);
    CheckPairwiseOverlap(sparse, config.overlap_cap);
    CheckScales(sparse, config);

    const SceneSpec dense =
        EvalSceneSpec(TableKind::kEvalDense, i, novel, base, 21, config);
    CHECK(dense.objects.size() <= kMaxDenseObjects);
    CheckPairwiseOverlap(dense, config.clutter_cap);
    CheckScales(dense, config);

    const CategoryId one = novel[i % novel.size()];
    const SceneSpec ntable = SampleSceneSpec(
        TableKind::kNTable, std::vector<CategoryId>{one}, {5, 10}, i, config);
    for (const PlacedObject& p : ntable.objects) {
      CHECK(p.object.category == one);
    }
    CheckPairwiseOverlap(ntable, config.clutter_cap);

    const SceneSpec btable =
        SampleSceneSpec(TableKind::kBTable, base, {3, 5}, i, config);
    CHECK(btable.objects.size() < 6);
    for (const PlacedObject& p : btable.objects) {
      CHECK(p.object.category.role == CategoryRole::kBase);
    }
    CheckPairwiseOverlap(btable, config.overlap_cap);
  }
}

TEST_CASE("ground truth is the tight box of each object's drawn pixels") {
  const SceneConfig config;
  const std::vector<CategoryId> novel = Cat().Novel(), base = Cat().Base();
  for (int i = 0; i < 40; ++i) {
    const TableKind kind = i % 2 ? TableKind::kEvalDense : TableKind::kEvalSparse;
    const SceneSpec spec = EvalSceneSpec(kind, i, novel, base, 5, config);
    RenderTrace trace;
    const RenderedScene scene = GenerateScene(spec, config, &trace);
    REQUIRE(trace.masks.size() == spec.objects.size());
    REQUIRE(scene.ground_truth.size() == spec.objects.size());
    for (std::size_t k = 0; k < trace.masks.size(); ++k) {
      int x0 = spec.width, y0 = spec.height, x1 = -1, y1 = -1;
      for (int y = 0; y < spec.height; ++y) {
        for (int x = 0; x < spec.width; ++x) {
          if (!trace.masks[k].at(x, y)) continue;
          x0 = std::min(x0, x);
          y0 = std::min(y0, y);
          x1 = std::max(x1, x);
          y1 = std::max(y1, y);
        }
      }
      REQUIRE(x1 >= 0);
      CHECK(scene.ground_truth[k].box == BBox(x0, y0, x1 + 1, y1 + 1));
      CHECK(scene.ground_truth[k].category == spec.objects[k].object.category);
    }
    // Pixels owned by an object carry its instance color, not the table.
    for (int y = 0; y < spec.height; y += 3) {
      for (int x = 0; x < spec.width; x += 3) {
        const int owner = trace.owner[static_cast<std::size_t>(y) * spec.width + x];
        if (owner < 0) continue;
        CHECK(trace.masks[owner].at(x, y));
      }
    }
  }
}

TEST_CASE("support views") {
  SceneConfig config;
  Rng rng(4);
  const ObjectSpec object = SampleObject(Cat().Id("box"), rng, config);

  SUBCASE("zero jitter gives the canonical tight crop") {
    config.view_rotation_floor = 0.0;
    config.view_rotation_spread = 0.0;
    config.view_scale_jitter = 0.0;
    config.noise_amplitude = 0;
    const SupportView view = RenderSupportView(object, 0, 1, config);
    CHECK(view.rotation == object.rotation);
    CHECK(view.scale == object.scale);
    int x0 = view.raster.width(), y0 = view.raster.height(), x1 = -1, y1 = -1;
    for (int y = 0; y < view.raster.height(); ++y) {
      for (int x = 0; x < view.raster.width(); ++x) {
        if (view.raster.at(x, y) == config.support_background) continue;
        x0 = std::min(x0, x);
        y0 = std::min(y0, y);
        x1 = std::max(x1, x);
        y1 = std::max(y1, y);
      }
    }
    const int m = config.support_margin;
    CHECK(x0 == m);
    CHECK(y0 == m);
    CHECK(x1 == view.raster.width() - 1 - m);
    CHECK(y1 == view.raster.height() - 1 - m);
  }

  SUBCASE("distinct views differ in rotation by at least the floor") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      std::vector<double> rotations;
      for (int v = 0; v < 3; ++v) {
        rotations.push_back(RenderSupportView(object, v, seed, config).rotation);
      }
      for (int a = 0; a < 3; ++a) {
        for (int b = a + 1; b < 3; ++b) {
          CHECK(std::abs(rotations[a] - rotations[b]) >=
                config.view_rotation_floor - 1e-12);
        }
      }
    }
  }

  SUBCASE("same inputs render the same view") {
    CHECK(RenderSupportView(object, 1, 7, config).raster ==
          RenderSupportView(object, 1, 7, config).raster);
  }
}

TEST_CASE("eval datasets") {
  const SceneConfig config;
  const std::vector<CategoryId> novel = Cat().Novel(), base = Cat().Base();
  CHECK_THROWS_AS(
      MakeEvalDataset(TableKind::kEvalSparse, 0, novel, base, 1, config), Error);
  const auto a = MakeEvalDataset(TableKind::kEvalSparse, 5, novel, base, 1, config);
  const auto b = MakeEvalDataset(TableKind::kEvalSparse, 5, novel, base, 1, config);
  for (int i = 0; i < 5; ++i) {
    CHECK(a[i].raster == b[i].raster);
    CHECK(a[i].ground_truth == b[i].ground_truth);
  }
}

TEST_CASE("capture sources re-render bit-exactly") {
  const SceneConfig config;
  Rng rng(2);
  const ObjectSpec object = SampleObject(Cat().Id("cube"), rng, config);
  const CaptureSource view = SupportViewSource{object, 2, 99};
  CHECK(*RenderSource(view, config) ==
        RenderSupportView(object, 2, 99, config).raster);
  const SceneSpec spec = SampleSceneSpec(TableKind::kBTable, Cat().Base(),
                                         {3, 5}, 6, config);
  CHECK(*RenderSource(spec, config) == GenerateScene(spec, config).raster);
}
