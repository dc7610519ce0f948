#include <cmath>

#include "doctest.h"
#include "odip/core/error.h"
#include "odip/grasp_sim/grasp_sim.h"

using namespace odip;
using namespace odip::grasp_sim;
using scenegen::Catalog;
using scenegen::SceneConfig;

namespace {

Environment MakeEnv(std::uint64_t seed, std::pair<int, int> n_novel = {5, 10},
                    std::pair<int, int> n_base = {3, 5}) {
  const std::vector<CategoryId> base = Catalog::Default().Base();
  return ResetEnvironment(Catalog::Default().Id("cube"), base, n_novel, n_base,
                          seed, SceneConfig{});
}

int NovelCount(const std::vector<Annotation>& gt) {
  int n = 0;
  for (const Annotation& a : gt) n += a.category.role == CategoryRole::kNovel;
  return n;
}

GraspModel Exact() {
  GraspModel g;
  g.success_probability = 1.0;
  g.noise = {0.0, 0.0};
  return g;
}

}  // namespace

TEST_CASE("reset environment") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const Environment env = MakeEnv(seed);
    const auto& b = env.b_render.ground_truth;
    CHECK(b.size() >= 3);
    CHECK(b.size() <= 5);
    CHECK(NovelCount(b) == 0);
    for (const Annotation& a : env.n_render.ground_truth) {
      CHECK(a.category == Catalog::Default().Id("cube"));
    }
  }
  CHECK(MakeEnv(1, {1, 1}).n_table.objects.size() == 1);
  const Environment a = MakeEnv(4), b = MakeEnv(4);
  CHECK(a.n_table == b.n_table);
  CHECK(a.b_table == b.b_table);
  CHECK(a.n_render.raster == b.n_render.raster);
  CHECK_THROWS_AS(MakeEnv(1, {5, 10}, {3, 6}), Error);
}

TEST_CASE("exact grasp and release reproduce the true box") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Environment env = MakeEnv(seed);
    const GorResult r = GorRound(env, Exact(), seed, SceneConfig{});
    const auto& gt = r.moa_image.hidden_ground_truth;
    REQUIRE(NovelCount(gt) == 1);
    CHECK(r.one_shot_label.box == gt.back().box);
    CHECK(Iou(r.one_shot_label.box, gt.back().box) == 1.0);
  }
}

TEST_CASE("an always-failing grasper gives up after 1 + max_retries attempts") {
  Environment env = MakeEnv(3);
  GraspModel g;
  g.success_probability = 0.0;
  g.max_retries = 3;
  try {
    GorRound(env, g, 1, SceneConfig{});
    FAIL("expected GraspExhausted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kGraspExhausted);
    CHECK(std::string(e.what()).find("all 4 grasp attempts") !=
          std::string::npos);
  }
}

TEST_CASE("rounds conserve objects and label provenance") {
  const SceneConfig config;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    Environment env = MakeEnv(seed);
    const std::size_t n_before = env.n_table.objects.size();
    const GorResult r = GorRound(env, GraspModel{}, seed + 100, config, "k");
    CHECK(env.n_table.objects.size() == n_before - 1);
    CHECK(NovelCount(env.b_render.ground_truth) == 1);
    CHECK(NovelCount(r.moa_image.hidden_ground_truth) == 1);
    CHECK(r.udo_image.hidden_ground_truth.size() == n_before);
    CHECK(r.support_images.size() ==
          static_cast<std::size_t>(config.views_per_grasp));
    CHECK_FALSE(r.one_shot_label.is_pseudo);
    CHECK(r.one_shot_label.confidence == 1.0);
    CHECK(r.one_shot_label.category == Catalog::Default().Id("cube"));
    CHECK(r.grasp_attempts >= 1);
  }
}

TEST_CASE("rounds are reproducible") {
  Environment a = MakeEnv(9), b = MakeEnv(9);
  const GorResult ra = GorRound(a, GraspModel{}, 5, SceneConfig{}, "r");
  const GorResult rb = GorRound(b, GraspModel{}, 5, SceneConfig{}, "r");
  CHECK(ra.one_shot_label == rb.one_shot_label);
  CHECK(*ra.udo_image.raster == *rb.udo_image.raster);
  CHECK(*ra.moa_image.raster == *rb.moa_image.raster);
  CHECK(ra.moa_image.source == rb.moa_image.source);
  REQUIRE(ra.support_images.size() == rb.support_images.size());
  for (std::size_t i = 0; i < ra.support_images.size(); ++i) {
    CHECK(*ra.support_images[i].raster == *rb.support_images[i].raster);
  }
  CHECK(a.b_table == b.b_table);
}

TEST_CASE("release box estimate") {
  const BBox truth(40, 50, 70, 90);
  CHECK(EstimateReleaseBox(truth, {0.0, 0.0}, 256, 256, 3) == truth);

  double sx = 0.0, sy = 0.0;
  const int trials = 10000;
  for (int i = 0; i < trials; ++i) {
    const BBox b = EstimateReleaseBox(truth, {2.0, 0.0}, 256, 256, i);
    sx += std::abs(b.center_x() - truth.center_x());
    sy += std::abs(b.center_y() - truth.center_y());
  }
  CHECK(sx / trials >= 1.5);
  CHECK(sx / trials <= 2.1);
  CHECK(sy / trials >= 1.5);
  CHECK(sy / trials <= 2.1);

  const BBox edge(0, 0, 20, 20);
  for (int i = 0; i < 200; ++i) {
    const BBox b = EstimateReleaseBox(edge, {6.0, 0.3}, 256, 256, i);
    CHECK(b.x_min() >= 0.0);
    CHECK(b.y_min() >= 0.0);
  }
  const BBox corner(236, 236, 256, 256);
  for (int i = 0; i < 200; ++i) {
    const BBox b = EstimateReleaseBox(corner, {6.0, 0.3}, 256, 256, i);
    CHECK(b.x_max() <= 256.0);
    CHECK(b.y_max() <= 256.0);
  }
}

TEST_CASE("label quality falls as release noise grows") {
  std::vector<double> mean_iou;
  for (double sigma : {0.0, 2.0, 6.0}) {
    GraspModel g;
    g.success_probability = 1.0;
    g.noise = {sigma, 0.0};
    double sum = 0.0;
    const int rounds = 1000;
    for (int i = 0; i < rounds; ++i) {
      Environment env = MakeEnv(i, {1, 3}, {0, 2});
      const GorResult r = GorRound(env, g, i, SceneConfig{});
      sum += Iou(r.one_shot_label.box, r.moa_image.hidden_ground_truth.back().box);
    }
    mean_iou.push_back(sum / rounds);
  }
  CHECK(mean_iou[0] == 1.0);
  CHECK(mean_iou[1] < mean_iou[0]);
  CHECK(mean_iou[2] < mean_iou[1]);
}
