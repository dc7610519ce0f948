#include "odip/grasp_sim/grasp_sim.h"

#include <algorithm>
#include <cmath>
#include <memory>

#include "odip/core/error.h"
#include "odip/core/random.h"

namespace odip::grasp_sim {

using scenegen::ImageRecord;
using scenegen::ImageRole;
using scenegen::SceneSpec;
using scenegen::TableKind;

void GraspModel::Validate() const {
  // 0 is accepted so an always-failing grasper can be simulated.
  if (!(success_probability >= 0.0 && success_probability <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "grasp success probability must lie in [0, 1]");
  }
  if (max_retries < 0) {
    throw Error(ErrorCode::kInvalidArgument, "max_retries must be >= 0");
  }
  if (noise.center_sigma < 0.0 || noise.scale_sigma < 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "noise sigmas must be >= 0");
  }
}

Environment ResetEnvironment(CategoryId round_category,
                             std::span<const CategoryId> base_categories,
                             std::pair<int, int> n_novel,
                             std::pair<int, int> n_base, std::uint64_t seed,
                             const scenegen::SceneConfig& config) {
  if (round_category.role != CategoryRole::kNovel) {
    throw Error(ErrorCode::kInvalidArgument, "round category must be novel");
  }
  if (n_base.second > scenegen::kMaxBTableBaseObjects) {
    throw Error(ErrorCode::kInvalidArgument,
                "B-table holds fewer than 6 base objects");
  }
  if (n_novel.first < 1) {
    throw Error(ErrorCode::kInvalidArgument, "N-table needs >= 1 object");
  }
  Environment env;
  env.round_category = round_category;
  env.seed = seed;
  const CategoryId pool[] = {round_category};
  env.n_table = scenegen::SampleSceneSpec(TableKind::kNTable, pool, n_novel,
                                          DeriveSeed(seed, 0x6e), config);
  env.n_render = scenegen::GenerateScene(env.n_table, config);
  env.b_table = scenegen::SampleSceneSpec(TableKind::kBTable, base_categories,
                                          n_base, DeriveSeed(seed, 0x62), config);
  env.b_render = scenegen::GenerateScene(env.b_table, config);
  return env;
}

GorResult GorRound(Environment& env, const GraspModel& grasp,
                   std::uint64_t seed, const scenegen::SceneConfig& config,
                   const std::string& round_key, int stage) {
  grasp.Validate();
  if (env.n_table.objects.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "N-table is empty");
  }
  for (const auto& placed : env.b_table.objects) {
    if (placed.object.category.role == CategoryRole::kNovel) {
      throw Error(ErrorCode::kInvalidArgument,
                  "B-table already holds a novel object; reset first");
    }
  }
  Rng rng(seed);
  GorResult result;

  // (1) UDO capture of the N-table before anything is removed.
  result.udo_image.id = round_key + "/udo";
  result.udo_image.role = ImageRole::kUdoQuery;
  result.udo_image.stage = stage;
  result.udo_image.category = env.round_category;
  result.udo_image.round_key = round_key;
  result.udo_image.raster =
      std::make_shared<const Image>(env.n_render.raster);
  result.udo_image.source = env.n_table;
  result.udo_image.hidden_ground_truth = env.n_render.ground_truth;

  // Grasp with restarts; a failed grasp leaves the table untouched.
  const int n_objects = static_cast<int>(env.n_table.objects.size());
  int picked = -1;
  for (int attempt = 0; attempt <= grasp.max_retries; ++attempt) {
    const int candidate = rng.UniformInt(0, n_objects - 1);
    ++result.grasp_attempts;
    if (rng.Bernoulli(grasp.success_probability)) {
      picked = candidate;
      break;
    }
  }
  if (picked < 0) {
    throw Error(ErrorCode::kGraspExhausted,
                "all " + std::to_string(result.grasp_attempts) +
                    " grasp attempts failed");
  }
  scenegen::ObjectSpec object = env.n_table.objects[picked].object;

  // (2) Observe.
  const std::uint64_t view_seed = rng.NextU64();
  for (int v = 0; v < config.views_per_grasp; ++v) {
    ImageRecord view;
    view.id = round_key + "/support-" + std::to_string(v);
    view.role = ImageRole::kSupport;
    view.stage = stage;
    view.category = env.round_category;
    view.round_key = round_key;
    view.source = scenegen::SupportViewSource{object, v, view_seed};
    view.raster = std::make_shared<const Image>(
        scenegen::RenderSupportView(object, v, view_seed, config).raster);
    result.support_images.push_back(std::move(view));
  }

  // (3) Release onto the B-table at a free spot; it lands at a new angle.
  object.rotation = rng.Uniform(-config.max_rotation, config.max_rotation);
  const std::optional<scenegen::PlacedObject> placed =
      scenegen::FindPlacement(env.b_table, object, rng, config);
  if (!placed) {
    throw Error(ErrorCode::kPlacementInfeasible,
                "no collision-free release position on the B-table");
  }
  env.n_table.objects.erase(env.n_table.objects.begin() + picked);
  env.n_render = scenegen::GenerateScene(env.n_table, config);
  env.b_table.objects.push_back(*placed);
  env.b_render = scenegen::GenerateScene(env.b_table, config);

  result.moa_image.id = round_key + "/moa";
  result.moa_image.role = ImageRole::kMoaQuery;
  result.moa_image.stage = stage;
  result.moa_image.category = env.round_category;
  result.moa_image.round_key = round_key;
  result.moa_image.raster = std::make_shared<const Image>(env.b_render.raster);
  result.moa_image.source = env.b_table;
  result.moa_image.hidden_ground_truth = env.b_render.ground_truth;

  const BBox true_box = env.b_render.ground_truth.back().box;
  result.one_shot_label = Annotation::RobotEstimate(
      EstimateReleaseBox(true_box, grasp.noise, env.b_table.width,
                         env.b_table.height, rng.NextU64()),
      env.round_category);
  return result;
}

BBox EstimateReleaseBox(const BBox& true_box, const PlacementNoise& noise,
                        int width, int height, std::uint64_t seed) {
  Rng rng(seed);
  const double dx = noise.center_sigma * rng.Normal();
  const double dy = noise.center_sigma * rng.Normal();
  const double sx = std::max(0.1, 1.0 + noise.scale_sigma * rng.Normal());
  const double sy = std::max(0.1, 1.0 + noise.scale_sigma * rng.Normal());
  const double cx = std::clamp(true_box.center_x() + dx, 0.0, double(width));
  const double cy = std::clamp(true_box.center_y() + dy, 0.0, double(height));
  const double hw = 0.5 * true_box.width() * sx;
  const double hh = 0.5 * true_box.height() * sy;
  // The center stays inside the image, so the clipped box is non-empty.
  return ClipToImage(BBox(cx - hw, cy - hh, cx + hw, cy + hh), width, height);
}

}  // namespace odip::grasp_sim
