#ifndef ODIP_GRASP_SIM_GRASP_SIM_H_
#define ODIP_GRASP_SIM_GRASP_SIM_H_

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "odip/core/geometry.h"
#include "odip/scenegen/image_record.h"
#include "odip/scenegen/scenegen.h"

namespace odip::grasp_sim {

// Error model of the box recovered from the robot configuration at release.
struct PlacementNoise {
  double center_sigma = 2.0;  // pixels, per axis
  double scale_sigma = 0.05;  // relative, per side
};

// Black-box grasping system: a Bernoulli success model with restarts.
struct GraspModel {
  double success_probability = 0.85;
  int max_retries = 8;
  PlacementNoise noise;

  // Throws Error(kInvalidArgument) on out-of-range fields.
  void Validate() const;
};

struct Environment {
  scenegen::SceneSpec n_table;
  scenegen::RenderedScene n_render;
  scenegen::SceneSpec b_table;
  scenegen::RenderedScene b_render;
  CategoryId round_category;
  std::uint64_t seed = 0;
};

struct GorResult {
  scenegen::ImageRecord udo_image;
  std::vector<scenegen::ImageRecord> support_images;
  scenegen::ImageRecord moa_image;
  Annotation one_shot_label;
  int grasp_attempts = 0;
};

// Fresh N-table holding only round_category objects and a fresh sparse
// B-table holding base objects only.
Environment ResetEnvironment(CategoryId round_category,
                             std::span<const CategoryId> base_categories,
                             std::pair<int, int> n_novel,
                             std::pair<int, int> n_base, std::uint64_t seed,
                             const scenegen::SceneConfig& config);

// One Grasp-Observe-Release interaction. The UDO capture is taken before the
// grasp; the grasped object is photographed views_per_grasp times, then
// released at a collision-free spot of the B-table, which is captured as the
// MOA image. The one-shot label comes from EstimateReleaseBox.
//
// Throws Error(kGraspExhausted) when 1 + max_retries attempts all fail and
// Error(kPlacementInfeasible) when the B-table has no room.
GorResult GorRound(Environment& env, const GraspModel& grasp,
                   std::uint64_t seed, const scenegen::SceneConfig& config,
                   const std::string& round_key = "round", int stage = 0);

// Coarse box from the release configuration: Gaussian center offset, each
// side scaled by (1 + Gaussian), clipped to the image.
BBox EstimateReleaseBox(const BBox& true_box, const PlacementNoise& noise,
                        int width, int height, std::uint64_t seed);

}  // namespace odip::grasp_sim

#endif  // ODIP_GRASP_SIM_GRASP_SIM_H_
