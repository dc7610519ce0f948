#ifndef ODIP_DETECTOR_BOOTSTRAP_H_
#define ODIP_DETECTOR_BOOTSTRAP_H_

#include <cstdint>

#include "odip/detector/detector.h"
#include "odip/scenegen/scenegen.h"

namespace odip::detector {

// The built-in pretraining world: fully annotated scenes of base categories
// only, with support views of base objects. Fine-tuning on it once yields the
// initial detector that every stage restarts from.
struct BootstrapConfig {
  int sparse_scenes = 40;
  int dense_scenes = 0;
  int support_objects = 4;  // per base category
  double lr = 0.5;
  double initial_u = 1.0;
  // Initial pre-weight of the aspect, fill and moment entries.
  double initial_u_shape = 3.0;
  double initial_tau = 0.5;
  std::uint64_t seed = 0x0d1b'2021;
};

DetectorParams BootstrapPretrain(const BootstrapConfig& config,
                                 const scenegen::SceneConfig& scene,
                                 const HeadConfig& head, double margin,
                                 FeatureCache* cache,
                                 const ConvergenceRule& rule = {});

}  // namespace odip::detector

#endif  // ODIP_DETECTOR_BOOTSTRAP_H_
