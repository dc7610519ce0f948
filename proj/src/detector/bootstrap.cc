#include "odip/detector/bootstrap.h"

#include <memory>
#include <string>
#include <vector>

#include "odip/core/random.h"

namespace odip::detector {

using scenegen::ImageRecord;
using scenegen::ImageRole;
using scenegen::TableKind;

DetectorParams BootstrapPretrain(const BootstrapConfig& config,
                                 const scenegen::SceneConfig& scene,
                                 const HeadConfig& head, double margin,
                                 FeatureCache* cache,
                                 const ConvergenceRule& rule) {
  const scenegen::Catalog& catalog = scenegen::Catalog::Default();
  const std::vector<CategoryId> base = catalog.Base();
  const std::uint64_t root = DeriveSeed(config.seed, kPretrainNamespace);

  // Support sets: views of a few instances per base category.
  std::vector<std::vector<SupportSet>> supports(base.size());
  for (std::size_t c = 0; c < base.size(); ++c) {
    for (int o = 0; o < config.support_objects; ++o) {
      Rng rng(DeriveSeed(root, 0x73, base[c].id, o));
      const scenegen::ObjectSpec object =
          scenegen::SampleObject(base[c], rng, scene, catalog);
      std::vector<ImageRecord> views;
      const std::uint64_t view_seed = rng.NextU64();
      for (int v = 0; v < scene.views_per_grasp; ++v) {
        ImageRecord r;
        r.id = "pretrain/support-" + std::to_string(base[c].id) + "-" +
               std::to_string(o) + "-" + std::to_string(v);
        r.role = ImageRole::kSupport;
        r.category = base[c];
        r.source = scenegen::SupportViewSource{object, v, view_seed};
        r.raster = std::make_shared<const Image>(
            scenegen::RenderSupportView(object, v, view_seed, scene).raster);
        views.push_back(std::move(r));
      }
      supports[c].push_back(MakeSupportSet(views, cache));
    }
  }

  std::vector<MetaTask> tasks;
  const int total = config.sparse_scenes + config.dense_scenes;
  for (int i = 0; i < total; ++i) {
    const TableKind kind =
        i < config.sparse_scenes ? TableKind::kEvalSparse : TableKind::kEvalDense;
    const auto range = kind == TableKind::kEvalDense ? scene.dense_count
                                                     : scene.sparse_count;
    const scenegen::SceneSpec spec = scenegen::SampleSceneSpec(
        kind, base, range, DeriveSeed(root, 0x71, i), scene, catalog);
    scenegen::RenderedScene rendered = scenegen::GenerateScene(spec, scene);
    ImageRecord query;
    query.id = "pretrain/query-" + std::to_string(i);
    query.role = ImageRole::kEval;
    query.source = spec;
    query.hidden_ground_truth = rendered.ground_truth;
    query.raster = std::make_shared<const Image>(std::move(rendered.raster));
    for (std::size_t c = 0; c < base.size(); ++c) {
      const SupportSet& support =
          supports[c][(i + c) % supports[c].size()];
      tasks.push_back(
          MakeMetaTask(query, support, query.hidden_ground_truth));
    }
  }
  DetectorParams init =
      DetectorParams::Initial(config.initial_u, config.initial_tau, margin);
  for (int d = kAspectIndex; d < kDescriptorDim; ++d) {
    init.u[d] = config.initial_u_shape;
  }
  return FineTune(init, tasks, config.lr, FineTuneMode::UntilConvergence(),
                  head, cache, rule)
      .params;
}

}  // namespace odip::detector
