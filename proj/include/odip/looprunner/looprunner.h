#ifndef ODIP_LOOPRUNNER_LOOPRUNNER_H_
#define ODIP_LOOPRUNNER_LOOPRUNNER_H_

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "odip/detector/bootstrap.h"
#include "odip/detector/detector.h"
#include "odip/evalkit/evalkit.h"
#include "odip/evalkit/report.h"
#include "odip/grasp_sim/grasp_sim.h"
#include "odip/looprunner/database.h"
#include "odip/scenegen/scenegen.h"

namespace odip::looprunner {

enum class SupportSampling { kMostRecent, kRandom };

std::string_view SupportSamplingName(SupportSampling sampling);
SupportSampling ParseSupportSampling(std::string_view name);

struct RunConfig {
  int T = 16;
  int N = 16;
  int L = 16;
  double eta = 1e-4;
  int k = 3;
  // Stage -> novel categories introduced at that stage.
  std::map<int, std::vector<CategoryId>> schedule;
  std::vector<CategoryId> base_categories;
  double tau_pseudo = 0.6;
  AblationMode mode = AblationMode::kJoint;

  double joint_lr = 0.5;
  bool warm_start = false;
  // Pseudo-label every UDO image against every active category instead of
  // only the category the round put on the N-table.
  bool cross_category_scan = false;
  // Extra task passes that condition entries on other categories' supports.
  int cross_category_passes = 1;
  double pseudo_weight = 1.0;
  // Supports conditioning pseudo-label inference.
  SupportSampling support_sampling = SupportSampling::kMostRecent;

  std::pair<int, int> n_novel{5, 10};
  std::pair<int, int> n_base{3, 5};
  grasp_sim::GraspModel grasp;

  int eval_sparse_images = 100;
  int eval_dense_images = 60;
  // Random draws average eval_draws seeded support sets per category.
  SupportSampling eval_support_sampling = SupportSampling::kRandom;
  int eval_draws = 10;
  bool track_pseudo_quality = true;

  std::uint64_t seed = 1;
  scenegen::SceneConfig scene;
  detector::HeadConfig head;
  detector::ConvergenceRule rule;
  detector::BootstrapConfig bootstrap;
  double margin = 0.15;

  // Throws Error(kConfig) on violated invariants.
  void Validate() const;
  // Novel categories introduced at or before `stage`, by id.
  std::vector<CategoryId> ActiveCategories(int stage) const;
  std::vector<CategoryId> AllNovelCategories() const;
};

// What happened inside one stage; kept for inspection, not persisted.
struct StageTrace {
  int rounds = 0;
  int grasp_attempts = 0;
  int pseudo_images = 0;
  int fine_tune_tasks = 0;
  int pseudo_tasks = 0;
  int skipped_tasks = 0;
  int fine_tune_updates = 0;
  int polish_tasks = 0;
  int polish_pseudo_annotations = 0;
  int polish_updates = 0;
  // The params fine-tuning started from equal params_0 byte for byte.
  bool started_from_initial = false;
};

struct StageState {
  int t = 0;
  DatabaseBundle bundle;
  detector::DetectorParams params_0;
  detector::DetectorParams params_current;
  std::vector<CategoryId> categories;
  std::vector<evalkit::MetricsReport> history;
  std::uint64_t seed = 0;
  StageTrace last_trace;
};

StageState InitialState(const RunConfig& config,
                        detector::DetectorParams params_0);

// Shared caches for a run: proposal analyses and the held-out eval sets.
class RunContext {
 public:
  RunContext(const RunConfig& config, std::string config_hash);

  detector::FeatureCache& cache() { return cache_; }
  const std::string& config_hash() const { return config_hash_; }
  const evalkit::EvalDataset& eval_sparse();
  const evalkit::EvalDataset& eval_dense();

  // Called with (stage, message) at stage milestones.
  std::function<void(int, const std::string&)> log;

 private:
  const RunConfig& config_;
  std::string config_hash_;
  detector::FeatureCache cache_;
  std::optional<evalkit::EvalDataset> sparse_;
  std::optional<evalkit::EvalDataset> dense_;
};

// Builds f_theta0 with the configured bootstrap routine.
detector::DetectorParams BuildInitialParams(const RunConfig& config,
                                            detector::FeatureCache* cache);

// One stage: GOR rounds for every active category, pseudo labels from the
// previous params, reset to params_0, fine-tune on D_All, MOA polish, then
// evaluation. Throws what grasp_sim throws; the input state is untouched.
StageState RunStage(const StageState& state, const RunConfig& config,
                    RunContext& context);

// Conditions every UDO image on k supports of its round category (or of every
// active category with cross_scan) and keeps detections scoring >= tau_pseudo.
std::vector<PseudoEntry> InferPseudoLabels(
    std::span<const scenegen::ImageRecord> udo, const DatabaseBundle& bundle,
    const detector::DetectorParams& params, const RunConfig& config,
    std::span<const CategoryId> categories, int stage,
    detector::FeatureCache& cache);

// L fixed-step updates at rate eta on tasks built from D_MOA and D_Support.
detector::FineTuneResult MoaPolish(const detector::DetectorParams& params,
                                   const DatabaseBundle& bundle,
                                   const RunConfig& config,
                                   std::span<const CategoryId> categories,
                                   std::uint64_t seed,
                                   detector::FeatureCache& cache,
                                   StageTrace* trace = nullptr);

// The support sampler used for evaluation at the given state.
evalkit::SupportSampler MakeEvalSampler(const DatabaseBundle& bundle,
                                        const RunConfig& config, int stage,
                                        detector::FeatureCache& cache);

}  // namespace odip::looprunner

#endif  // ODIP_LOOPRUNNER_LOOPRUNNER_H_
