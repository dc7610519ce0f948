#include "odip/looprunner/looprunner.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "odip/core/error.h"
#include "odip/core/parallel.h"
#include "odip/core/random.h"
#include "odip/detector/params_io.h"

namespace odip::looprunner {
namespace {

using detector::DetectorParams;
using scenegen::ImageRecord;

std::string RoundKey(int stage, CategoryId category, int round) {
  return "s" + std::to_string(stage) + "/c" + std::to_string(category.id) +
         "/r" + std::to_string(round);
}

void Log(RunContext& context, int stage, const std::string& message) {
  if (context.log) context.log(stage, message);
}

int CrossPasses(const RunConfig& config, std::size_t n_categories) {
  return n_categories > 1 ? config.cross_category_passes : 0;
}

std::vector<ImageRecord> PseudoSupports(const DatabaseBundle& bundle,
                                        CategoryId category,
                                        const RunConfig& config, int stage) {
  if (config.support_sampling == SupportSampling::kMostRecent) {
    return RecentSupports(bundle, category, config.k);
  }
  return SampleSupports(bundle, category, config.k, "",
                        DeriveSeed(config.seed, kTrainNamespace, stage,
                                   category.id, 0x5053));
}

}  // namespace

std::string_view SupportSamplingName(SupportSampling sampling) {
  return sampling == SupportSampling::kMostRecent ? "most-recent" : "random";
}

SupportSampling ParseSupportSampling(std::string_view name) {
  if (name == "most-recent") return SupportSampling::kMostRecent;
  if (name == "random") return SupportSampling::kRandom;
  throw Error(ErrorCode::kInvalidArgument,
              "unknown support sampling: " + std::string(name));
}

void RunConfig::Validate() const {
  auto fail = [](const std::string& what) {
    throw Error(ErrorCode::kConfig, what);
  };
  if (T < 1) fail("T must be >= 1");
  if (N < 1) fail("N must be >= 1");
  if (L < 0) fail("L must be >= 0");
  if (!(eta > 0.0) || !std::isfinite(eta)) fail("eta must be > 0");
  if (k < 1) fail("k must be >= 1");
  if (!(tau_pseudo >= 0.0 && tau_pseudo <= 1.0)) {
    fail("tau_pseudo must lie in [0, 1]");
  }
  if (!(joint_lr > 0.0)) fail("joint_lr must be > 0");
  if (!(pseudo_weight > 0.0)) fail("pseudo_weight must be > 0");
  if (cross_category_passes < 0) fail("cross_category_passes must be >= 0");
  if (schedule.empty()) fail("no categories scheduled");
  std::set<int> seen;
  for (const auto& [stage, categories] : schedule) {
    if (stage < 1 || stage > T) fail("scheduled stage outside [1, T]");
    for (CategoryId c : categories) {
      if (c.role != CategoryRole::kNovel) fail("scheduled category is not novel");
      if (!seen.insert(c.id).second) fail("category scheduled twice");
    }
  }
  for (CategoryId c : base_categories) {
    if (c.role != CategoryRole::kBase) fail("base category list holds a novel one");
  }
  if (n_novel.first < 1 || n_novel.first > n_novel.second) {
    fail("bad novel object range");
  }
  if (n_base.first < 0 || n_base.first > n_base.second ||
      n_base.second > scenegen::kMaxBTableBaseObjects) {
    fail("bad base object range");
  }
  if (eval_sparse_images < 1 || eval_dense_images < 1) {
    fail("eval sets need >= 1 image");
  }
  if (eval_draws < 1) fail("eval_draws must be >= 1");
  try {
    grasp.Validate();
  } catch (const Error& e) {
    fail(e.what());
  }
}

std::vector<CategoryId> RunConfig::ActiveCategories(int stage) const {
  std::vector<CategoryId> out;
  for (const auto& [s, categories] : schedule) {
    if (s <= stage) out.insert(out.end(), categories.begin(), categories.end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<CategoryId> RunConfig::AllNovelCategories() const {
  return ActiveCategories(T);
}

StageState InitialState(const RunConfig& config, DetectorParams params_0) {
  config.Validate();
  StageState state;
  state.params_current = params_0;
  state.params_0 = std::move(params_0);
  state.seed = config.seed;
  return state;
}

RunContext::RunContext(const RunConfig& config, std::string config_hash)
    : config_(config), config_hash_(std::move(config_hash)) {}

const evalkit::EvalDataset& RunContext::eval_sparse() {
  if (!sparse_) {
    sparse_ = evalkit::PrepareEvalDataset(
        scenegen::TableKind::kEvalSparse, config_.eval_sparse_images,
        config_.AllNovelCategories(), config_.base_categories, config_.seed,
        config_.scene, cache_);
  }
  return *sparse_;
}

const evalkit::EvalDataset& RunContext::eval_dense() {
  if (!dense_) {
    dense_ = evalkit::PrepareEvalDataset(
        scenegen::TableKind::kEvalDense, config_.eval_dense_images,
        config_.AllNovelCategories(), config_.base_categories, config_.seed,
        config_.scene, cache_);
  }
  return *dense_;
}

DetectorParams BuildInitialParams(const RunConfig& config,
                                  detector::FeatureCache* cache) {
  return detector::BootstrapPretrain(config.bootstrap, config.scene,
                                     config.head, config.margin, cache,
                                     config.rule);
}

std::vector<PseudoEntry> InferPseudoLabels(
    std::span<const ImageRecord> udo, const DatabaseBundle& bundle,
    const DetectorParams& params, const RunConfig& config,
    std::span<const CategoryId> categories, int stage,
    detector::FeatureCache& cache) {
  // One support set per category, shared by every image of that category.
  std::map<int, detector::SupportSet> supports;
  std::set<int> needed;
  for (const ImageRecord& image : udo) needed.insert(image.category.id);
  if (config.cross_category_scan) {
    for (CategoryId c : categories) needed.insert(c.id);
  }
  for (int id : needed) {
    const CategoryId category{id, CategoryRole::kNovel};
    const std::vector<ImageRecord> shots =
        PseudoSupports(bundle, category, config, stage);
    supports.emplace(id, detector::MakeSupportSet(shots, &cache));
  }

  std::vector<PseudoEntry> out(udo.size());
  ParallelFor(udo.size(), [&](std::size_t i) {
    const ImageRecord& image = udo[i];
    const std::shared_ptr<const detector::AnalyzedImage> analysis =
        cache.Analysis(image.id, *image.raster);
    std::vector<int> targets = {image.category.id};
    if (config.cross_category_scan) {
      targets.clear();
      for (int id : needed) targets.push_back(id);
    }
    out[i].image = image;
    for (int id : targets) {
      for (const Detection& d : detector::Detect(*analysis, supports.at(id),
                                                 params, config.head)) {
        if (d.score >= config.tau_pseudo) {
          out[i].labels.push_back(Annotation::Pseudo(
              d.box, d.category, std::clamp(d.score, 0.0, 1.0)));
        }
      }
    }
  });
  return out;
}

detector::FineTuneResult MoaPolish(const DetectorParams& params,
                                   const DatabaseBundle& bundle,
                                   const RunConfig& config,
                                   std::span<const CategoryId> categories,
                                   std::uint64_t seed,
                                   detector::FeatureCache& cache,
                                   StageTrace* trace) {
  if (config.L == 0 || bundle.moa.empty()) {
    detector::FineTuneResult unchanged;
    unchanged.params = params;
    return unchanged;
  }
  const std::vector<JointEntry> pool = MoaEntries(bundle.moa);
  const int n_tasks = static_cast<int>(pool.size()) *
                      (1 + CrossPasses(config, categories.size()));
  std::vector<detector::MetaTask> tasks;
  int pseudo_annotations = 0;
  for (SampledTask& s :
       SampleTaskSet(pool, bundle, categories, config.k, n_tasks, seed, &cache)) {
    for (const Annotation& a : s.task.positives) pseudo_annotations += a.is_pseudo;
    tasks.push_back(std::move(s.task));
  }
  if (pseudo_annotations != 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "pseudo annotation reached an MOA polish task");
  }
  // The polish only nudges the metric; the prototypes chosen on D_All stay.
  detector::FineTuneMode mode = detector::FineTuneMode::FixedSteps(config.L);
  mode.rebuild_prototypes = false;
  detector::FineTuneResult result = detector::FineTune(
      params, tasks, config.eta, mode, config.head, &cache, config.rule);
  if (trace) {
    trace->polish_tasks = static_cast<int>(tasks.size());
    trace->polish_pseudo_annotations = pseudo_annotations;
    trace->polish_updates = result.updates;
  }
  return result;
}

evalkit::SupportSampler MakeEvalSampler(const DatabaseBundle& bundle,
                                        const RunConfig& config, int stage,
                                        detector::FeatureCache& cache) {
  return [&bundle, &config, &cache, stage](CategoryId category, int k) {
    std::vector<detector::SupportSet> draws;
    if (config.eval_support_sampling == SupportSampling::kMostRecent) {
      draws.push_back(
          detector::MakeSupportSet(RecentSupports(bundle, category, k), &cache));
      return draws;
    }
    for (int d = 0; d < config.eval_draws; ++d) {
      draws.push_back(detector::MakeSupportSet(
          SampleSupports(bundle, category, k, "",
                         DeriveSeed(config.seed, kEvalNamespace, stage,
                                    category.id, d)),
          &cache));
    }
    return draws;
  };
}

StageState RunStage(const StageState& state, const RunConfig& config,
                    RunContext& context) {
  config.Validate();
  if (state.t >= config.T) {
    throw Error(ErrorCode::kInvalidArgument, "run already reached stage T");
  }
  StageState next = state;
  const int t = state.t + 1;
  next.t = t;
  next.last_trace = {};
  StageTrace& trace = next.last_trace;
  if (const auto it = config.schedule.find(t); it != config.schedule.end()) {
    for (CategoryId c : it->second) next.categories.push_back(c);
  }
  const std::vector<CategoryId>& active = next.categories;
  DatabaseBundle& bundle = next.bundle;

  // Collection: N GOR rounds per active category, each on a fresh table pair.
  for (CategoryId category : active) {
    for (int n = 0; n < config.N; ++n) {
      const std::uint64_t round_seed =
          DeriveSeed(state.seed, kTrainNamespace, t, category.id, n);
      grasp_sim::Environment env = grasp_sim::ResetEnvironment(
          category, config.base_categories, config.n_novel, config.n_base,
          DeriveSeed(round_seed, 1), config.scene);
      const grasp_sim::GorResult round =
          grasp_sim::GorRound(env, config.grasp, DeriveSeed(round_seed, 2),
                              config.scene, RoundKey(t, category, n), t);
      bundle.AppendRound(round);
      ++trace.rounds;
      trace.grasp_attempts += round.grasp_attempts;
    }
  }
  Log(context, t, "collected " + std::to_string(trace.rounds) + " rounds");

  // Pseudo labels for all of D_UDO from the previous stage's detector.
  bundle.pseudo = InferPseudoLabels(bundle.udo, bundle, state.params_current,
                                    config, active, t, context.cache());
  trace.pseudo_images = static_cast<int>(bundle.pseudo.size());

  const std::vector<JointEntry> all =
      BuildJointSet(bundle.pseudo, bundle.moa, config.mode, config.pseudo_weight);
  const DetectorParams& start =
      config.warm_start ? state.params_current : state.params_0;
  trace.started_from_initial = detector::SerializeParams(start) ==
                               detector::SerializeParams(state.params_0);

  const int n_tasks =
      static_cast<int>(all.size()) * (1 + CrossPasses(config, active.size()));
  std::vector<detector::MetaTask> tasks;
  for (SampledTask& s : SampleTaskSet(all, bundle, active, config.k, n_tasks,
                                      DeriveSeed(state.seed, kTrainNamespace,
                                                 t, 0x6a6f696e),
                                      &context.cache())) {
    trace.pseudo_tasks += s.source == EntrySource::kPseudo;
    tasks.push_back(std::move(s.task));
  }
  trace.fine_tune_tasks = static_cast<int>(tasks.size());
  DetectorParams params = start;
  if (!tasks.empty()) {
    detector::FineTuneResult tuned = detector::FineTune(
        start, tasks, config.joint_lr,
        detector::FineTuneMode::UntilConvergence(), config.head,
        &context.cache(), config.rule);
    trace.skipped_tasks = tuned.skipped_tasks;
    trace.fine_tune_updates = tuned.updates;
    params = std::move(tuned.params);
  }
  tasks.clear();
  Log(context, t,
      "fine-tuned on " + std::to_string(trace.fine_tune_tasks) + " tasks in " +
          std::to_string(trace.fine_tune_updates) + " updates");

  // udo-only never touches MOA data, so it skips the polish as well.
  if (config.mode != AblationMode::kUdoOnly) {
    params = MoaPolish(params, bundle, config, active,
                       DeriveSeed(state.seed, kTrainNamespace, t, 0x706f6c),
                       context.cache(), &trace)
                 .params;
  }
  next.params_current = std::move(params);

  evalkit::MetricsReport report;
  report.stage = t;
  report.mode = std::string(AblationModeName(config.mode));
  report.config_hash = context.config_hash();
  report.sizes = {static_cast<int>(bundle.udo.size()),
                  static_cast<int>(bundle.moa.size()), bundle.SupportCount(),
                  bundle.PseudoAnnotationCount()};
  const evalkit::SupportSampler sampler =
      MakeEvalSampler(bundle, config, t, context.cache());
  report.sparse = evalkit::EvaluateModel(next.params_current, sampler,
                                         context.eval_sparse(), config.k,
                                         active, config.head);
  report.dense = evalkit::EvaluateModel(next.params_current, sampler,
                                        context.eval_dense(), config.k, active,
                                        config.head);
  if (config.track_pseudo_quality) {
    std::vector<std::vector<Annotation>> pseudo, truth;
    for (const PseudoEntry& e : bundle.pseudo) {
      pseudo.push_back(e.labels);
      truth.push_back(e.image.hidden_ground_truth);
    }
    report.pseudo = evalkit::MeasurePseudoQuality(pseudo, truth);
  }
  Log(context, t,
      "sparse AP " + evalkit::FormatMetric(report.sparse.ap) + ", dense AP " +
          evalkit::FormatMetric(report.dense.ap));
  next.history.push_back(std::move(report));
  return next;
}

}  // namespace odip::looprunner
