#ifndef ODIP_DETECTOR_DETECTOR_H_
#define ODIP_DETECTOR_DETECTOR_H_

#include <map>
#include <span>
#include <string>
#include <vector>

#include "odip/core/geometry.h"
#include "odip/core/image.h"
#include "odip/detector/features.h"
#include "odip/scenegen/image_record.h"

namespace odip::detector {

// Trainable state of the detector. Effective metric weights are u_d^2, so they
// stay non-negative under any update.
struct DetectorParams {
  std::vector<double> u;
  double tau = 0.5;
  double margin = 0.15;
  // Support descriptors kept by the last fine-tune, by category id. Scoring
  // compares candidates with these as well as with the support's shots.
  std::map<int, std::vector<Descriptor>> prototypes;

  static DetectorParams Initial(double u0 = 1.0, double tau = 0.5,
                                double margin = 0.15);

  double weight(int d) const { return u[d] * u[d]; }

  friend bool operator==(const DetectorParams&, const DetectorParams&) = default;
};

struct SupportSet {
  CategoryId category;
  std::vector<std::string> image_ids;
  std::vector<Descriptor> shots;
};

// Describes each support record (through the cache when given). Throws
// Error(kEmptySupport) on an empty span and Error(kInvalidArgument) when the
// records disagree on category.
SupportSet MakeSupportSet(std::span<const scenegen::ImageRecord> records,
                          FeatureCache* cache = nullptr);

enum class ShotReduction { kMax, kMean };

struct HeadConfig {
  double detect_nms_iou = 0.5;
  int max_detections = 100;
  double positive_iou = 0.5;
  double negative_iou = 0.3;
  double negative_weight = 1.0;  // lambda
  // Step size of tau relative to the metric weights during fine-tuning.
  double threshold_lr_scale = 1.0;
  // Prototype selection after fine-tuning.
  int max_prototypes = 64;
  double prototype_negative_cost = 1.0;
  ShotReduction reduction = ShotReduction::kMax;
};

// exp(-sum_d w_d (c_d - s_d)^2), reduced over the support's shots followed by
// the stored prototypes of the support's category.
double Score(const Descriptor& candidate, const SupportSet& support,
             const DetectorParams& params,
             ShotReduction reduction = ShotReduction::kMax);

// Keeps proposals scoring above tau, then per-category NMS; boxes are always
// proposals. At most max_detections, by descending score.
std::vector<Detection> Detect(const AnalyzedImage& analysis,
                              const SupportSet& support,
                              const DetectorParams& params,
                              const HeadConfig& head = {});
std::vector<Detection> Detect(const Image& image, const SupportSet& support,
                              const DetectorParams& params,
                              const HeadConfig& head = {},
                              const ProposalConfig& proposals = {});

struct MetaTask {
  scenegen::ImageRecord query;
  SupportSet support;
  // Only annotations of the support category.
  std::vector<Annotation> positives;
  // Relative weight in the full-batch objective.
  double weight = 1.0;
};

// Filters annotations down to the support category.
MetaTask MakeMetaTask(scenegen::ImageRecord query, SupportSet support,
                      std::span<const Annotation> annotations,
                      double weight = 1.0);

// A task with proposals already described and assigned.
struct PreparedTask {
  std::string key;
  std::vector<Descriptor> positives;
  std::vector<Descriptor> negatives;
  std::vector<Descriptor> shots;
  CategoryId category;
  double weight = 1.0;
  bool has_pseudo = false;
};

// Proposals with IoU >= positive_iou against some positive are positives,
// those with IoU <= negative_iou against all are negatives, the rest ignored.
// Throws Error(kDegenerateTask) when the query yields no proposals.
PreparedTask PrepareTask(const MetaTask& task, const HeadConfig& head,
                         FeatureCache* cache = nullptr);

struct LossGradient {
  double loss = 0.0;
  std::vector<double> grad_u;
  double grad_tau = 0.0;
};

// mean_pos max(0, tau + m - s) + lambda * mean_neg max(0, s - tau + m), with
// its exact (sub)gradient in (u, tau).
LossGradient PreparedTaskLoss(const DetectorParams& params,
                              const PreparedTask& task, const HeadConfig& head);
LossGradient TaskLoss(const DetectorParams& params, const MetaTask& task,
                      const HeadConfig& head = {},
                      FeatureCache* cache = nullptr);

struct FineTuneMode {
  enum class Kind { kUntilConvergence, kFixedSteps };
  Kind kind = Kind::kUntilConvergence;
  int steps = 0;
  // When false the prototype store of init is carried over unchanged.
  bool rebuild_prototypes = true;

  static FineTuneMode UntilConvergence() { return {Kind::kUntilConvergence, 0}; }
  static FineTuneMode FixedSteps(int steps) { return {Kind::kFixedSteps, steps}; }
};

struct ConvergenceRule {
  double min_improvement = 1e-4;
  int patience = 5;
  int max_epochs = 200;
};

struct FineTuneResult {
  DetectorParams params;
  int updates = 0;
  // Objective before each update, then after the last one.
  std::vector<double> loss_history;
  int skipped_tasks = 0;
};

// Full-batch gradient descent on the weighted mean task loss. Tasks are put in
// a canonical order first, so the result does not depend on input order.
// Degenerate tasks are skipped and counted. Afterwards the prototype store is
// rebuilt per category by greedy selection among the tasks' support shots:
// shots are added while the positives they newly cover outweigh the
// negatives they newly fire on (see HeadConfig).
FineTuneResult FineTune(const DetectorParams& init,
                        std::span<const MetaTask> tasks, double lr,
                        FineTuneMode mode, const HeadConfig& head = {},
                        FeatureCache* cache = nullptr,
                        const ConvergenceRule& rule = {});
FineTuneResult FineTunePrepared(const DetectorParams& init,
                                std::vector<PreparedTask> tasks, double lr,
                                FineTuneMode mode, const HeadConfig& head = {},
                                const ConvergenceRule& rule = {},
                                int skipped_tasks = 0);

}  // namespace odip::detector

#endif  // ODIP_DETECTOR_DETECTOR_H_
