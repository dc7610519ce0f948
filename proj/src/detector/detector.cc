#include "odip/detector/detector.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <map>
#include <optional>
#include <string>

#include "odip/core/error.h"
#include "odip/core/parallel.h"

namespace odip::detector {
namespace {

// Weighted squared distance between a candidate and one shot.
double Exponent(const Descriptor& c, const Descriptor& s,
                const std::vector<double>& u) {
  double e = 0.0;
  for (int d = 0; d < kDescriptorDim; ++d) {
    const double gap = c[d] - s[d];
    e += u[d] * u[d] * gap * gap;
  }
  return e;
}

// The shots a candidate is compared with: the support's, then the stored
// prototypes of its category.
struct ShotView {
  std::span<const Descriptor> shots;
  std::span<const Descriptor> prototypes;

  std::size_t size() const { return shots.size() + prototypes.size(); }
  const Descriptor& operator[](std::size_t i) const {
    return i < shots.size() ? shots[i] : prototypes[i - shots.size()];
  }
};

ShotView ViewOf(std::span<const Descriptor> shots, const DetectorParams& params,
                CategoryId category) {
  const auto it = params.prototypes.find(category.id);
  if (it == params.prototypes.end()) return {shots, {}};
  return {shots, it->second};
}

// Adds coef * d(score)/du to grad. Returns the score.
double ScoreWithGradient(const Descriptor& c, const ShotView& shots,
                         const std::vector<double>& u, ShotReduction reduction,
                         double coef, std::vector<double>* grad) {
  if (reduction == ShotReduction::kMax) {
    std::size_t best = 0;
    double best_e = Exponent(c, shots[0], u);
    for (std::size_t j = 1; j < shots.size(); ++j) {
      const double e = Exponent(c, shots[j], u);
      if (e < best_e) {
        best_e = e;
        best = j;
      }
    }
    const double s = std::exp(-best_e);
    if (grad && coef != 0.0) {
      const Descriptor& shot = shots[best];
      for (int d = 0; d < kDescriptorDim; ++d) {
        const double gap = c[d] - shot[d];
        (*grad)[d] += coef * s * (-2.0 * u[d] * gap * gap);
      }
    }
    return s;
  }
  double total = 0.0;
  const double inv = 1.0 / static_cast<double>(shots.size());
  for (std::size_t j = 0; j < shots.size(); ++j) {
    const Descriptor& shot = shots[j];
    const double s = std::exp(-Exponent(c, shot, u));
    total += s * inv;
    if (grad && coef != 0.0) {
      for (int d = 0; d < kDescriptorDim; ++d) {
        const double gap = c[d] - shot[d];
        (*grad)[d] += coef * inv * s * (-2.0 * u[d] * gap * gap);
      }
    }
  }
  return total;
}

// Greedy prototype selection for one category. A candidate shot "fires" on a
// proposal when its single-shot score exceeds tau. Each round adds the shot
// whose newly covered positives minus negative_cost times its newly fired
// negatives is largest, while that gain stays positive.
std::vector<Descriptor> SelectPrototypes(
    const std::vector<Descriptor>& candidates,
    const std::vector<const Descriptor*>& positives,
    const std::vector<const Descriptor*>& negatives, const DetectorParams& p,
    const HeadConfig& head) {
  if (candidates.empty() || head.max_prototypes <= 0) return {};
  const double threshold = -std::log(std::max(p.tau, 1e-300));
  auto fires = [&](const std::vector<const Descriptor*>& items) {
    std::vector<std::vector<std::uint32_t>> out(candidates.size());
    ParallelFor(candidates.size(), [&](std::size_t j) {
      for (std::size_t i = 0; i < items.size(); ++i) {
        if (p.tau < 0.0 || Exponent(*items[i], candidates[j], p.u) < threshold) {
          out[j].push_back(static_cast<std::uint32_t>(i));
        }
      }
    });
    return out;
  };
  const auto pos_hits = fires(positives);
  const auto neg_hits = fires(negatives);
  std::vector<char> pos_covered(positives.size(), 0);
  std::vector<char> neg_fired(negatives.size(), 0);
  std::vector<char> taken(candidates.size(), 0);
  std::vector<Descriptor> selected;
  while (static_cast<int>(selected.size()) < head.max_prototypes) {
    double best_gain = 0.0;
    std::size_t best = candidates.size();
    for (std::size_t j = 0; j < candidates.size(); ++j) {
      if (taken[j]) continue;
      double gain = 0.0;
      for (std::uint32_t i : pos_hits[j]) gain += !pos_covered[i];
      for (std::uint32_t i : neg_hits[j]) gain -= head.prototype_negative_cost * !neg_fired[i];
      if (gain > best_gain) {
        best_gain = gain;
        best = j;
      }
    }
    if (best == candidates.size()) break;
    taken[best] = 1;
    for (std::uint32_t i : pos_hits[best]) pos_covered[i] = 1;
    for (std::uint32_t i : neg_hits[best]) neg_fired[i] = 1;
    selected.push_back(candidates[best]);
  }
  return selected;
}

void RebuildPrototypes(DetectorParams& p, const std::vector<PreparedTask>& tasks,
                       const HeadConfig& head) {
  std::map<int, std::vector<const PreparedTask*>> by_category;
  for (const PreparedTask& t : tasks) by_category[t.category.id].push_back(&t);
  std::map<int, std::vector<Descriptor>> store;
  for (const auto& [id, group] : by_category) {
    std::vector<Descriptor> candidates;
    std::vector<const Descriptor*> positives, negatives;
    for (const PreparedTask* t : group) {
      for (const Descriptor& shot : t->shots) {
        if (std::find(candidates.begin(), candidates.end(), shot) ==
            candidates.end()) {
          candidates.push_back(shot);
        }
      }
      for (const Descriptor& d : t->positives) positives.push_back(&d);
      for (const Descriptor& d : t->negatives) negatives.push_back(&d);
    }
    std::vector<Descriptor> selected =
        SelectPrototypes(candidates, positives, negatives, p, head);
    if (!selected.empty()) store[id] = std::move(selected);
  }
  p.prototypes = std::move(store);
}

std::string BoxKey(const BBox& b) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g", b.x_min(),
                b.y_min(), b.x_max(), b.y_max());
  return buf;
}

std::string TaskKey(const MetaTask& task) {
  std::string key = task.query.id + "|" + std::to_string(task.support.category.id);
  for (const std::string& id : task.support.image_ids) key += "|" + id;
  key += "#";
  for (const Annotation& a : task.positives) key += BoxKey(a.box) + ";";
  char weight[32];
  std::snprintf(weight, sizeof(weight), "w%.17g", task.weight);
  return key + weight;
}

void CheckParams(const DetectorParams& params) {
  if (params.u.size() != static_cast<std::size_t>(kDescriptorDim)) {
    throw Error(ErrorCode::kInvalidArgument, "metric has the wrong dimension");
  }
  if (!std::isfinite(params.tau)) {
    throw Error(ErrorCode::kInvalidArgument, "threshold must be finite");
  }
}

}  // namespace

DetectorParams DetectorParams::Initial(double u0, double tau, double margin) {
  DetectorParams p;
  p.u.assign(kDescriptorDim, u0);
  p.tau = tau;
  p.margin = margin;
  return p;
}

SupportSet MakeSupportSet(std::span<const scenegen::ImageRecord> records,
                          FeatureCache* cache) {
  if (records.empty()) {
    throw Error(ErrorCode::kEmptySupport, "support set needs >= 1 shot");
  }
  SupportSet set;
  set.category = records.front().category;
  for (const scenegen::ImageRecord& r : records) {
    if (r.category != set.category) {
      throw Error(ErrorCode::kInvalidArgument,
                  "support shots must share one category");
    }
    set.image_ids.push_back(r.id);
    set.shots.push_back(cache ? cache->SupportDescriptor(r.id, *r.raster)
                              : DescribeSupport(*r.raster, ProposalConfig{}));
  }
  return set;
}

double Score(const Descriptor& candidate, const SupportSet& support,
             const DetectorParams& params, ShotReduction reduction) {
  CheckParams(params);
  if (support.shots.empty()) {
    throw Error(ErrorCode::kEmptySupport, "support set has no shots");
  }
  return ScoreWithGradient(candidate,
                           ViewOf(support.shots, params, support.category),
                           params.u, reduction, 0.0, nullptr);
}

std::vector<Detection> Detect(const AnalyzedImage& analysis,
                              const SupportSet& support,
                              const DetectorParams& params,
                              const HeadConfig& head) {
  std::vector<Detection> raw;
  for (std::size_t i = 0; i < analysis.proposals.size(); ++i) {
    const double s =
        Score(analysis.descriptors[i], support, params, head.reduction);
    if (s > params.tau) raw.push_back({analysis.proposals[i], s, support.category});
  }
  std::vector<Detection> kept = Nms(raw, head.detect_nms_iou);
  if (static_cast<int>(kept.size()) > head.max_detections) {
    kept.resize(head.max_detections);
  }
  return kept;
}

std::vector<Detection> Detect(const Image& image, const SupportSet& support,
                              const DetectorParams& params,
                              const HeadConfig& head,
                              const ProposalConfig& proposals) {
  return Detect(Analyze(image, proposals), support, params, head);
}

MetaTask MakeMetaTask(scenegen::ImageRecord query, SupportSet support,
                      std::span<const Annotation> annotations, double weight) {
  MetaTask task{std::move(query), std::move(support), {}, weight};
  for (const Annotation& a : annotations) {
    if (a.category == task.support.category) task.positives.push_back(a);
  }
  return task;
}

PreparedTask PrepareTask(const MetaTask& task, const HeadConfig& head,
                         FeatureCache* cache) {
  if (!task.query.raster) {
    throw Error(ErrorCode::kInvalidArgument, "query has no raster");
  }
  if (task.support.shots.empty()) {
    throw Error(ErrorCode::kEmptySupport, "task support set is empty");
  }
  for (const Annotation& a : task.positives) {
    if (a.category != task.support.category) {
      throw Error(ErrorCode::kInvalidArgument,
                  "task positive does not match the support category");
    }
  }
  std::shared_ptr<const AnalyzedImage> analysis =
      cache ? cache->Analysis(task.query.id, *task.query.raster)
            : std::make_shared<const AnalyzedImage>(
                  Analyze(*task.query.raster, ProposalConfig{}));
  if (analysis->proposals.empty()) {
    throw Error(ErrorCode::kDegenerateTask,
                "query '" + task.query.id + "' yields no proposals");
  }
  PreparedTask out;
  out.key = TaskKey(task);
  out.shots = task.support.shots;
  out.category = task.support.category;
  out.weight = task.weight;
  out.has_pseudo = std::any_of(task.positives.begin(), task.positives.end(),
                               [](const Annotation& a) { return a.is_pseudo; });
  for (std::size_t i = 0; i < analysis->proposals.size(); ++i) {
    double best = 0.0;
    for (const Annotation& a : task.positives) {
      best = std::max(best, Iou(analysis->proposals[i], a.box));
    }
    if (best >= head.positive_iou) {
      out.positives.push_back(analysis->descriptors[i]);
    } else if (best <= head.negative_iou) {
      out.negatives.push_back(analysis->descriptors[i]);
    }
  }
  return out;
}

LossGradient PreparedTaskLoss(const DetectorParams& params,
                              const PreparedTask& task, const HeadConfig& head) {
  CheckParams(params);
  LossGradient out;
  out.grad_u.assign(kDescriptorDim, 0.0);
  const double m = params.margin;
  const ShotView shots = ViewOf(task.shots, params, task.category);
  if (!task.positives.empty()) {
    const double inv = 1.0 / static_cast<double>(task.positives.size());
    for (const Descriptor& c : task.positives) {
      // Score first without gradient; only active hinges contribute.
      const double s = ScoreWithGradient(c, shots, params.u,
                                         head.reduction, 0.0, nullptr);
      const double slack = params.tau + m - s;
      if (slack > 0.0) {
        out.loss += inv * slack;
        out.grad_tau += inv;
        ScoreWithGradient(c, shots, params.u, head.reduction, -inv,
                          &out.grad_u);
      }
    }
  }
  if (!task.negatives.empty() && head.negative_weight != 0.0) {
    const double inv =
        head.negative_weight / static_cast<double>(task.negatives.size());
    for (const Descriptor& c : task.negatives) {
      const double s = ScoreWithGradient(c, shots, params.u,
                                         head.reduction, 0.0, nullptr);
      const double slack = s - params.tau + m;
      if (slack > 0.0) {
        out.loss += inv * slack;
        out.grad_tau -= inv;
        ScoreWithGradient(c, shots, params.u, head.reduction, inv,
                          &out.grad_u);
      }
    }
  }
  return out;
}

LossGradient TaskLoss(const DetectorParams& params, const MetaTask& task,
                      const HeadConfig& head, FeatureCache* cache) {
  return PreparedTaskLoss(params, PrepareTask(task, head, cache), head);
}

FineTuneResult FineTune(const DetectorParams& init,
                        std::span<const MetaTask> tasks, double lr,
                        FineTuneMode mode, const HeadConfig& head,
                        FeatureCache* cache, const ConvergenceRule& rule) {
  if (tasks.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "fine-tuning needs >= 1 task");
  }
  std::vector<std::optional<PreparedTask>> slots(tasks.size());
  ParallelFor(tasks.size(), [&](std::size_t i) {
    try {
      slots[i] = PrepareTask(tasks[i], head, cache);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kDegenerateTask) throw;
    }
  });
  std::vector<PreparedTask> prepared;
  int skipped = 0;
  for (auto& slot : slots) {
    if (slot) {
      prepared.push_back(std::move(*slot));
    } else {
      ++skipped;
    }
  }
  return FineTunePrepared(init, std::move(prepared), lr, mode, head, rule,
                          skipped);
}

FineTuneResult FineTunePrepared(const DetectorParams& init,
                                std::vector<PreparedTask> tasks, double lr,
                                FineTuneMode mode, const HeadConfig& head,
                                const ConvergenceRule& rule, int skipped_tasks) {
  CheckParams(init);
  if (!(lr > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "learning rate must be > 0");
  }
  if (mode.kind == FineTuneMode::Kind::kFixedSteps && mode.steps < 0) {
    throw Error(ErrorCode::kInvalidArgument, "step count must be >= 0");
  }
  FineTuneResult result;
  result.params = init;
  result.skipped_tasks = skipped_tasks;
  if (tasks.empty() ||
      (mode.kind == FineTuneMode::Kind::kFixedSteps && mode.steps == 0)) {
    return result;
  }
  std::stable_sort(tasks.begin(), tasks.end(),
                   [](const PreparedTask& a, const PreparedTask& b) {
                     return a.key < b.key;
                   });
  double total_weight = 0.0;
  for (const PreparedTask& t : tasks) total_weight += t.weight;
  if (!(total_weight > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "task weights sum to zero");
  }

  std::vector<LossGradient> parts(tasks.size());
  auto objective = [&](const DetectorParams& p) {
    ParallelFor(tasks.size(), [&](std::size_t i) {
      parts[i] = PreparedTaskLoss(p, tasks[i], head);
    });
    LossGradient sum;
    sum.grad_u.assign(kDescriptorDim, 0.0);
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      const double w = tasks[i].weight / total_weight;
      sum.loss += w * parts[i].loss;
      sum.grad_tau += w * parts[i].grad_tau;
      for (int d = 0; d < kDescriptorDim; ++d) {
        sum.grad_u[d] += w * parts[i].grad_u[d];
      }
    }
    return sum;
  };

  DetectorParams& p = result.params;
  const bool fixed = mode.kind == FineTuneMode::Kind::kFixedSteps;
  const int max_updates = fixed ? mode.steps : rule.max_epochs;
  int stalled = 0;
  for (;;) {
    const LossGradient g = objective(p);
    if (!result.loss_history.empty() && !fixed) {
      const double improvement = result.loss_history.back() - g.loss;
      stalled = improvement < rule.min_improvement ? stalled + 1 : 0;
    }
    result.loss_history.push_back(g.loss);
    if (result.updates >= max_updates || (!fixed && stalled >= rule.patience)) {
      break;
    }
    for (int d = 0; d < kDescriptorDim; ++d) p.u[d] -= lr * g.grad_u[d];
    p.tau -= lr * head.threshold_lr_scale * g.grad_tau;
    ++result.updates;
  }

  if (mode.rebuild_prototypes) RebuildPrototypes(p, tasks, head);
  return result;
}

}  // namespace odip::detector
