#include "odip/evalkit/evalkit.h"

#include <algorithm>
#include <numeric>

#include "odip/core/error.h"
#include "odip/core/parallel.h"

namespace odip::evalkit {
namespace {

struct Ranked {
  double score;
  std::size_t image;
  BBox box;
};

bool RankBefore(const Ranked& a, const Ranked& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.image != b.image) return a.image < b.image;
  return BoxLess(a.box, b.box);
}

}  // namespace

std::vector<double> CocoIouThresholds() {
  return {0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95};
}

std::optional<double> AveragePrecisionAt(
    std::span<const std::vector<Detection>> detections,
    std::span<const std::vector<Annotation>> ground_truth, CategoryId category,
    double iou_threshold, int max_per_image) {
  if (detections.size() != ground_truth.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "detections and ground truth cover different image counts");
  }
  std::vector<std::vector<BBox>> gt(ground_truth.size());
  std::size_t n_gt = 0;
  for (std::size_t i = 0; i < ground_truth.size(); ++i) {
    for (const Annotation& a : ground_truth[i]) {
      if (a.category == category) gt[i].push_back(a.box);
    }
    n_gt += gt[i].size();
  }
  if (n_gt == 0) return std::nullopt;

  std::vector<Ranked> ranked;
  for (std::size_t i = 0; i < detections.size(); ++i) {
    std::vector<Ranked> mine;
    for (const Detection& d : detections[i]) {
      if (d.category == category) mine.push_back({d.score, i, d.box});
    }
    std::sort(mine.begin(), mine.end(), RankBefore);
    if (static_cast<int>(mine.size()) > max_per_image) mine.resize(max_per_image);
    ranked.insert(ranked.end(), mine.begin(), mine.end());
  }
  std::sort(ranked.begin(), ranked.end(), RankBefore);

  std::vector<std::vector<bool>> used(gt.size());
  for (std::size_t i = 0; i < gt.size(); ++i) used[i].assign(gt[i].size(), false);
  std::vector<double> precision, recall;
  precision.reserve(ranked.size());
  recall.reserve(ranked.size());
  std::size_t tp = 0;
  for (std::size_t r = 0; r < ranked.size(); ++r) {
    const Ranked& d = ranked[r];
    int best = -1;
    double best_iou = iou_threshold;
    for (std::size_t g = 0; g < gt[d.image].size(); ++g) {
      if (used[d.image][g]) continue;
      const double iou = Iou(d.box, gt[d.image][g]);
      if (iou >= best_iou && (best < 0 || iou > best_iou)) {
        best = static_cast<int>(g);
        best_iou = iou;
      }
    }
    if (best >= 0) {
      used[d.image][best] = true;
      ++tp;
    }
    precision.push_back(static_cast<double>(tp) / static_cast<double>(r + 1));
    recall.push_back(static_cast<double>(tp) / static_cast<double>(n_gt));
  }
  // Monotone envelope, then the area under the step curve.
  for (std::size_t r = precision.size(); r-- > 1;) {
    precision[r - 1] = std::max(precision[r - 1], precision[r]);
  }
  double ap = 0.0;
  double previous_recall = 0.0;
  for (std::size_t r = 0; r < precision.size(); ++r) {
    ap += (recall[r] - previous_recall) * precision[r];
    previous_recall = recall[r];
  }
  return ap;
}

std::optional<ApResult> ComputeAp(
    std::span<const std::vector<Detection>> detections,
    std::span<const std::vector<Annotation>> ground_truth, CategoryId category,
    std::span<const double> thresholds, int max_per_image) {
  if (thresholds.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "no IoU thresholds given");
  }
  ApResult result;
  for (double t : thresholds) {
    const std::optional<double> ap =
        AveragePrecisionAt(detections, ground_truth, category, t, max_per_image);
    if (!ap) return std::nullopt;
    result.ap += *ap;
  }
  result.ap /= static_cast<double>(thresholds.size());
  result.ap50 =
      *AveragePrecisionAt(detections, ground_truth, category, 0.5, max_per_image);
  return result;
}

EvalDataset PrepareEvalDataset(scenegen::TableKind kind, int n_images,
                               std::span<const CategoryId> novel,
                               std::span<const CategoryId> base,
                               std::uint64_t seed,
                               const scenegen::SceneConfig& scene,
                               detector::FeatureCache& cache) {
  if (n_images < 1) {
    throw Error(ErrorCode::kInvalidArgument, "eval dataset needs >= 1 image");
  }
  EvalDataset dataset;
  dataset.kind = kind;
  dataset.images.resize(n_images);
  ParallelFor(static_cast<std::size_t>(n_images), [&](std::size_t i) {
    const scenegen::SceneSpec spec = scenegen::EvalSceneSpec(
        kind, static_cast<int>(i), novel, base, seed, scene);
    scenegen::RenderedScene rendered = scenegen::GenerateScene(spec, scene);
    EvalImage& image = dataset.images[i];
    // The seed is part of the id so one cache can serve several datasets.
    image.id = "eval/" + std::string(scenegen::TableKindName(kind)) + "/" +
               std::to_string(seed) + "/" + std::to_string(i);
    image.analysis = cache.Analysis(image.id, rendered.raster);
    image.ground_truth = std::move(rendered.ground_truth);
  });
  return dataset;
}

EvalResult EvaluateModel(const detector::DetectorParams& params,
                         const SupportSampler& sampler,
                         const EvalDataset& dataset, int k,
                         std::span<const CategoryId> categories,
                         const detector::HeadConfig& head) {
  if (k < 1) throw Error(ErrorCode::kInvalidArgument, "k must be >= 1");
  const std::vector<double> thresholds = CocoIouThresholds();
  std::vector<std::vector<Annotation>> gt;
  gt.reserve(dataset.images.size());
  for (const EvalImage& image : dataset.images) gt.push_back(image.ground_truth);

  EvalResult result;
  double ap_sum = 0.0, ap50_sum = 0.0;
  int present = 0;
  for (CategoryId category : categories) {
    CategoryResult row;
    row.category = category;
    row.name = scenegen::Catalog::Default().Get(category.id).name;
    for (const auto& image_gt : gt) {
      row.ground_truth += static_cast<int>(std::count_if(
          image_gt.begin(), image_gt.end(),
          [&](const Annotation& a) { return a.category == category; }));
    }
    const std::vector<detector::SupportSet> draws = sampler(category, k);
    if (draws.empty()) {
      throw Error(ErrorCode::kEmptySupport, "sampler returned no support set");
    }
    double ap = 0.0, ap50 = 0.0;
    bool has_gt = true;
    for (const detector::SupportSet& support : draws) {
      std::vector<std::vector<Detection>> detections(dataset.images.size());
      ParallelFor(dataset.images.size(), [&](std::size_t i) {
        detections[i] =
            detector::Detect(*dataset.images[i].analysis, support, params, head);
      });
      for (const auto& d : detections) row.detections += static_cast<int>(d.size());
      const std::optional<ApResult> r =
          ComputeAp(detections, gt, category, thresholds);
      if (!r) {
        has_gt = false;
        break;
      }
      ap += r->ap;
      ap50 += r->ap50;
    }
    if (has_gt) {
      row.ap = ap / static_cast<double>(draws.size());
      row.ap50 = ap50 / static_cast<double>(draws.size());
      ap_sum += *row.ap;
      ap50_sum += *row.ap50;
      ++present;
    }
    result.detections += row.detections;
    result.ground_truth += row.ground_truth;
    result.categories.push_back(std::move(row));
  }
  if (present > 0) {
    result.ap = ap_sum / present;
    result.ap50 = ap50_sum / present;
  }
  return result;
}

PseudoQuality MeasurePseudoQuality(
    std::span<const std::vector<Annotation>> pseudo,
    std::span<const std::vector<Annotation>> ground_truth) {
  if (pseudo.size() != ground_truth.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "pseudo labels and ground truth cover different image counts");
  }
  PseudoQuality q;
  double iou_sum = 0.0;
  int matched = 0, covered = 0;
  for (std::size_t i = 0; i < pseudo.size(); ++i) {
    for (const Annotation& p : pseudo[i]) {
      double best = 0.0;
      for (const Annotation& g : ground_truth[i]) {
        if (g.category == p.category) best = std::max(best, Iou(p.box, g.box));
      }
      iou_sum += best;
      matched += best >= 0.5;
      ++q.pseudo_boxes;
    }
    for (const Annotation& g : ground_truth[i]) {
      ++q.ground_truth;
      covered += std::any_of(pseudo[i].begin(), pseudo[i].end(),
                             [&](const Annotation& p) {
                               return p.category == g.category &&
                                      Iou(p.box, g.box) >= 0.5;
                             });
    }
  }
  if (q.pseudo_boxes > 0) {
    q.mean_iou = iou_sum / q.pseudo_boxes;
    q.precision = static_cast<double>(matched) / q.pseudo_boxes;
  }
  if (q.ground_truth > 0) {
    q.recall = static_cast<double>(covered) / q.ground_truth;
  }
  return q;
}

}  // namespace odip::evalkit
