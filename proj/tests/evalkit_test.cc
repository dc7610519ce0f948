#include <cmath>
#include <vector>

#include "doctest.h"
#include "odip/core/error.h"
#include "odip/core/random.h"
#include "odip/detector/bootstrap.h"
#include "odip/evalkit/evalkit.h"
#include "odip/evalkit/report.h"
#include "odip/scenegen/scenegen.h"
#include "oracles.h"

using namespace odip;
using namespace odip::evalkit;
using scenegen::Catalog;
using scenegen::SceneConfig;

namespace {

const CategoryId kCat{0, CategoryRole::kNovel};

std::optional<ApResult> Ap(const std::vector<std::vector<Detection>>& dets,
                           const std::vector<std::vector<Annotation>>& gt,
                           CategoryId cat = kCat) {
  const std::vector<double> thr = CocoIouThresholds();
  return ComputeAp(dets, gt, cat, thr);
}

// k support sets of one view each, from objects drawn with a fixed seed.
SupportSampler FixedSampler(const SceneConfig& scene,
                            detector::FeatureCache& cache) {
  return [&scene, &cache](CategoryId category, int k) {
    std::vector<scenegen::ImageRecord> views;
    Rng rng(DeriveSeed(77, category.id));
    for (int i = 0; i < k; ++i) {
      const scenegen::ObjectSpec object =
          scenegen::SampleObject(category, rng, scene);
      scenegen::ImageRecord r;
      r.id = "support-" + std::to_string(category.id) + "-" + std::to_string(i);
      r.role = scenegen::ImageRole::kSupport;
      r.category = category;
      r.raster = std::make_shared<const Image>(
          scenegen::RenderSupportView(object, 0, rng.NextU64(), scene).raster);
      views.push_back(std::move(r));
    }
    return std::vector<detector::SupportSet>{
        detector::MakeSupportSet(views, &cache)};
  };
}

double MeanAp(const EvalResult& result, CategoryRole role) {
  double sum = 0.0;
  int n = 0;
  for (const CategoryResult& c : result.categories) {
    if (c.category.role != role || !c.ap) continue;
    sum += *c.ap;
    ++n;
  }
  return n ? sum / n : 0.0;
}

}  // namespace

TEST_CASE("thresholds are the ten COCO values") {
  const std::vector<double> t = CocoIouThresholds();
  REQUIRE(t.size() == 10);
  CHECK(t.front() == 0.5);
  CHECK(t[2] == 0.6);
  CHECK(t.back() == 0.95);
}

TEST_CASE("perfect detector and empty detector") {
  const BBox a(0, 0, 10, 10), b(20, 20, 35, 30);
  std::vector<std::vector<Annotation>> gt = {
      {Annotation::GroundTruth(a, kCat), Annotation::GroundTruth(b, kCat)}};
  std::vector<std::vector<Detection>> perfect = {{{a, 1.0, kCat}, {b, 1.0, kCat}}};
  const auto r = Ap(perfect, gt);
  REQUIRE(r);
  CHECK(r->ap == 1.0);
  CHECK(r->ap50 == 1.0);

  std::vector<std::vector<Detection>> none(1);
  const auto z = Ap(none, gt);
  REQUIRE(z);
  CHECK(z->ap == 0.0);
  CHECK(z->ap50 == 0.0);
}

TEST_CASE("worked case: one match at iou 0.6 and one miss") {
  const BBox g(0, 0, 10, 10);
  const BBox a(0, 0, 6, 10);  // iou exactly 0.6
  const BBox b(50, 50, 60, 60);
  REQUIRE(Iou(a, g) == 0.6);
  std::vector<std::vector<Annotation>> gt = {{Annotation::GroundTruth(g, kCat)}};
  std::vector<std::vector<Detection>> dets = {{{a, 0.9, kCat}, {b, 0.8, kCat}}};
  const auto r = Ap(dets, gt);
  REQUIRE(r);
  CHECK(r->ap50 == 1.0);
  CHECK(r->ap == doctest::Approx(0.3).epsilon(1e-15));
}

TEST_CASE("no ground truth gives an absent AP") {
  std::vector<std::vector<Detection>> dets = {{{BBox(0, 0, 5, 5), 0.9, kCat}}};
  std::vector<std::vector<Annotation>> gt(1);
  CHECK_FALSE(Ap(dets, gt).has_value());
}

TEST_CASE("other categories are ignored") {
  const CategoryId other{1, CategoryRole::kNovel};
  const BBox g(0, 0, 10, 10);
  std::vector<std::vector<Annotation>> gt = {
      {Annotation::GroundTruth(g, kCat), Annotation::GroundTruth(g, other)}};
  std::vector<std::vector<Detection>> dets = {{{g, 0.99, other}, {g, 0.5, kCat}}};
  CHECK(Ap(dets, gt)->ap == 1.0);
}

TEST_CASE("a ground truth box is matched at most once") {
  const BBox g(0, 0, 10, 10);
  std::vector<std::vector<Annotation>> gt = {{Annotation::GroundTruth(g, kCat)}};
  std::vector<std::vector<Detection>> dets = {{{g, 0.9, kCat}, {g, 0.8, kCat}}};
  CHECK(Ap(dets, gt)->ap == 1.0);
  // Duplicate ranked first costs nothing; a false positive above the match
  // halves precision.
  std::vector<std::vector<Detection>> fp_first = {
      {{BBox(40, 40, 50, 50), 0.95, kCat}, {g, 0.9, kCat}}};
  CHECK(Ap(fp_first, gt)->ap == 0.5);
}

TEST_CASE("compute_ap equals the brute-force matching oracle") {
  Rng rng(2024);
  const std::vector<double> thr = CocoIouThresholds();
  int compared = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const oracle::ApInstance inst = oracle::RandomApInstance(rng);
    const auto got = ComputeAp(inst.detections, inst.ground_truth,
                               inst.category, thr);
    bool defined = true;
    double sum = 0.0;
    for (double t : thr) {
      const auto o = oracle::BruteForceAp(inst, t);
      defined = o.has_value();
      if (!defined) break;
      REQUIRE(*o >= 0.0);
      sum += *o;
    }
    REQUIRE(got.has_value() == defined);
    if (!got) continue;
    ++compared;
    CHECK(std::abs(got->ap - sum / thr.size()) <= 1e-12);
    CHECK(std::abs(got->ap50 - *oracle::BruteForceAp(inst, 0.5)) <= 1e-12);
  }
  CHECK(compared > 300);
}

TEST_CASE("AP properties on random instances") {
  Rng rng(99);
  const std::vector<double> thr = CocoIouThresholds();
  for (int trial = 0; trial < 500; ++trial) {
    oracle::ApInstance inst = oracle::RandomApInstance(rng);
    const auto r = ComputeAp(inst.detections, inst.ground_truth, inst.category, thr);
    if (!r) continue;
    CHECK(r->ap >= 0.0);
    CHECK(r->ap50 <= 1.0);
    CHECK(r->ap50 >= r->ap - 1e-15);
    double previous = 2.0;
    for (double t : thr) {
      const double v = *AveragePrecisionAt(inst.detections, inst.ground_truth,
                                           inst.category, t);
      CHECK(v <= previous + 1e-15);
      previous = v;
    }
    // A trailing detection far from every box changes nothing.
    oracle::ApInstance more = inst;
    more.detections[0].push_back({BBox(100, 100, 110, 110), -1.0, inst.category});
    const auto after = ComputeAp(more.detections, more.ground_truth,
                                 more.category, thr);
    CHECK(std::abs(after->ap - r->ap) <= 1e-12);
    CHECK(std::abs(after->ap50 - r->ap50) <= 1e-12);
  }
}

TEST_CASE("only the top detections per image count") {
  const BBox g(0, 0, 10, 10);
  std::vector<std::vector<Annotation>> gt = {{Annotation::GroundTruth(g, kCat)}};
  std::vector<std::vector<Detection>> dets = {
      {{BBox(30, 30, 40, 40), 0.9, kCat}, {g, 0.5, kCat}}};
  CHECK(*AveragePrecisionAt(dets, gt, kCat, 0.5, 1) == 0.0);
  CHECK(*AveragePrecisionAt(dets, gt, kCat, 0.5, 2) == 0.5);
}

TEST_CASE("pseudo quality examples") {
  const BBox a(0, 0, 10, 10), b(20, 0, 30, 10);
  std::vector<std::vector<Annotation>> gt = {
      {Annotation::GroundTruth(a, kCat), Annotation::GroundTruth(b, kCat)}};
  std::vector<std::vector<Annotation>> same = {
      {Annotation::Pseudo(a, kCat, 0.9), Annotation::Pseudo(b, kCat, 0.8)}};
  const PseudoQuality q = MeasurePseudoQuality(same, gt);
  CHECK(q.mean_iou == 1.0);
  CHECK(q.precision == 1.0);
  CHECK(q.recall == 1.0);

  std::vector<std::vector<Annotation>> empty(1);
  const PseudoQuality e = MeasurePseudoQuality(empty, gt);
  CHECK_FALSE(e.precision.has_value());
  CHECK(e.recall == 0.0);
  CHECK(e.pseudo_boxes == 0);
  CHECK(e.ground_truth == 2);

  std::vector<std::vector<Annotation>> half = {
      {Annotation::Pseudo(BBox(0, 0, 5, 10), kCat, 0.9)}};
  const PseudoQuality h = MeasurePseudoQuality(half, gt);
  CHECK(h.mean_iou == 0.5);
  CHECK(h.precision == 1.0);
  CHECK(h.recall == 0.5);

  std::vector<std::vector<Annotation>> wrong_size(2);
  CHECK_THROWS_AS(MeasurePseudoQuality(wrong_size, gt), Error);
}

TEST_CASE("model evaluation on held-out scenes") {
  const SceneConfig scene;
  const Catalog& catalog = Catalog::Default();
  const std::vector<CategoryId> novel = catalog.Novel();
  const std::vector<CategoryId> base = catalog.Base();
  detector::FeatureCache cache;
  const EvalDataset sparse = PrepareEvalDataset(
      scenegen::TableKind::kEvalSparse, 40, novel, base, 5, scene, cache);
  REQUIRE(sparse.images.size() == 40);
  const SupportSampler sampler = FixedSampler(scene, cache);

  SUBCASE("zero weights score everything alike and precision collapses") {
    // Every proposal is detected for every category.
    const detector::DetectorParams zero = detector::DetectorParams::Initial(0.0);
    const EvalResult r = EvaluateModel(zero, sampler, sparse, 3, novel);
    REQUIRE(r.ap);
    CHECK(*r.ap < 0.2);
  }

  SUBCASE("the bootstrap detector favors base categories") {
    const detector::DetectorParams p0 = detector::BootstrapPretrain(
        detector::BootstrapConfig{}, scene, detector::HeadConfig{}, 0.15, &cache);
    std::vector<CategoryId> all = novel;
    all.insert(all.end(), base.begin(), base.end());
    const EvalResult r = EvaluateModel(p0, sampler, sparse, 3, all);
    const double base_ap = MeanAp(r, CategoryRole::kBase);
    const double novel_ap = MeanAp(r, CategoryRole::kNovel);
    MESSAGE("base AP " << base_ap << ", novel AP " << novel_ap);
    CHECK(base_ap >= novel_ap);

    const EvalResult again = EvaluateModel(p0, sampler, sparse, 3, all);
    CHECK(EvalResultToJson(r) == EvalResultToJson(again));
  }
}

TEST_CASE("metrics reports round trip through json and csv") {
  MetricsReport rep;
  rep.stage = 3;
  rep.mode = "joint";
  rep.sizes = {24, 24, 72, 31};
  rep.config_hash = "00ff";
  CategoryResult c;
  c.category = kCat;
  c.name = "cube";
  c.ap = 0.123456789;
  c.ap50 = 0.5;
  c.detections = 10;
  c.ground_truth = 4;
  rep.sparse.categories = {c};
  rep.sparse.ap = c.ap;
  rep.sparse.ap50 = c.ap50;
  c.ap.reset();
  c.ap50.reset();
  c.ground_truth = 0;
  rep.dense.categories = {c};
  rep.pseudo = PseudoQuality{0.7, std::nullopt, 0.25, 0, 8};

  const nlohmann::json j = ReportToJson(rep);
  const MetricsReport back = ReportFromJson(j);
  CHECK(ReportToJson(back) == j);
  CHECK_FALSE(back.dense.ap.has_value());
  CHECK_FALSE(back.pseudo->precision.has_value());
  const std::vector<MetricsReport> one = {rep}, two = {back};
  CHECK(MetricsCsv(one) == MetricsCsv(two));
  CHECK(FormatMetric(0.5) == "0.500000");
  CHECK(FormatMetric(std::nullopt).empty());
}
