#include <algorithm>
#include <set>

#include "doctest.h"
#include "odip/core/error.h"
#include "odip/core/random.h"
#include "odip/detector/params_io.h"
#include "odip/looprunner/looprunner.h"

using namespace odip;
using namespace odip::looprunner;
using scenegen::Catalog;

namespace {

CategoryId Cube() { return Catalog::Default().Id("cube"); }
CategoryId Can() { return Catalog::Default().Id("can"); }

// Cube from stage 1, can from stage 2; small eval sets.
RunConfig Tiny() {
  RunConfig c;
  c.T = 3;
  c.N = 3;
  c.L = 4;
  c.eta = 1e-4;
  c.k = 3;
  c.schedule = {{1, {Cube()}}, {2, {Can()}}};
  c.base_categories = Catalog::Default().Base();
  c.eval_sparse_images = 8;
  c.eval_dense_images = 4;
  c.eval_draws = 2;
  c.bootstrap.sparse_scenes = 12;
  c.seed = 11;
  return c;
}

const detector::DetectorParams& Params0() {
  static const detector::DetectorParams p = [] {
    detector::FeatureCache cache;
    return BuildInitialParams(Tiny(), &cache);
  }();
  return p;
}

std::vector<StageState> RunAll(const RunConfig& config) {
  RunContext context(config, "test");
  std::vector<StageState> states = {InitialState(config, Params0())};
  for (int t = 0; t < config.T; ++t) {
    states.push_back(RunStage(states.back(), config, context));
  }
  return states;
}

std::vector<std::string> Ids(const std::vector<scenegen::ImageRecord>& records) {
  std::vector<std::string> out;
  for (const auto& r : records) out.push_back(r.id);
  return out;
}

}  // namespace

TEST_CASE("config validation") {
  CHECK_NOTHROW(Tiny().Validate());
  auto rejects = [](auto mutate) {
    RunConfig c = Tiny();
    mutate(c);
    CHECK_THROWS_AS(c.Validate(), Error);
  };
  rejects([](RunConfig& c) { c.T = 0; });
  rejects([](RunConfig& c) { c.N = 0; });
  rejects([](RunConfig& c) { c.L = -1; });
  rejects([](RunConfig& c) { c.eta = 0.0; });
  rejects([](RunConfig& c) { c.k = 0; });
  rejects([](RunConfig& c) { c.tau_pseudo = 1.5; });
  rejects([](RunConfig& c) { c.schedule.clear(); });
  rejects([](RunConfig& c) { c.schedule[4] = {Catalog::Default().Id("box")}; });
  rejects([](RunConfig& c) { c.schedule[3] = {Cube()}; });
  rejects([](RunConfig& c) { c.schedule[3] = {Catalog::Default().Base()[0]}; });
  RunConfig c = Tiny();
  c.L = 0;
  c.tau_pseudo = 1.0;
  CHECK_NOTHROW(c.Validate());
}

TEST_CASE("active categories follow the schedule") {
  const RunConfig c = Tiny();
  CHECK(c.ActiveCategories(1) == std::vector<CategoryId>{Cube()});
  CHECK(c.ActiveCategories(2).size() == 2);
  CHECK(c.AllNovelCategories().size() == 2);
}

TEST_CASE("joint set construction") {
  scenegen::ImageRecord udo;
  udo.id = "u";
  udo.category = Cube();
  scenegen::ImageRecord moa;
  moa.id = "m";
  moa.category = Cube();
  const BBox box(1, 1, 9, 9);
  std::vector<PseudoEntry> pseudo = {{udo, {Annotation::Pseudo(box, Cube(), 0.8)}},
                                     {udo, {}}};
  std::vector<MoaEntry> moas = {{moa, Annotation::RobotEstimate(box, Cube())}};

  const auto all = BuildJointSet(pseudo, moas);
  REQUIRE(all.size() == 3);
  CHECK(all[0].source == EntrySource::kPseudo);
  CHECK(all[1].source == EntrySource::kPseudo);
  CHECK(all[2].source == EntrySource::kMoa);
  CHECK(BuildJointSet(pseudo, moas, AblationMode::kUdoOnly).size() == 2);
  for (const auto& e : BuildJointSet(pseudo, moas, AblationMode::kMoaOnly)) {
    CHECK(e.source == EntrySource::kMoa);
  }
  CHECK(BuildJointSet({}, moas).size() == 1);
  CHECK(BuildJointSet(pseudo, moas, AblationMode::kJoint, 0.25)[0].weight == 0.25);
  CHECK(ParseAblationMode("moa-only") == AblationMode::kMoaOnly);
  CHECK_THROWS_AS(ParseAblationMode("both"), Error);
}

TEST_CASE("support sampling") {
  DatabaseBundle bundle;
  CHECK_THROWS_AS(SampleSupports(bundle, Cube(), 3, "", 1), Error);
  CHECK_THROWS_AS(RecentSupports(bundle, Cube(), 3), Error);
  for (int i = 0; i < 6; ++i) {
    scenegen::ImageRecord r;
    r.id = "s" + std::to_string(i);
    r.category = Cube();
    r.round_key = i < 3 ? "a" : "b";
    bundle.support[Cube().id].push_back(r);
  }
  CHECK(Ids(RecentSupports(bundle, Cube(), 2)) ==
        std::vector<std::string>{"s4", "s5"});
  CHECK(RecentSupports(bundle, Cube(), 8).size() == 8);

  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto picked = SampleSupports(bundle, Cube(), 3, "a", seed);
    REQUIRE(picked.size() == 3);
    std::set<std::string> ids;
    for (const auto& r : picked) {
      CHECK(r.round_key == "b");
      ids.insert(r.id);
    }
    CHECK(ids.size() == 3);
    CHECK(Ids(picked) == Ids(SampleSupports(bundle, Cube(), 3, "a", seed)));
  }
  // Not enough other captures: fall back to the whole pool.
  CHECK(SampleSupports(bundle, Cube(), 4, "a", 3).size() == 4);
}

TEST_CASE("task sets filter positives and are deterministic") {
  const RunConfig c = Tiny();
  RunContext context(c, "test");
  StageState s = InitialState(c, Params0());
  s = RunStage(s, c, context);
  s = RunStage(s, c, context);
  const auto pool = BuildJointSet(s.bundle.pseudo, s.bundle.moa);
  const int n = static_cast<int>(pool.size()) * 2;
  const auto tasks = SampleTaskSet(pool, s.bundle, s.categories, c.k, n, 5,
                                   &context.cache());
  const auto again = SampleTaskSet(pool, s.bundle, s.categories, c.k, n, 5,
                                   &context.cache());
  REQUIRE(tasks.size() == static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const detector::MetaTask& t = tasks[i].task;
    CHECK(t.support.shots.size() == static_cast<std::size_t>(c.k));
    for (const Annotation& a : t.positives) CHECK(a.category == t.support.category);
    // Second pass: conditioned on the other category, so no positives.
    if (i >= pool.size()) {
      CHECK(t.support.category != t.query.category);
      CHECK(t.positives.empty());
    } else {
      CHECK(t.support.category == t.query.category);
    }
    CHECK(t.query.id == again[i].task.query.id);
    CHECK(t.support.image_ids == again[i].task.support.image_ids);
  }
  CHECK(SampleTaskSet({}, s.bundle, s.categories, c.k, 0, 5).empty());
  CHECK_THROWS_AS(SampleTaskSet({}, s.bundle, s.categories, c.k, 1, 5), Error);
}

TEST_CASE("stages grow the databases and reset to the initial detector") {
  const RunConfig c = Tiny();
  const std::vector<StageState> states = RunAll(c);
  int expected = 0;
  for (int t = 1; t <= c.T; ++t) {
    const StageState& s = states[t];
    const DatabaseBundle& b = s.bundle;
    const int active = static_cast<int>(c.ActiveCategories(t).size());
    expected += c.N * active;
    CHECK(s.t == t);
    CHECK(b.udo.size() == static_cast<std::size_t>(expected));
    CHECK(b.moa.size() == static_cast<std::size_t>(expected));
    CHECK(b.SupportCount() == expected * c.scene.views_per_grasp);
    CHECK(b.pseudo.size() == b.udo.size());
    CHECK(s.categories == c.ActiveCategories(t));
    CHECK(s.history.size() == static_cast<std::size_t>(t));
    CHECK(s.history.back().sizes.udo == expected);
    CHECK(s.last_trace.started_from_initial);
    CHECK(s.last_trace.polish_updates == c.L);
    CHECK(s.last_trace.polish_pseudo_annotations == 0);
    CHECK(detector::SerializeParams(s.params_0) ==
          detector::SerializeParams(Params0()));

    // Append-only: the previous stage's records form a prefix.
    const DatabaseBundle& prev = states[t - 1].bundle;
    CHECK(std::equal(prev.udo.begin(), prev.udo.end(), b.udo.begin(),
                     [](const auto& x, const auto& y) { return x.id == y.id; }));
    CHECK(std::equal(prev.moa.begin(), prev.moa.end(), b.moa.begin(),
                     [](const auto& x, const auto& y) {
                       return x.image.id == y.image.id && x.label.box == y.label.box;
                     }));

    // The can appears at stage 2 and never before.
    const bool has_can = std::any_of(b.udo.begin(), b.udo.end(), [](const auto& r) {
      return r.category == Can();
    });
    CHECK(has_can == (t >= 2));

    for (const PseudoEntry& e : b.pseudo) {
      for (const Annotation& a : e.labels) {
        CHECK(a.is_pseudo);
        CHECK(a.category == e.image.category);
        CHECK(a.confidence >= c.tau_pseudo);
      }
    }
    for (const MoaEntry& m : b.moa) {
      CHECK_FALSE(m.label.is_pseudo);
      CHECK(m.label.category == m.image.category);
    }
  }
  // The input state is left untouched.
  CHECK(states[1].t == 1);
  CHECK(states[1].bundle.udo.size() == static_cast<std::size_t>(c.N));

  RunContext context(c, "test");
  CHECK_THROWS_AS(RunStage(states.back(), c, context), Error);
}

TEST_CASE("ablation modes restrict the training data") {
  RunConfig c = Tiny();
  c.T = 2;
  c.mode = AblationMode::kMoaOnly;
  for (const StageState& s : RunAll(c)) {
    if (s.t == 0) continue;
    CHECK(s.last_trace.pseudo_tasks == 0);
    CHECK(s.last_trace.polish_updates == c.L);
    CHECK(s.history.back().mode == "moa-only");
  }
  c.mode = AblationMode::kUdoOnly;
  for (const StageState& s : RunAll(c)) {
    if (s.t == 0) continue;
    CHECK(s.last_trace.pseudo_tasks == s.last_trace.fine_tune_tasks);
    CHECK(s.last_trace.polish_tasks == 0);
  }
}

TEST_CASE("warm start and polish switches") {
  RunConfig c = Tiny();
  c.T = 2;
  c.warm_start = true;
  const auto warm = RunAll(c);
  CHECK(warm[1].last_trace.started_from_initial);
  CHECK_FALSE(warm[2].last_trace.started_from_initial);

  c = Tiny();
  c.T = 1;
  c.L = 0;
  c.schedule = {{1, {Cube()}}};
  const auto unpolished = RunAll(c);
  CHECK(unpolished[1].last_trace.polish_updates == 0);
}

TEST_CASE("pseudo-label threshold boundary") {
  RunConfig c = Tiny();
  c.T = 2;
  c.tau_pseudo = 1.0;
  const auto states = RunAll(c);
  for (const StageState& s : states) {
    REQUIRE(s.bundle.pseudo.size() == s.bundle.udo.size());
    for (const PseudoEntry& e : s.bundle.pseudo) {
      for (const Annotation& a : e.labels) CHECK(a.confidence == 1.0);
    }
  }
  // Stage 1 labels with f_theta0 on cube supports; at tau 1 nothing survives,
  // yet every image is kept.
  CHECK(states[1].bundle.PseudoAnnotationCount() == 0);
  CHECK(states[1].last_trace.pseudo_tasks == c.N);
}

TEST_CASE("runs are deterministic") {
  RunConfig c = Tiny();
  c.T = 2;
  const auto a = RunAll(c);
  const auto b = RunAll(c);
  for (int t = 1; t <= c.T; ++t) {
    CHECK(detector::SerializeParams(a[t].params_current) ==
          detector::SerializeParams(b[t].params_current));
    CHECK(evalkit::ReportToJson(a[t].history.back()) ==
          evalkit::ReportToJson(b[t].history.back()));
  }
  RunConfig other = c;
  other.seed = 12;
  const auto d = RunAll(other);
  CHECK(Ids(d[1].bundle.udo) == Ids(a[1].bundle.udo));  // ids are positional
  CHECK(d[1].bundle.moa[0].label.box != a[1].bundle.moa[0].label.box);
}

TEST_CASE("a fine-tuned detector finds a lone novel object") {
  RunConfig c;
  c.T = 8;
  c.N = 8;
  c.schedule = {{1, {Cube(), Can()}}};
  c.base_categories = Catalog::Default().Base();
  c.eval_sparse_images = 4;
  c.eval_dense_images = 2;
  c.eval_draws = 1;
  RunContext context(c, "test");
  detector::FeatureCache boot;
  StageState s = InitialState(c, BuildInitialParams(c, &boot));
  while (s.t < c.T) s = RunStage(s, c, context);

  Rng rng(404);
  int hits = 0;
  const int trials = 200;
  for (int i = 0; i < trials; ++i) {
    const CategoryId cat = i % 2 ? Can() : Cube();
    scenegen::SceneSpec spec;
    spec.kind = scenegen::TableKind::kEvalSparse;
    spec.width = spec.height = c.scene.train_size;
    spec.background = c.scene.table_color;
    spec.seed = rng.NextU64();
    spec.objects.push_back({scenegen::SampleObject(cat, rng, c.scene),
                            rng.Uniform(60, 196), rng.Uniform(60, 196)});
    const scenegen::RenderedScene scene = scenegen::GenerateScene(spec, c.scene);
    const detector::SupportSet support = detector::MakeSupportSet(
        SampleSupports(s.bundle, cat, c.k, "", rng.NextU64()), &context.cache());
    const auto dets = detector::Detect(scene.raster, support, s.params_current,
                                       c.head, context.cache().config());
    hits += dets.size() == 1 && Iou(dets[0].box, scene.ground_truth[0].box) >= 0.5;
  }
  MESSAGE("lone-object hits: " << hits << " / " << trials);
  CHECK(hits >= 190);
}
