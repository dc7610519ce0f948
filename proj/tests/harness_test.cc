#include <unistd.h>

#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "odip/core/error.h"
#include "odip/core/random.h"
#include "odip/harness/annotation_file.h"
#include "odip/harness/commands.h"
#include "odip/harness/config.h"
#include "odip/harness/persistence.h"
#include "odip/harness/pnm.h"

namespace fs = std::filesystem;
using namespace odip;
using namespace odip::harness;
using scenegen::Catalog;

namespace {

const char* kTinyConfig =
    "# two stages, one category\n"
    "T = 2\n"
    "N = 2\n"
    "L = 2\n"
    "eta = 0.0001\n"
    "k = 3\n"
    "schedule.1 = cube\n"
    "eval_sparse_images = 6\n"
    "eval_dense_images = 3\n"
    "eval_draws = 2\n"
    "bootstrap.sparse_scenes = 8\n";

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("odip_harness_test_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string operator/(const std::string& name) const {
    return (path_ / name).string();
  }
  std::string str() const { return path_.string(); }

 private:
  fs::path path_;
};

// Runs the CLI with stdout and stderr swallowed.
int Cli(std::vector<std::string> args) {
  args.insert(args.begin(), "odip");
  std::vector<char*> argv;
  for (std::string& a : args) argv.push_back(a.data());
  std::ostringstream sink;
  std::streambuf* out = std::cout.rdbuf(sink.rdbuf());
  std::streambuf* err = std::cerr.rdbuf(sink.rdbuf());
  const int code = CliMain(static_cast<int>(argv.size()), argv.data());
  std::cout.rdbuf(out);
  std::cerr.rdbuf(err);
  return code;
}

ErrorCode CodeOf(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::kInvalidArgument;
}

std::string Message(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("config parsing") {
  const ExperimentConfig c = ParseConfig(kTinyConfig);
  CHECK(c.run.T == 2);
  CHECK(c.run.N == 2);
  CHECK(c.run.eta == 0.0001);
  CHECK(c.run.schedule.at(1) == std::vector<CategoryId>{Catalog::Default().Id("cube")});
  CHECK(c.run.base_categories == Catalog::Default().Base());
  CHECK(c.run.bootstrap.sparse_scenes == 8);
  CHECK(c.run.tau_pseudo == 0.6);

  const ExperimentConfig d = DefaultConfig();
  CHECK(d.run.T == 16);
  CHECK(d.run.N == 16);
  CHECK(d.run.L == 16);
  CHECK(d.run.eta == 0.0001);
  CHECK(d.run.k == 3);
  CHECK(d.run.AllNovelCategories().size() == 4);

  const std::string base = kTinyConfig;
  CHECK(CodeOf([] { ParseConfig("T = 2\nN = 2\nL = 2\neta = 0.0001\n"); }) ==
        ErrorCode::kConfig);
  CHECK(Message([&] { ParseConfig(base + "colour = red\n"); }).find("line 12") !=
        std::string::npos);
  CHECK(CodeOf([&] { ParseConfig(base + "colour = red\n"); }) == ErrorCode::kConfig);
  CHECK(CodeOf([&] { ParseConfig(base + "T = 3\n"); }) == ErrorCode::kConfig);
  CHECK(CodeOf([&] { ParseConfig(base + "seed = abc\n"); }) == ErrorCode::kConfig);
  CHECK(CodeOf([&] { ParseConfig(base + "just words\n"); }) == ErrorCode::kConfig);
  CHECK(CodeOf([&] { ParseConfig(base + "schedule.2 = triangle\n"); }) ==
        ErrorCode::kConfig);
  CHECK(CodeOf([&] { ParseConfig(base + "schedule.2 = sphere\n"); }) ==
        ErrorCode::kConfig);
  CHECK(CodeOf([&] { ParseConfig(base + "tau_pseudo = 2\n"); }) == ErrorCode::kConfig);
  // Messages carry one error prefix only.
  const std::string m = Message([&] { ParseConfig(base + "seed = abc\n"); });
  CHECK(m.find("Error") == m.rfind("Error"));
}

TEST_CASE("canonical config round trips and hashes") {
  const ExperimentConfig c = ParseConfig(kTinyConfig);
  const std::string canonical = CanonicalConfig(c);
  CHECK(CanonicalConfig(ParseConfig(canonical)) == canonical);
  CHECK(ConfigHash(ParseConfig(canonical)) == ConfigHash(c));
  CHECK(ConfigHash(c).size() == 16);

  // Every key appears in the canonical text.
  for (const std::string& key : ConfigKeys()) {
    if (key == "out_dir" || key == "schedule.<stage>") continue;
    CHECK_MESSAGE(canonical.find(key + " = ") != std::string::npos, key);
  }

  ExperimentConfig other = c;
  other.run.T = 3;
  CHECK(ConfigHash(other) != ConfigHash(c));
  other = c;
  other.run.mode = looprunner::AblationMode::kUdoOnly;
  other.out_dir = "elsewhere";
  CHECK(ConfigHash(other) == ConfigHash(c));
  CHECK(CanonicalConfig(other).find("mode = udo-only") != std::string::npos);
  CHECK(ParseConfig(CanonicalConfig(other)).run.mode == looprunner::AblationMode::kUdoOnly);
}

TEST_CASE("ppm round trip") {
  Rng rng(3);
  Image image(7, 5);
  for (int y = 0; y < 5; ++y) {
    for (int x = 0; x < 7; ++x) {
      image.set(x, y, {static_cast<std::uint8_t>(rng.UniformInt(0, 255)),
                       static_cast<std::uint8_t>(rng.UniformInt(0, 255)),
                       static_cast<std::uint8_t>(rng.UniformInt(0, 255))});
    }
  }
  const std::string bytes = EncodePpm(image, "config abc");
  CHECK(bytes.rfind("P6\n# config abc\n7 5\n255\n", 0) == 0);
  CHECK(DecodePpm(bytes) == image);
  CHECK(DecodePpm(EncodePpm(image)) == image);
  CHECK(CodeOf([] { DecodePpm("P6\n2 2\n65535\n"); }) == ErrorCode::kIo);
  CHECK(CodeOf([] { DecodePpm("P3\n1 1\n255\n0 0 0\n"); }) == ErrorCode::kIo);
  CHECK(CodeOf([&] { DecodePpm(bytes.substr(0, bytes.size() - 1)); }) ==
        ErrorCode::kIo);
}

TEST_CASE("annotation files round trip") {
  const Catalog& catalog = Catalog::Default();
  Rng rng(17);
  for (int trial = 0; trial < 300; ++trial) {
    AnnotationFile file;
    file.image_id = "img-" + std::to_string(trial);
    file.width = rng.UniformInt(16, 400);
    file.height = rng.UniformInt(16, 400);
    if (rng.Bernoulli(0.5)) file.config_hash = "0123456789abcdef";
    const int n = rng.UniformInt(0, 6);
    for (int i = 0; i < n; ++i) {
      const double x0 = rng.Uniform(0, file.width - 2);
      const double y0 = rng.Uniform(0, file.height - 2);
      const BBox box(x0, y0, rng.Uniform(x0 + 1, file.width),
                     rng.Uniform(y0 + 1, file.height));
      const CategoryId cat =
          catalog.all()[rng.UniformInt(0, catalog.all().size() - 1)].id;
      switch (rng.UniformInt(0, 2)) {
        case 0:
          file.records.push_back(Annotation::GroundTruth(box, cat));
          break;
        case 1:
          file.records.push_back(Annotation::RobotEstimate(box, cat));
          break;
        default:
          file.records.push_back(Annotation::Pseudo(box, cat, rng.Uniform()));
      }
    }
    const nlohmann::json j = AnnotationFileToJson(file);
    CHECK(j.at("schema_version") == kAnnotationSchemaVersion);
    CHECK(j.contains("config_hash") == !file.config_hash.empty());
    CHECK(AnnotationFileFromJson(nlohmann::json::parse(j.dump())) == file);
  }

  AnnotationFile file{"x", 20, 20, {Annotation::GroundTruth(BBox(1, 1, 5, 5),
                                                            catalog.Id("cube"))}, ""};
  const nlohmann::json good = AnnotationFileToJson(file);
  auto broken = [&](auto edit) {
    nlohmann::json j = good;
    edit(j["records"][0]);
    return CodeOf([&] { AnnotationFileFromJson(j); });
  };
  CHECK(broken([](nlohmann::json& r) { r["box"] = {1, 1, 25, 5}; }) == ErrorCode::kIo);
  CHECK(broken([](nlohmann::json& r) { r["box"] = {5, 1, 1, 5}; }) == ErrorCode::kIo);
  CHECK(broken([](nlohmann::json& r) { r["confidence"] = 1.5; }) == ErrorCode::kIo);
  CHECK(broken([](nlohmann::json& r) { r["is_pseudo"] = true; }) == ErrorCode::kIo);
  CHECK(broken([](nlohmann::json& r) { r["role"] = "base"; }) == ErrorCode::kIo);
  CHECK(broken([](nlohmann::json& r) { r["category_name"] = "can"; }) == ErrorCode::kIo);
  CHECK(broken([](nlohmann::json& r) { r["category_id"] = 99; }) == ErrorCode::kIo);
  CHECK(broken([](nlohmann::json& r) { r["source"] = "guess"; }) == ErrorCode::kIo);
  CHECK(broken([](nlohmann::json& r) { r.erase("box"); }) == ErrorCode::kIo);
  nlohmann::json wrong_version = good;
  wrong_version["schema_version"] = 2;
  CHECK(CodeOf([&] { AnnotationFileFromJson(wrong_version); }) == ErrorCode::kIo);

  TempDir dir;
  WriteAnnotationFile(dir / "a/b.json", file);
  CHECK(ReadAnnotationFile(dir / "a/b.json") == file);
  CHECK(CodeOf([&] { ReadAnnotationFile(dir / "missing.json"); }) == ErrorCode::kIo);
}

TEST_CASE("gen-dataset writes scenes, annotations and a stable manifest") {
  TempDir dir;
  const std::string out = dir / "d";
  REQUIRE(Cli({"gen-dataset", "--kind", "dense", "--images", "5", "--seed", "7",
               "--out", out}) == 0);
  int images = 0, annotations = 0;
  for (const auto& e : fs::directory_iterator(out + "/images")) {
    images += e.path().extension() == ".ppm";
  }
  for (const auto& e : fs::directory_iterator(out + "/annotations")) {
    annotations += e.path().extension() == ".json";
  }
  CHECK(images == 5);
  CHECK(annotations == 5);
  const std::string manifest = ReadFile(out + "/manifest.json");
  const nlohmann::json m = nlohmann::json::parse(manifest);
  CHECK(m.at("entries").size() == 5);

  const nlohmann::json& first = m.at("entries")[0];
  const Image raster = ReadPpm(out + "/" + first.at("image").get<std::string>());
  const AnnotationFile ann =
      ReadAnnotationFile(out + "/" + first.at("annotation").get<std::string>());
  CHECK(ann.width == raster.width());
  CHECK(ann.height == raster.height());
  CHECK_FALSE(ann.records.empty());
  CHECK(ann.config_hash == m.at("config_hash"));

  const std::string again = dir / "e";
  REQUIRE(Cli({"gen-dataset", "--kind", "dense", "--images", "5", "--seed", "7",
               "--out", again}) == 0);
  CHECK(ReadFile(again + "/manifest.json") == manifest);

  CHECK(Cli({"gen-dataset", "--kind", "dense", "--images", "0", "--out", dir / "z"}) == 2);
  CHECK(Cli({"gen-dataset", "--kind", "n-table", "--images", "2", "--out", dir / "z"}) == 2);
  CHECK(Cli({"frobnicate"}) == 2);
  CHECK_FALSE(fs::exists(dir / "z"));
}

TEST_CASE("runs checkpoint, resume and report") {
  TempDir dir;
  WriteFileAtomic(dir / "tiny.cfg", kTinyConfig);
  const std::string full = dir / "full";
  REQUIRE(Cli({"run", dir / "tiny.cfg", "--out", full}) == 0);
  CHECK(fs::exists(full + "/params_0.json"));
  CHECK(fs::exists(full + "/stage_001/metrics.json"));
  CHECK(fs::exists(full + "/stage_002/database.json"));
  CHECK(LatestCheckpoint(full) == 2);
  const std::string csv = ReadFile(full + "/metrics.csv");

  // The same directory is refused without --resume.
  CHECK(Cli({"run", dir / "tiny.cfg", "--out", full}) == 2);

  const std::string split = dir / "split";
  REQUIRE(Cli({"run", dir / "tiny.cfg", "--out", split, "--stop-after", "1"}) == 0);
  CHECK(LatestCheckpoint(split) == 1);
  REQUIRE(Cli({"run", dir / "tiny.cfg", "--out", split, "--resume"}) == 0);
  CHECK(ReadFile(split + "/metrics.csv") == csv);
  for (int stage : {1, 2}) {
    CHECK(ReadFile(StageDir(split, stage) + "/params.json") ==
          ReadFile(StageDir(full, stage) + "/params.json"));
  }

  // A checkpoint restores the full state.
  const ExperimentConfig config = ParseConfig(kTinyConfig);
  const std::string hash = ConfigHash(config);
  const looprunner::StageState restored = LoadCheckpoint(full, 1, config.run, hash);
  CHECK(restored.t == 1);
  CHECK(restored.bundle.udo.size() == 2);
  CHECK(restored.history.size() == 1);
  CHECK(CodeOf([&] { LoadCheckpoint(full, 1, config.run, "ffffffffffffffff"); }) ==
        ErrorCode::kConfig);
  CHECK(CodeOf([&] { ReadParams(full + "/params_0.json", "ffffffffffffffff"); }) ==
        ErrorCode::kConfig);

  CHECK(Cli({"report", full, "--csv", dir / "all.csv"}) == 0);
  CHECK(ReadFile(dir / "all.csv") == csv);
  const std::string text = ReportRuns({full}, "");
  CHECK(text.find("pseudo") != std::string::npos);

  // A different config cannot be reported together with this one.
  WriteFileAtomic(dir / "other.cfg", std::string(kTinyConfig) + "seed = 9\n");
  const std::string other = dir / "other";
  REQUIRE(Cli({"run", dir / "other.cfg", "--out", other, "--stop-after", "1"}) == 0);
  CHECK(Cli({"report", full, other}) == 2);
  // Resuming with another config is refused.
  CHECK(Cli({"run", dir / "other.cfg", "--out", full, "--resume"}) == 2);

  fs::create_directories(dir / "empty");
  CHECK(Cli({"report", dir / "empty"}) == 3);
  CHECK(Cli({"run", dir / "missing.cfg"}) != 0);
}

TEST_CASE("ablate runs every mode under one root") {
  TempDir dir;
  WriteFileAtomic(dir / "tiny.cfg", std::string(kTinyConfig) + "T = 1\n");
  CHECK(Cli({"ablate", dir / "tiny.cfg", "--out", dir / "abl"}) == 2);  // T twice

  std::string cfg = kTinyConfig;
  cfg.replace(cfg.find("T = 2"), 5, "T = 1");
  WriteFileAtomic(dir / "one.cfg", cfg);
  REQUIRE(Cli({"ablate", dir / "one.cfg", "--out", dir / "abl"}) == 0);
  const std::vector<std::string> runs = FindRuns(dir / "abl");
  CHECK(runs.size() == 3);
  for (const char* mode : {"joint", "udo-only", "moa-only"}) {
    CHECK(ReadRunManifest(dir / (std::string("abl/") + mode)).mode == mode);
  }
  const std::string text = ReportRuns(runs, "");
  CHECK(text.find("moa-only") != std::string::npos);

  // Initial params can be built once and shared.
  REQUIRE(Cli({"bootstrap-pretrain", dir / "one.cfg", "--out", dir / "p0.json"}) == 0);
  REQUIRE(Cli({"run", dir / "one.cfg", "--out", dir / "reuse", "--params0",
               dir / "p0.json"}) == 0);
  CHECK(ReadFile(dir / "reuse/params_0.json") ==
        ReadFile(dir / "abl/joint/params_0.json"));
  CHECK(ReadFile(dir / "reuse/metrics.csv") == ReadFile(dir / "abl/joint/metrics.csv"));
}
