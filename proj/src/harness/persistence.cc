#include "odip/harness/persistence.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "odip/core/error.h"
#include "odip/detector/params_io.h"
#include "odip/harness/annotation_file.h"

namespace odip::harness {

namespace fs = std::filesystem;
using nlohmann::json;
using scenegen::ImageRecord;

std::string ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void WriteFileAtomic(const std::string& path, const std::string& data) {
  const fs::path target(path);
  std::error_code ec;
  if (target.has_parent_path()) fs::create_directories(target.parent_path(), ec);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw Error(ErrorCode::kIo, "short write to " + path);
  }
  fs::rename(tmp, target, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot rename into " + path);
}

json ReadJson(const std::string& path) {
  try {
    return json::parse(ReadFile(path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kIo, path + ": " + e.what());
  }
}

void WriteJson(const std::string& path, const json& j) {
  WriteFileAtomic(path, j.dump(1) + "\n");
}

namespace {

json CategoryToJson(CategoryId id) {
  return {{"id", id.id}, {"role", CategoryRoleName(id.role)}};
}

CategoryId CategoryFromJson(const json& j) {
  return {j.at("id").get<int>(),
          ParseCategoryRole(j.at("role").get<std::string>())};
}

json RgbToJson(Rgb c) { return json::array({c.r, c.g, c.b}); }

Rgb RgbFromJson(const json& j) {
  return {j.at(0).get<std::uint8_t>(), j.at(1).get<std::uint8_t>(),
          j.at(2).get<std::uint8_t>()};
}

json ObjectToJson(const scenegen::ObjectSpec& o) {
  return {{"category", CategoryToJson(o.category)},
          {"shape", scenegen::ArchetypeName(o.shape)},
          {"color", RgbToJson(o.base_color)},
          {"color_seed", o.color_seed},
          {"scale", o.scale},
          {"rotation", o.rotation}};
}

scenegen::ObjectSpec ObjectFromJson(const json& j) {
  scenegen::ObjectSpec o;
  o.category = CategoryFromJson(j.at("category"));
  o.shape = scenegen::ParseArchetype(j.at("shape").get<std::string>());
  o.base_color = RgbFromJson(j.at("color"));
  o.color_seed = j.at("color_seed").get<std::uint64_t>();
  o.scale = j.at("scale").get<double>();
  o.rotation = j.at("rotation").get<double>();
  return o;
}

json SourceToJson(const scenegen::CaptureSource& source) {
  if (const auto* spec = std::get_if<scenegen::SceneSpec>(&source)) {
    json objects = json::array();
    for (const scenegen::PlacedObject& p : spec->objects) {
      objects.push_back({{"object", ObjectToJson(p.object)},
                         {"x", p.center_x},
                         {"y", p.center_y}});
    }
    return {{"type", "scene"},
            {"kind", scenegen::TableKindName(spec->kind)},
            {"width", spec->width},
            {"height", spec->height},
            {"background", RgbToJson(spec->background)},
            {"seed", spec->seed},
            {"objects", std::move(objects)}};
  }
  const auto& view = std::get<scenegen::SupportViewSource>(source);
  return {{"type", "support-view"},
          {"object", ObjectToJson(view.object)},
          {"view", view.view_index},
          {"seed", view.seed}};
}

scenegen::CaptureSource SourceFromJson(const json& j) {
  if (j.at("type") == "scene") {
    scenegen::SceneSpec spec;
    spec.kind = scenegen::ParseTableKind(j.at("kind").get<std::string>());
    spec.width = j.at("width").get<int>();
    spec.height = j.at("height").get<int>();
    spec.background = RgbFromJson(j.at("background"));
    spec.seed = j.at("seed").get<std::uint64_t>();
    for (const json& p : j.at("objects")) {
      spec.objects.push_back({ObjectFromJson(p.at("object")),
                              p.at("x").get<double>(), p.at("y").get<double>()});
    }
    return spec;
  }
  if (j.at("type") != "support-view") {
    throw Error(ErrorCode::kIo, "unknown capture source type");
  }
  return scenegen::SupportViewSource{ObjectFromJson(j.at("object")),
                                     j.at("view").get<int>(),
                                     j.at("seed").get<std::uint64_t>()};
}

json AnnotationsToJson(const std::vector<Annotation>& annotations) {
  json out = json::array();
  for (const Annotation& a : annotations) out.push_back(AnnotationToJson(a));
  return out;
}

std::vector<Annotation> AnnotationsFromJson(const json& j) {
  std::vector<Annotation> out;
  for (const json& a : j) out.push_back(AnnotationFromJson(a));
  return out;
}

template <typename Fn>
auto Guarded(const std::string& what, Fn&& fn) {
  try {
    return fn();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kIo, what + ": " + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kIo || e.code() == ErrorCode::kConfig) throw;
    throw Error(ErrorCode::kIo, what + ": " + e.detail());
  }
}

}  // namespace

json ImageRecordToJson(const ImageRecord& r) {
  return {{"id", r.id},
          {"role", scenegen::ImageRoleName(r.role)},
          {"stage", r.stage},
          {"category", CategoryToJson(r.category)},
          {"round", r.round_key},
          {"source", SourceToJson(r.source)}};
}

ImageRecord ImageRecordFromJson(const json& j,
                                const scenegen::SceneConfig& config) {
  return Guarded("image record", [&] {
    ImageRecord r;
    r.id = j.at("id").get<std::string>();
    r.role = scenegen::ParseImageRole(j.at("role").get<std::string>());
    r.stage = j.at("stage").get<int>();
    r.category = CategoryFromJson(j.at("category"));
    r.round_key = j.at("round").get<std::string>();
    r.source = SourceFromJson(j.at("source"));
    if (const auto* spec = std::get_if<scenegen::SceneSpec>(&r.source)) {
      scenegen::RenderedScene scene = scenegen::GenerateScene(*spec, config);
      r.hidden_ground_truth = std::move(scene.ground_truth);
      r.raster = std::make_shared<const Image>(std::move(scene.raster));
    } else {
      r.raster = scenegen::RenderSource(r.source, config);
    }
    return r;
  });
}

json BundleToJson(const looprunner::DatabaseBundle& bundle) {
  json udo = json::array();
  for (const ImageRecord& r : bundle.udo) udo.push_back(ImageRecordToJson(r));
  json moa = json::array();
  for (const looprunner::MoaEntry& e : bundle.moa) {
    moa.push_back({{"image", ImageRecordToJson(e.image)},
                   {"label", AnnotationToJson(e.label)}});
  }
  json support = json::object();
  for (const auto& [category, records] : bundle.support) {
    json list = json::array();
    for (const ImageRecord& r : records) list.push_back(ImageRecordToJson(r));
    support[std::to_string(category)] = std::move(list);
  }
  // Pseudo entries point at their UDO image by id.
  json pseudo = json::array();
  for (const looprunner::PseudoEntry& e : bundle.pseudo) {
    pseudo.push_back(
        {{"image", e.image.id}, {"labels", AnnotationsToJson(e.labels)}});
  }
  return {{"udo", std::move(udo)},
          {"moa", std::move(moa)},
          {"support", std::move(support)},
          {"pseudo", std::move(pseudo)}};
}

looprunner::DatabaseBundle BundleFromJson(const json& j,
                                          const scenegen::SceneConfig& config) {
  return Guarded("database", [&] {
    looprunner::DatabaseBundle bundle;
    for (const json& r : j.at("udo")) {
      bundle.udo.push_back(ImageRecordFromJson(r, config));
    }
    for (const json& e : j.at("moa")) {
      bundle.moa.push_back({ImageRecordFromJson(e.at("image"), config),
                            AnnotationFromJson(e.at("label"))});
    }
    for (const auto& [key, list] : j.at("support").items()) {
      auto& records = bundle.support[std::stoi(key)];
      for (const json& r : list) {
        records.push_back(ImageRecordFromJson(r, config));
      }
    }
    std::map<std::string, const ImageRecord*> by_id;
    for (const ImageRecord& r : bundle.udo) by_id[r.id] = &r;
    for (const json& e : j.at("pseudo")) {
      const auto it = by_id.find(e.at("image").get<std::string>());
      if (it == by_id.end()) {
        throw Error(ErrorCode::kIo, "pseudo entry without its UDO image");
      }
      bundle.pseudo.push_back(
          {*it->second, AnnotationsFromJson(e.at("labels"))});
    }
    return bundle;
  });
}

void WriteParams(const std::string& path, const detector::DetectorParams& params,
                 const std::string& config_hash) {
  WriteJson(path, {{"config_hash", config_hash},
                   {"params", detector::ParamsToJson(params)}});
}

detector::DetectorParams ReadParams(const std::string& path,
                                    const std::string& expected_hash) {
  const json j = ReadJson(path);
  return Guarded(path, [&] {
    const std::string hash = j.at("config_hash").get<std::string>();
    if (!expected_hash.empty() && hash != expected_hash) {
      throw Error(ErrorCode::kConfig, path + " was produced by config " + hash +
                                          ", expected " + expected_hash);
    }
    return detector::ParamsFromJson(j.at("params"));
  });
}

std::string StageDir(const std::string& run_dir, int stage) {
  char name[32];
  std::snprintf(name, sizeof(name), "stage_%03d", stage);
  return (fs::path(run_dir) / name).string();
}

void WriteRunManifest(const std::string& run_dir, const RunManifest& m) {
  WriteJson((fs::path(run_dir) / "manifest.json").string(),
            {{"config_hash", m.config_hash},
             {"mode", m.mode},
             {"stages", m.stages},
             {"config", m.config_text}});
}

bool HasRunManifest(const std::string& run_dir) {
  return fs::is_regular_file(fs::path(run_dir) / "manifest.json");
}

RunManifest ReadRunManifest(const std::string& run_dir) {
  if (!HasRunManifest(run_dir)) {
    throw Error(ErrorCode::kIo, run_dir + " holds no run manifest");
  }
  const json j = ReadJson((fs::path(run_dir) / "manifest.json").string());
  return Guarded("manifest", [&] {
    return RunManifest{j.at("config_hash").get<std::string>(),
                       j.at("mode").get<std::string>(),
                       j.at("stages").get<int>(),
                       j.at("config").get<std::string>()};
  });
}

void WriteCheckpoint(const std::string& run_dir,
                     const looprunner::StageState& state,
                     const std::string& config_hash) {
  const fs::path dir = StageDir(run_dir, state.t);
  WriteParams((dir / "params.json").string(), state.params_current,
              config_hash);
  json categories = json::array();
  for (CategoryId c : state.categories) categories.push_back(CategoryToJson(c));
  json database = BundleToJson(state.bundle);
  database["categories"] = std::move(categories);
  database["config_hash"] = config_hash;
  WriteJson((dir / "database.json").string(), database);
  WriteJson((dir / "metrics.json").string(),
            evalkit::ReportToJson(state.history.back()));
}

int LatestCheckpoint(const std::string& run_dir) {
  int t = 0;
  while (fs::is_regular_file(fs::path(StageDir(run_dir, t + 1)) /
                             "metrics.json")) {
    ++t;
  }
  return t;
}

looprunner::StageState LoadCheckpoint(const std::string& run_dir, int stage,
                                      const looprunner::RunConfig& config,
                                      const std::string& config_hash) {
  const fs::path root(run_dir);
  looprunner::StageState state = looprunner::InitialState(
      config, ReadParams((root / "params_0.json").string(), config_hash));
  state.history = LoadReports(run_dir);
  if (static_cast<int>(state.history.size()) < stage) {
    throw Error(ErrorCode::kIo, "missing stage reports in " + run_dir);
  }
  state.history.resize(stage);
  if (stage == 0) return state;
  const fs::path dir = StageDir(run_dir, stage);
  state.t = stage;
  state.params_current =
      ReadParams((dir / "params.json").string(), config_hash);
  const json database = ReadJson((dir / "database.json").string());
  Guarded("database", [&] {
    if (database.at("config_hash") != config_hash) {
      throw Error(ErrorCode::kConfig, "checkpoint config hash mismatch");
    }
    state.categories.clear();
    for (const json& c : database.at("categories")) {
      state.categories.push_back(CategoryFromJson(c));
    }
    return 0;
  });
  state.bundle = BundleFromJson(database, config.scene);
  return state;
}

std::vector<evalkit::MetricsReport> LoadReports(const std::string& run_dir) {
  std::vector<evalkit::MetricsReport> reports;
  const int last = LatestCheckpoint(run_dir);
  for (int t = 1; t <= last; ++t) {
    const std::string path =
        (fs::path(StageDir(run_dir, t)) / "metrics.json").string();
    const json j = ReadJson(path);
    reports.push_back(Guarded(path, [&] { return evalkit::ReportFromJson(j); }));
  }
  return reports;
}

}  // namespace odip::harness
