#include "odip/harness/commands.h"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "odip/core/error.h"
#include "odip/core/hash.h"
#include "odip/harness/annotation_file.h"
#include "odip/harness/persistence.h"
#include "odip/harness/pnm.h"

namespace odip::harness {

namespace fs = std::filesystem;
using evalkit::MetricsReport;
using nlohmann::json;

ExperimentConfig DefaultConfig() {
  return ParseConfig(
      "T = 16\nN = 16\nL = 16\neta = 0.0001\nk = 3\n"
      "schedule.1 = cube,can,box,bottle\n");
}

namespace {

double SecondsSince(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                       start)
      .count();
}

std::string Percent(std::optional<double> v) {
  if (!v) return "-";
  char buffer[16];
  std::snprintf(buffer, sizeof(buffer), "%.1f", 100.0 * *v);
  return buffer;
}

void Cell(std::ostream& out, const std::string& text, std::size_t width) {
  out << text;
  for (std::size_t i = text.size(); i < width; ++i) out << ' ';
}

}  // namespace

std::vector<MetricsReport> RunExperiment(const ExperimentConfig& config,
                                         const std::string& run_dir,
                                         const RunOptions& options) {
  const looprunner::RunConfig& rc = config.run;
  const std::string hash = ConfigHash(config);
  const std::string mode(looprunner::AblationModeName(rc.mode));
  auto log = [&](const std::string& message) {
    if (options.log) options.log(message);
  };
  const fs::path root(run_dir);
  const std::string timing_path = (root / "timing.json").string();
  json timing = {{"bootstrap_seconds", 0.0}, {"stages", json::object()}};

  looprunner::StageState state;
  if (HasRunManifest(run_dir)) {
    if (!options.resume) {
      throw Error(ErrorCode::kConfig,
                  run_dir + " already holds a run; resume it or pick another "
                            "directory");
    }
    const RunManifest manifest = ReadRunManifest(run_dir);
    if (manifest.config_hash != hash || manifest.mode != mode) {
      throw Error(ErrorCode::kConfig,
                  run_dir + " was started with config " +
                      manifest.config_hash + " (" + manifest.mode +
                      "), not " + hash + " (" + mode + ")");
    }
    const int done = LatestCheckpoint(run_dir);
    state = LoadCheckpoint(run_dir, done, rc, hash);
    if (fs::exists(timing_path)) timing = ReadJson(timing_path);
    log("resuming after stage " + std::to_string(done));
  } else {
    const auto start = std::chrono::steady_clock::now();
    detector::DetectorParams params_0;
    if (!options.params_0_path.empty()) {
      params_0 = ReadParams(options.params_0_path, hash);
    } else {
      detector::FeatureCache cache;
      params_0 = looprunner::BuildInitialParams(rc, &cache);
    }
    timing["bootstrap_seconds"] = SecondsSince(start);
    WriteParams((root / "params_0.json").string(), params_0, hash);
    WriteRunManifest(run_dir, {hash, mode, rc.T, CanonicalConfig(config)});
    state = looprunner::InitialState(rc, std::move(params_0));
  }

  looprunner::RunContext context(rc, hash);
  while (state.t < rc.T) {
    if (options.stop_after > 0 && state.t >= options.stop_after) break;
    const auto start = std::chrono::steady_clock::now();
    state = looprunner::RunStage(state, rc, context);
    const double seconds = SecondsSince(start);
    WriteCheckpoint(run_dir, state, hash);
    WriteFileAtomic((root / "metrics.csv").string(),
                    evalkit::MetricsCsv(state.history));
    timing["stages"][std::to_string(state.t)] = seconds;
    WriteJson(timing_path, timing);
    const MetricsReport& r = state.history.back();
    char line[160];
    std::snprintf(line, sizeof(line),
                  "%s stage %d: sparse AP %s, dense AP %s (%.1f s)",
                  mode.c_str(), r.stage, Percent(r.sparse.ap).c_str(),
                  Percent(r.dense.ap).c_str(), seconds);
    log(line);
  }
  return state.history;
}

DatasetSummary GenerateDataset(scenegen::TableKind kind, int n_images,
                               std::uint64_t seed, const std::string& out_dir,
                               const ExperimentConfig& config) {
  if (kind != scenegen::TableKind::kEvalSparse &&
      kind != scenegen::TableKind::kEvalDense) {
    throw Error(ErrorCode::kConfig, "dataset kind must be sparse or dense");
  }
  if (n_images < 1) {
    throw Error(ErrorCode::kConfig, "a dataset needs at least one image");
  }
  const std::string hash = ConfigHash(config);
  const std::vector<CategoryId> novel = config.run.AllNovelCategories();
  const std::vector<CategoryId>& base = config.run.base_categories;
  const std::vector<scenegen::RenderedScene> scenes = scenegen::MakeEvalDataset(
      kind, n_images, novel, base, seed, config.run.scene);

  const fs::path root(out_dir);
  const std::string kind_name(scenegen::TableKindName(kind));
  json entries = json::array();
  for (int i = 0; i < n_images; ++i) {
    char id[64];
    std::snprintf(id, sizeof(id), "%s-%05d", kind_name.c_str(), i);
    const std::string image_rel = std::string("images/") + id + ".ppm";
    const std::string ann_rel = std::string("annotations/") + id + ".json";
    const scenegen::RenderedScene& scene = scenes[i];
    const std::string ppm = EncodePpm(scene.raster, "config " + hash);
    WriteFileAtomic((root / image_rel).string(), ppm);
    WriteAnnotationFile((root / ann_rel).string(),
                        {id, scene.raster.width(), scene.raster.height(),
                         scene.ground_truth, hash});
    entries.push_back({{"id", id},
                       {"image", image_rel},
                       {"annotation", ann_rel},
                       {"image_fnv1a", HexDigest(Fnv1a64(ppm))}});
  }
  auto names = [](const std::vector<CategoryId>& ids) {
    json out = json::array();
    for (CategoryId c : ids) {
      out.push_back(scenegen::Catalog::Default().Get(c.id).name);
    }
    return out;
  };
  const std::string manifest_path = (root / "manifest.json").string();
  WriteJson(manifest_path, {{"schema_version", 1},
                            {"config_hash", hash},
                            {"kind", kind_name},
                            {"seed", seed},
                            {"images", n_images},
                            {"novel", names(novel)},
                            {"base", names(base)},
                            {"entries", std::move(entries)}});
  return {n_images, manifest_path};
}

std::string AblationTable(
    const std::map<std::string, std::vector<MetricsReport>>& by_mode,
    const std::vector<int>& stages) {
  std::vector<std::string> order;
  for (const char* m : {"joint", "udo-only", "moa-only"}) {
    if (by_mode.count(m)) order.push_back(m);
  }
  for (const auto& [mode, reports] : by_mode) {
    if (std::find(order.begin(), order.end(), mode) == order.end()) {
      order.push_back(mode);
    }
  }
  std::ostringstream out;
  for (const bool sparse : {true, false}) {
    out << "AP on " << (sparse ? "eval-sparse" : "eval-dense") << '\n';
    Cell(out, "mode", 12);
    for (int s : stages) Cell(out, "stage " + std::to_string(s), 10);
    out << '\n';
    for (const std::string& mode : order) {
      Cell(out, mode, 12);
      for (int s : stages) {
        std::optional<double> ap;
        for (const MetricsReport& r : by_mode.at(mode)) {
          if (r.stage == s) ap = sparse ? r.sparse.ap : r.dense.ap;
        }
        Cell(out, Percent(ap), 10);
      }
      out << '\n';
    }
    out << '\n';
  }
  return out.str();
}

std::vector<std::string> FindRuns(const std::string& path) {
  if (HasRunManifest(path)) return {path};
  std::vector<std::string> runs;
  std::error_code ec;
  if (fs::is_directory(path, ec)) {
    for (const auto& entry : fs::directory_iterator(path, ec)) {
      if (entry.is_directory() && HasRunManifest(entry.path().string())) {
        runs.push_back(entry.path().string());
      }
    }
  }
  std::sort(runs.begin(), runs.end());
  return runs;
}

namespace {

struct LoadedRun {
  std::string dir;
  RunManifest manifest;
  std::vector<MetricsReport> reports;
};

std::vector<LoadedRun> LoadRuns(const std::vector<std::string>& run_dirs) {
  if (run_dirs.empty()) throw Error(ErrorCode::kIo, "no run directories found");
  std::vector<LoadedRun> runs;
  for (const std::string& dir : run_dirs) {
    LoadedRun run{dir, ReadRunManifest(dir), LoadReports(dir)};
    if (run.reports.empty()) {
      throw Error(ErrorCode::kIo, dir + " holds no completed stage");
    }
    for (const MetricsReport& r : run.reports) {
      if (r.config_hash != run.manifest.config_hash) {
        throw Error(ErrorCode::kConfig,
                    dir + ": stage report with a foreign config hash");
      }
    }
    if (!runs.empty() &&
        run.manifest.config_hash != runs.front().manifest.config_hash) {
      throw Error(ErrorCode::kConfig,
                  "refusing to merge runs with config hashes " +
                      runs.front().manifest.config_hash + " and " +
                      run.manifest.config_hash);
    }
    runs.push_back(std::move(run));
  }
  return runs;
}

std::vector<int> EvenStages(const std::vector<LoadedRun>& runs) {
  int last = 0;
  for (const LoadedRun& run : runs) {
    last = std::max(last, run.reports.back().stage);
  }
  std::vector<int> stages;
  for (int s = 2; s <= last; s += 2) stages.push_back(s);
  if (stages.empty()) stages.push_back(last);
  return stages;
}

void SizesTable(std::ostream& out, const std::vector<MetricsReport>& reports) {
  out << "database sizes\n";
  for (const char* h : {"stage", "udo", "moa", "support", "pseudo"}) {
    Cell(out, h, 10);
  }
  out << '\n';
  for (const MetricsReport& r : reports) {
    Cell(out, std::to_string(r.stage), 10);
    Cell(out, std::to_string(r.sizes.udo), 10);
    Cell(out, std::to_string(r.sizes.moa), 10);
    Cell(out, std::to_string(r.sizes.support), 10);
    Cell(out, std::to_string(r.sizes.pseudo_annotations), 10);
    out << '\n';
  }
  out << '\n';
}

void PseudoSeries(std::ostream& out, const std::vector<MetricsReport>& reports) {
  std::vector<std::pair<int, double>> series;
  out << "pseudo-label quality\n";
  for (const char* h : {"stage", "mean IoU", "precision", "recall", "boxes"}) {
    Cell(out, h, 11);
  }
  out << '\n';
  for (const MetricsReport& r : reports) {
    if (!r.pseudo) continue;
    Cell(out, std::to_string(r.stage), 11);
    Cell(out, evalkit::FormatMetric(r.pseudo->mean_iou), 11);
    Cell(out, r.pseudo->precision ? evalkit::FormatMetric(r.pseudo->precision)
                                  : "-",
         11);
    Cell(out, evalkit::FormatMetric(r.pseudo->recall), 11);
    Cell(out, std::to_string(r.pseudo->pseudo_boxes), 11);
    out << '\n';
    series.emplace_back(r.stage, r.pseudo->mean_iou);
  }
  if (series.size() >= 2) {
    int rising = 0;
    for (std::size_t i = 1; i < series.size(); ++i) {
      if (series[i].second >= series[i - 1].second) ++rising;
    }
    char line[160];
    std::snprintf(line, sizeof(line),
                  "mean IoU %s: non-decreasing at %d of %zu steps, "
                  "stage %d %.4f -> stage %d %.4f\n",
                  rising == static_cast<int>(series.size() - 1)
                      ? "monotone"
                      : "not monotone",
                  rising, series.size() - 1, series.front().first,
                  series.front().second, series.back().first,
                  series.back().second);
    out << line;
  } else if (series.empty()) {
    out << "not tracked\n";
  }
  out << '\n';
}

}  // namespace

std::string ReportRuns(const std::vector<std::string>& run_dirs,
                       const std::string& csv_path) {
  const std::vector<LoadedRun> runs = LoadRuns(run_dirs);
  std::ostringstream out;
  std::vector<MetricsReport> all;
  std::map<std::string, std::vector<MetricsReport>> by_mode;
  for (const LoadedRun& run : runs) {
    out << "run " << run.dir << " (" << run.manifest.mode << ", config "
        << run.manifest.config_hash << ", " << run.reports.size() << " of "
        << run.manifest.stages << " stages)\n\n";
    out << evalkit::MetricsTable(run.reports);
    SizesTable(out, run.reports);
    PseudoSeries(out, run.reports);
    all.insert(all.end(), run.reports.begin(), run.reports.end());
    by_mode[run.manifest.mode] = run.reports;
  }
  if (by_mode.size() > 1) out << AblationTable(by_mode, EvenStages(runs));
  if (!csv_path.empty()) WriteFileAtomic(csv_path, evalkit::MetricsCsv(all));
  return out.str();
}

namespace {

int Fail(const std::exception& e, int code) {
  std::cerr << "odip: " << e.what() << '\n';
  return code;
}

void LogToStderr(const std::string& message) {
  std::cerr << message << std::endl;
}

}  // namespace

int CliMain(int argc, char** argv) {
  CLI::App app{"Grasp-driven few-shot detector adaptation, simulated"};
  app.require_subcommand(1);

  std::string kind;
  int images = 0;
  std::uint64_t seed = 0;
  std::string out;
  std::string config_path;
  auto* gen = app.add_subcommand("gen-dataset", "Write eval-style scenes");
  gen->add_option("--kind", kind, "sparse or dense")
      ->required()
      ->check(CLI::IsMember({"sparse", "dense"}));
  gen->add_option("--images", images, "Number of scenes")
      ->required()
      ->check(CLI::PositiveNumber);
  gen->add_option("--seed", seed, "Dataset seed");
  gen->add_option("--out", out, "Output directory")->required();
  gen->add_option("--config", config_path,
                  "Config supplying categories and scene parameters");

  bool resume = false;
  int stop_after = 0;
  std::string params_0;
  auto* run = app.add_subcommand("run", "Run every stage of a config");
  run->add_option("config", config_path, "Config file")->required();
  run->add_option("--out", out, "Run directory (default: out_dir or runs/<hash>)");
  run->add_flag("--resume", resume, "Continue an interrupted run");
  run->add_option("--stop-after", stop_after, "Stop after this stage")
      ->check(CLI::NonNegativeNumber);
  run->add_option("--params0", params_0,
                  "Initial params from bootstrap-pretrain");

  std::string mode = "all";
  auto* ablate = app.add_subcommand("ablate", "Compare training-data sources");
  ablate->add_option("config", config_path, "Config file")->required();
  ablate->add_option("--mode", mode, "joint, udo-only, moa-only or all")
      ->check(CLI::IsMember({"joint", "udo-only", "moa-only", "all"}));
  ablate->add_option("--out", out, "Directory holding one run per mode");
  ablate->add_flag("--resume", resume, "Continue interrupted runs");
  ablate->add_option("--params0", params_0,
                     "Initial params from bootstrap-pretrain");

  std::vector<std::string> run_dirs;
  std::string csv_path;
  auto* report = app.add_subcommand("report", "Summarize finished runs");
  report->add_option("runs", run_dirs, "Run directories or ablation roots")
      ->required();
  report->add_option("--csv", csv_path, "Also write all rows as CSV");

  auto* boot = app.add_subcommand("bootstrap-pretrain",
                                  "Build the initial detector");
  boot->add_option("config", config_path, "Config file")->required();
  boot->add_option("--out", out, "Params file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    auto load = [&] {
      return config_path.empty() ? DefaultConfig() : LoadConfig(config_path);
    };
    auto run_dir_for = [&](const ExperimentConfig& config) {
      if (!out.empty()) return out;
      if (!config.out_dir.empty()) return config.out_dir;
      return "runs/" + ConfigHash(config);
    };
    RunOptions options;
    options.resume = resume;
    options.stop_after = stop_after;
    options.params_0_path = params_0;
    options.log = LogToStderr;

    if (*gen) {
      const DatasetSummary summary = GenerateDataset(
          scenegen::ParseTableKind(kind), images, seed, out, load());
      std::cout << "wrote " << summary.images << " scenes, manifest "
                << summary.manifest_path << '\n';
    } else if (*run) {
      const ExperimentConfig config = load();
      const std::string dir = run_dir_for(config);
      const std::vector<MetricsReport> reports =
          RunExperiment(config, dir, options);
      std::cout << evalkit::MetricsTable(reports);
      std::cout << "metrics: " << (fs::path(dir) / "metrics.csv").string()
                << '\n';
    } else if (*ablate) {
      const ExperimentConfig base = load();
      const std::string root = run_dir_for(base);
      std::vector<std::string> modes = {"joint", "udo-only", "moa-only"};
      if (mode != "all") modes = {mode};
      for (const std::string& m : modes) {
        ExperimentConfig config = base;
        config.run.mode = looprunner::ParseAblationMode(m);
        RunExperiment(config, (fs::path(root) / m).string(), options);
      }
      const std::vector<LoadedRun> runs = LoadRuns(FindRuns(root));
      std::map<std::string, std::vector<MetricsReport>> by_mode;
      for (const LoadedRun& r : runs) by_mode[r.manifest.mode] = r.reports;
      std::cout << AblationTable(by_mode, EvenStages(runs));
    } else if (*report) {
      std::vector<std::string> dirs;
      for (const std::string& path : run_dirs) {
        for (const std::string& dir : FindRuns(path)) dirs.push_back(dir);
      }
      std::cout << ReportRuns(dirs, csv_path);
    } else if (*boot) {
      const ExperimentConfig config = load();
      detector::FeatureCache cache;
      const detector::DetectorParams params =
          looprunner::BuildInitialParams(config.run, &cache);
      WriteParams(out, params, ConfigHash(config));
      std::cout << "wrote " << out << '\n';
    }
  } catch (const Error& e) {
    return Fail(e, e.code() == ErrorCode::kConfig ? 2 : 3);
  } catch (const std::exception& e) {
    return Fail(e, 3);
  }
  return 0;
}

}  // namespace odip::harness
