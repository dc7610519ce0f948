#ifndef ODIP_HARNESS_PERSISTENCE_H_
#define ODIP_HARNESS_PERSISTENCE_H_

#include <string>
#include <vector>

#include "json.hpp"
#include "odip/evalkit/report.h"
#include "odip/looprunner/looprunner.h"

namespace odip::harness {

// I/O failures throw Error(kIo).
std::string ReadFile(const std::string& path);
// Writes to a sibling temp file and renames it into place, creating parent
// directories as needed.
void WriteFileAtomic(const std::string& path, const std::string& data);
nlohmann::json ReadJson(const std::string& path);
void WriteJson(const std::string& path, const nlohmann::json& json);

// Records keep their capture source instead of pixels; reading re-renders
// the raster and the hidden ground truth.
nlohmann::json ImageRecordToJson(const scenegen::ImageRecord& record);
scenegen::ImageRecord ImageRecordFromJson(const nlohmann::json& json,
                                          const scenegen::SceneConfig& config);

nlohmann::json BundleToJson(const looprunner::DatabaseBundle& bundle);
looprunner::DatabaseBundle BundleFromJson(const nlohmann::json& json,
                                          const scenegen::SceneConfig& config);

// Detector params wrapped with the hash of the config that produced them.
void WriteParams(const std::string& path, const detector::DetectorParams& params,
                 const std::string& config_hash);
// Throws Error(kConfig) when expected_hash is non-empty and differs.
detector::DetectorParams ReadParams(const std::string& path,
                                    const std::string& expected_hash = "");

struct RunManifest {
  std::string config_hash;
  std::string mode;
  int stages = 0;
  std::string config_text;
};

// Layout of a run directory:
//   manifest.json         RunManifest
//   params_0.json         the initial detector
//   stage_NNN/            params.json, database.json, metrics.json
//   metrics.csv           rows of every completed stage
//   timing.json           wall-clock seconds, kept apart from the metrics
std::string StageDir(const std::string& run_dir, int stage);
void WriteRunManifest(const std::string& run_dir, const RunManifest& manifest);
// Throws Error(kIo) when the directory holds no manifest.
RunManifest ReadRunManifest(const std::string& run_dir);
bool HasRunManifest(const std::string& run_dir);

// metrics.json is written last, so a stage directory without it is an
// interrupted stage and is ignored.
void WriteCheckpoint(const std::string& run_dir,
                     const looprunner::StageState& state,
                     const std::string& config_hash);
// Highest t such that stages 1..t all completed; 0 when none did.
int LatestCheckpoint(const std::string& run_dir);
looprunner::StageState LoadCheckpoint(const std::string& run_dir, int stage,
                                      const looprunner::RunConfig& config,
                                      const std::string& config_hash);
std::vector<evalkit::MetricsReport> LoadReports(const std::string& run_dir);

}  // namespace odip::harness

#endif  // ODIP_HARNESS_PERSISTENCE_H_
