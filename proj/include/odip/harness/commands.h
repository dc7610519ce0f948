#ifndef ODIP_HARNESS_COMMANDS_H_
#define ODIP_HARNESS_COMMANDS_H_

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "odip/evalkit/report.h"
#include "odip/harness/config.h"
#include "odip/scenegen/scenegen.h"

namespace odip::harness {

// T=16, N=16, L=16, eta=1e-4, k=3 with all four novel categories at stage 1.
ExperimentConfig DefaultConfig();

struct RunOptions {
  // Continue from the last complete stage of an existing run directory.
  bool resume = false;
  // Stop once this stage has been checkpointed; 0 runs to T.
  int stop_after = 0;
  // Use these initial params instead of running the bootstrap.
  std::string params_0_path;
  std::function<void(const std::string&)> log;
};

// Drives the loop through its stages, checkpointing each one. Refuses a
// directory that already holds a run unless resuming it with the same config
// hash. Returns the reports of every completed stage.
std::vector<evalkit::MetricsReport> RunExperiment(
    const ExperimentConfig& config, const std::string& run_dir,
    const RunOptions& options = {});

struct DatasetSummary {
  int images = 0;
  std::string manifest_path;
};

// Eval-style scenes as PPM files plus one annotation file each and a
// manifest. kind is sparse or dense.
DatasetSummary GenerateDataset(scenegen::TableKind kind, int n_images,
                               std::uint64_t seed, const std::string& out_dir,
                               const ExperimentConfig& config);

// AP per mode (rows) at the given stages (columns), for both eval sets.
std::string AblationTable(
    const std::map<std::string, std::vector<evalkit::MetricsReport>>& by_mode,
    const std::vector<int>& stages);

// Run directories below `path`: itself when it holds a manifest, otherwise
// its immediate subdirectories that do, in name order.
std::vector<std::string> FindRuns(const std::string& path);

// Consolidated text report of runs sharing one config hash; throws
// Error(kConfig) on mismatched hashes and Error(kIo) when there is no run.
// The CSV of all rows goes to csv_path when it is non-empty.
std::string ReportRuns(const std::vector<std::string>& run_dirs,
                       const std::string& csv_path);

// Entry point of the odip binary. Exit codes: 0 success, 2 config or usage
// error, 3 runtime failure.
int CliMain(int argc, char** argv);

}  // namespace odip::harness

#endif  // ODIP_HARNESS_COMMANDS_H_
