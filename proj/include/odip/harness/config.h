#ifndef ODIP_HARNESS_CONFIG_H_
#define ODIP_HARNESS_CONFIG_H_

#include <string>
#include <string_view>
#include <vector>

#include "odip/looprunner/looprunner.h"

namespace odip::harness {

struct ExperimentConfig {
  looprunner::RunConfig run;
  // Empty means the caller picks one.
  std::string out_dir;
};

// Line-oriented `key = value` text; `#` starts a comment. T, N, L, eta and k
// must be given; everything else falls back to the RunConfig defaults.
// Unknown or repeated keys, bad values and failed validation throw
// Error(kConfig) naming the line.
ExperimentConfig ParseConfig(std::string_view text);
ExperimentConfig LoadConfig(const std::string& path);

// Every key with its effective value, sorted by key; parses back to the same
// config.
std::string CanonicalConfig(const ExperimentConfig& config);

// Hash of the canonical text without the output directory and the ablation
// mode, so the runs of one ablation family share it.
std::string ConfigHash(const ExperimentConfig& config);

// The keys ParseConfig accepts; "schedule.<stage>" stands for one per stage.
std::vector<std::string> ConfigKeys();

}  // namespace odip::harness

#endif  // ODIP_HARNESS_CONFIG_H_
