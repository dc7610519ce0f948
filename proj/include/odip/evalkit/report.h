#ifndef ODIP_EVALKIT_REPORT_H_
#define ODIP_EVALKIT_REPORT_H_

#include <optional>
#include <span>
#include <string>

#include "json.hpp"
#include "odip/evalkit/evalkit.h"

namespace odip::evalkit {

struct DatabaseSizes {
  int udo = 0;
  int moa = 0;
  int support = 0;
  int pseudo_annotations = 0;
  friend bool operator==(const DatabaseSizes&, const DatabaseSizes&) = default;
};

// One row per stage. Wall-clock time is kept out of this record so reports of
// identical runs serialize to identical bytes.
struct MetricsReport {
  int stage = 0;
  std::string mode;
  DatabaseSizes sizes;
  EvalResult sparse;
  EvalResult dense;
  std::optional<PseudoQuality> pseudo;
  std::string config_hash;
};

nlohmann::json EvalResultToJson(const EvalResult& result);
EvalResult EvalResultFromJson(const nlohmann::json& json);
nlohmann::json PseudoQualityToJson(const PseudoQuality& quality);
PseudoQuality PseudoQualityFromJson(const nlohmann::json& json);
nlohmann::json ReportToJson(const MetricsReport& report);
MetricsReport ReportFromJson(const nlohmann::json& json);

// Fixed six-decimal formatting; absent values are empty cells.
std::string FormatMetric(std::optional<double> value);

// One row per report: stage, images collected, database sizes, AP/AP50 and
// per-category AP for each eval set, then pseudo-label quality.
std::string MetricsCsv(std::span<const MetricsReport> reports);
// The same rows as aligned text, one block per eval set.
std::string MetricsTable(std::span<const MetricsReport> reports);

}  // namespace odip::evalkit

#endif  // ODIP_EVALKIT_REPORT_H_
