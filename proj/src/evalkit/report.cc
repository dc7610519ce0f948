#include "odip/evalkit/report.h"

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>
#include <vector>

#include "odip/core/error.h"
#include "odip/scenegen/scenegen.h"

namespace odip::evalkit {
namespace {

using nlohmann::json;

json Optional(std::optional<double> v) { return v ? json(*v) : json(nullptr); }

std::optional<double> ReadOptional(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

// Categories evaluated anywhere in the reports, by id.
std::map<int, std::string> CategoryColumns(std::span<const MetricsReport> reports) {
  std::map<int, std::string> columns;
  for (const MetricsReport& r : reports) {
    for (const EvalResult* e : {&r.sparse, &r.dense}) {
      for (const CategoryResult& c : e->categories) columns[c.category.id] = c.name;
    }
  }
  return columns;
}

std::optional<double> CategoryAp(const EvalResult& result, int id) {
  for (const CategoryResult& c : result.categories) {
    if (c.category.id == id) return c.ap;
  }
  return std::nullopt;
}

int ImagesCollected(const DatabaseSizes& s) { return s.udo + s.moa + s.support; }

}  // namespace

json EvalResultToJson(const EvalResult& result) {
  json categories = json::array();
  for (const CategoryResult& c : result.categories) {
    categories.push_back({{"id", c.category.id},
                          {"role", CategoryRoleName(c.category.role)},
                          {"name", c.name},
                          {"ap", Optional(c.ap)},
                          {"ap50", Optional(c.ap50)},
                          {"detections", c.detections},
                          {"ground_truth", c.ground_truth}});
  }
  return {{"ap", Optional(result.ap)},
          {"ap50", Optional(result.ap50)},
          {"detections", result.detections},
          {"ground_truth", result.ground_truth},
          {"categories", categories}};
}

EvalResult EvalResultFromJson(const json& j) {
  EvalResult result;
  result.ap = ReadOptional(j, "ap");
  result.ap50 = ReadOptional(j, "ap50");
  result.detections = j.at("detections").get<int>();
  result.ground_truth = j.at("ground_truth").get<int>();
  for (const json& c : j.at("categories")) {
    CategoryResult row;
    row.category = {c.at("id").get<int>(),
                    ParseCategoryRole(c.at("role").get<std::string>())};
    row.name = c.at("name").get<std::string>();
    row.ap = ReadOptional(c, "ap");
    row.ap50 = ReadOptional(c, "ap50");
    row.detections = c.at("detections").get<int>();
    row.ground_truth = c.at("ground_truth").get<int>();
    result.categories.push_back(std::move(row));
  }
  return result;
}

json PseudoQualityToJson(const PseudoQuality& q) {
  return {{"mean_iou", q.mean_iou},
          {"precision", Optional(q.precision)},
          {"recall", q.recall},
          {"pseudo_boxes", q.pseudo_boxes},
          {"ground_truth", q.ground_truth}};
}

PseudoQuality PseudoQualityFromJson(const json& j) {
  PseudoQuality q;
  q.mean_iou = j.at("mean_iou").get<double>();
  q.precision = ReadOptional(j, "precision");
  q.recall = j.at("recall").get<double>();
  q.pseudo_boxes = j.at("pseudo_boxes").get<int>();
  q.ground_truth = j.at("ground_truth").get<int>();
  return q;
}

json ReportToJson(const MetricsReport& r) {
  return {{"stage", r.stage},
          {"mode", r.mode},
          {"config_hash", r.config_hash},
          {"sizes",
           {{"udo", r.sizes.udo},
            {"moa", r.sizes.moa},
            {"support", r.sizes.support},
            {"pseudo_annotations", r.sizes.pseudo_annotations}}},
          {"eval_sparse", EvalResultToJson(r.sparse)},
          {"eval_dense", EvalResultToJson(r.dense)},
          {"pseudo", r.pseudo ? PseudoQualityToJson(*r.pseudo) : json(nullptr)}};
}

MetricsReport ReportFromJson(const json& j) {
  try {
    MetricsReport r;
    r.stage = j.at("stage").get<int>();
    r.mode = j.at("mode").get<std::string>();
    r.config_hash = j.at("config_hash").get<std::string>();
    const json& s = j.at("sizes");
    r.sizes = {s.at("udo").get<int>(), s.at("moa").get<int>(),
               s.at("support").get<int>(), s.at("pseudo_annotations").get<int>()};
    r.sparse = EvalResultFromJson(j.at("eval_sparse"));
    r.dense = EvalResultFromJson(j.at("eval_dense"));
    if (!j.at("pseudo").is_null()) r.pseudo = PseudoQualityFromJson(j.at("pseudo"));
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kIo, std::string("malformed metrics report: ") + e.what());
  }
}

std::string FormatMetric(std::optional<double> value) {
  if (!value) return "";
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.6f", *value);
  return buffer;
}

std::string MetricsCsv(std::span<const MetricsReport> reports) {
  const std::map<int, std::string> columns = CategoryColumns(reports);
  std::ostringstream out;
  out << "stage,mode,images,udo,moa,support,pseudo_annotations";
  for (const char* set : {"sparse", "dense"}) {
    out << ',' << set << "_ap," << set << "_ap50";
    for (const auto& [id, name] : columns) out << ',' << set << "_ap_" << name;
  }
  out << ",pseudo_mean_iou,pseudo_precision,pseudo_recall,config_hash\n";
  for (const MetricsReport& r : reports) {
    out << r.stage << ',' << r.mode << ',' << ImagesCollected(r.sizes) << ','
        << r.sizes.udo << ',' << r.sizes.moa << ',' << r.sizes.support << ','
        << r.sizes.pseudo_annotations;
    for (const EvalResult* e : {&r.sparse, &r.dense}) {
      out << ',' << FormatMetric(e->ap) << ',' << FormatMetric(e->ap50);
      for (const auto& [id, name] : columns) {
        out << ',' << FormatMetric(CategoryAp(*e, id));
      }
    }
    if (r.pseudo) {
      out << ',' << FormatMetric(r.pseudo->mean_iou) << ','
          << FormatMetric(r.pseudo->precision) << ','
          << FormatMetric(r.pseudo->recall);
    } else {
      out << ",,,";
    }
    out << ',' << r.config_hash << '\n';
  }
  return out.str();
}

std::string MetricsTable(std::span<const MetricsReport> reports) {
  const std::map<int, std::string> columns = CategoryColumns(reports);
  std::ostringstream out;
  auto cell = [&](const std::string& text, std::size_t width) {
    out << text;
    for (std::size_t i = text.size(); i < width; ++i) out << ' ';
  };
  for (const char* set : {"eval-sparse", "eval-dense"}) {
    const bool sparse = set[5] == 's';
    out << set << '\n';
    std::vector<std::string> header = {"stage", "images", "AP", "AP50"};
    for (const auto& [id, name] : columns) header.push_back(name);
    for (const std::string& h : header) cell(h, 10);
    out << '\n';
    for (const MetricsReport& r : reports) {
      const EvalResult& e = sparse ? r.sparse : r.dense;
      auto pct = [](std::optional<double> v) {
        if (!v) return std::string("-");
        char buffer[16];
        std::snprintf(buffer, sizeof(buffer), "%.1f", 100.0 * *v);
        return std::string(buffer);
      };
      cell(std::to_string(r.stage), 10);
      cell(std::to_string(ImagesCollected(r.sizes)), 10);
      cell(pct(e.ap), 10);
      cell(pct(e.ap50), 10);
      for (const auto& [id, name] : columns) cell(pct(CategoryAp(e, id)), 10);
      out << '\n';
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace odip::evalkit
