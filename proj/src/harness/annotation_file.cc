#include "odip/harness/annotation_file.h"

#include <cmath>

#include "odip/core/error.h"
#include "odip/harness/persistence.h"

namespace odip::harness {

using nlohmann::json;

namespace {

[[noreturn]] void Invalid(const std::string& what) {
  throw Error(ErrorCode::kIo, "annotation file: " + what);
}

void CheckCategory(const Annotation& a, const scenegen::Catalog& catalog) {
  CategoryRole role;
  try {
    role = catalog.Get(a.category.id).id.role;
  } catch (const Error&) {
    Invalid("unknown category id " + std::to_string(a.category.id));
  }
  if (role != a.category.role) {
    Invalid("role disagrees with the catalog for category " +
            std::to_string(a.category.id));
  }
}

void CheckRecord(const Annotation& a, int width, int height,
                 const scenegen::Catalog& catalog) {
  CheckCategory(a, catalog);
  if (a.box.x_min() < 0 || a.box.y_min() < 0 || a.box.x_max() > width ||
      a.box.y_max() > height) {
    Invalid("box outside the image");
  }
  if (!(a.confidence >= 0.0 && a.confidence <= 1.0)) {
    Invalid("confidence outside [0, 1]");
  }
  if (a.is_pseudo != (a.source == AnnotationSource::kPseudo)) {
    Invalid("is_pseudo must be set exactly for pseudo records");
  }
}

}  // namespace

json AnnotationToJson(const Annotation& a, const scenegen::Catalog& catalog) {
  CheckCategory(a, catalog);
  return json{{"category_id", a.category.id},
              {"category_name", catalog.Get(a.category.id).name},
              {"role", CategoryRoleName(a.category.role)},
              {"box", {a.box.x_min(), a.box.y_min(), a.box.x_max(),
                       a.box.y_max()}},
              {"is_pseudo", a.is_pseudo},
              {"confidence", a.confidence},
              {"source", AnnotationSourceName(a.source)}};
}

Annotation AnnotationFromJson(const json& j, const scenegen::Catalog& catalog) {
  try {
    const json& box = j.at("box");
    if (!box.is_array() || box.size() != 4) Invalid("box needs 4 numbers");
    for (const json& v : box) {
      if (!v.is_number()) Invalid("box needs 4 numbers");
    }
    Annotation a;
    a.box = BBox(box[0].get<double>(), box[1].get<double>(),
                 box[2].get<double>(), box[3].get<double>());
    a.category.id = j.at("category_id").get<int>();
    a.category.role = ParseCategoryRole(j.at("role").get<std::string>());
    a.is_pseudo = j.at("is_pseudo").get<bool>();
    a.confidence = j.at("confidence").get<double>();
    a.source = ParseAnnotationSource(j.at("source").get<std::string>());
    CheckCategory(a, catalog);
    if (j.at("category_name").get<std::string>() !=
        catalog.Get(a.category.id).name) {
      Invalid("category name disagrees with the catalog");
    }
    return a;
  } catch (const json::exception& e) {
    Invalid(e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kIo) throw;
    Invalid(e.detail());
  }
}

json AnnotationFileToJson(const AnnotationFile& file,
                          const scenegen::Catalog& catalog) {
  json records = json::array();
  for (const Annotation& a : file.records) {
    CheckRecord(a, file.width, file.height, catalog);
    records.push_back(AnnotationToJson(a, catalog));
  }
  json out{{"schema_version", kAnnotationSchemaVersion},
           {"image_id", file.image_id},
           {"width", file.width},
           {"height", file.height},
           {"records", std::move(records)}};
  if (!file.config_hash.empty()) out["config_hash"] = file.config_hash;
  return out;
}

AnnotationFile AnnotationFileFromJson(const json& j,
                                      const scenegen::Catalog& catalog) {
  AnnotationFile file;
  try {
    if (j.at("schema_version").get<int>() != kAnnotationSchemaVersion) {
      Invalid("unsupported schema version");
    }
    file.image_id = j.at("image_id").get<std::string>();
    file.width = j.at("width").get<int>();
    file.height = j.at("height").get<int>();
    if (file.width <= 0 || file.height <= 0) Invalid("bad image size");
    if (j.contains("config_hash")) {
      file.config_hash = j.at("config_hash").get<std::string>();
    }
    const json& records = j.at("records");
    if (!records.is_array()) Invalid("records must be an array");
    for (const json& r : records) {
      Annotation a = AnnotationFromJson(r, catalog);
      CheckRecord(a, file.width, file.height, catalog);
      file.records.push_back(a);
    }
  } catch (const json::exception& e) {
    Invalid(e.what());
  }
  return file;
}

void WriteAnnotationFile(const std::string& path, const AnnotationFile& file) {
  WriteJson(path, AnnotationFileToJson(file));
}

AnnotationFile ReadAnnotationFile(const std::string& path) {
  return AnnotationFileFromJson(ReadJson(path));
}

}  // namespace odip::harness
