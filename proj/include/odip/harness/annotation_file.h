#ifndef ODIP_HARNESS_ANNOTATION_FILE_H_
#define ODIP_HARNESS_ANNOTATION_FILE_H_

#include <string>
#include <vector>

#include "json.hpp"
#include "odip/core/geometry.h"
#include "odip/scenegen/scenegen.h"

namespace odip::harness {

inline constexpr int kAnnotationSchemaVersion = 1;

// Per-image annotation document shared by dataset export and checkpoints.
struct AnnotationFile {
  std::string image_id;
  int width = 0;
  int height = 0;
  std::vector<Annotation> records;
  // Written only when non-empty.
  std::string config_hash;

  friend bool operator==(const AnnotationFile&,
                         const AnnotationFile&) = default;
};

// Both directions validate: known category whose name and role agree with
// the catalog, box inside the image, confidence in [0, 1], and is_pseudo set
// exactly for pseudo records. Failures throw Error(kIo).
nlohmann::json AnnotationFileToJson(
    const AnnotationFile& file,
    const scenegen::Catalog& catalog = scenegen::Catalog::Default());
AnnotationFile AnnotationFileFromJson(
    const nlohmann::json& json,
    const scenegen::Catalog& catalog = scenegen::Catalog::Default());

nlohmann::json AnnotationToJson(
    const Annotation& annotation,
    const scenegen::Catalog& catalog = scenegen::Catalog::Default());
Annotation AnnotationFromJson(
    const nlohmann::json& json,
    const scenegen::Catalog& catalog = scenegen::Catalog::Default());

void WriteAnnotationFile(const std::string& path, const AnnotationFile& file);
AnnotationFile ReadAnnotationFile(const std::string& path);

}  // namespace odip::harness

#endif  // ODIP_HARNESS_ANNOTATION_FILE_H_
