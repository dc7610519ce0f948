#ifndef ODIP_LOOPRUNNER_DATABASE_H_
#define ODIP_LOOPRUNNER_DATABASE_H_

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "odip/core/geometry.h"
#include "odip/detector/detector.h"
#include "odip/grasp_sim/grasp_sim.h"
#include "odip/scenegen/image_record.h"

namespace odip::looprunner {

struct MoaEntry {
  scenegen::ImageRecord image;
  Annotation label;
};

struct PseudoEntry {
  scenegen::ImageRecord image;
  std::vector<Annotation> labels;
};

// D_UDO, D_MOA and D_Support only ever grow. D_Pseudo is rebuilt every stage.
struct DatabaseBundle {
  std::vector<scenegen::ImageRecord> udo;
  std::vector<MoaEntry> moa;
  // Per category id, in capture order.
  std::map<int, std::vector<scenegen::ImageRecord>> support;
  std::vector<PseudoEntry> pseudo;

  void AppendRound(const grasp_sim::GorResult& round);
  int SupportCount() const;
  int PseudoAnnotationCount() const;
};

enum class EntrySource { kPseudo, kMoa };

// One element of D_All: an image with its labels and where they came from.
struct JointEntry {
  EntrySource source = EntrySource::kMoa;
  scenegen::ImageRecord image;
  std::vector<Annotation> labels;
  double weight = 1.0;
};

enum class AblationMode { kJoint, kUdoOnly, kMoaOnly };

std::string_view AblationModeName(AblationMode mode);
AblationMode ParseAblationMode(std::string_view name);

// Tagged concatenation, pseudo entries first. udo-only keeps only pseudo
// entries, moa-only only MOA entries. pseudo_weight scales the objective
// weight of pseudo entries (1 = uniform over entries).
std::vector<JointEntry> BuildJointSet(std::span<const PseudoEntry> pseudo,
                                      std::span<const MoaEntry> moa,
                                      AblationMode mode = AblationMode::kJoint,
                                      double pseudo_weight = 1.0);

std::vector<JointEntry> MoaEntries(std::span<const MoaEntry> moa);

// Draws k supports of one category, excluding captures of exclude_round when
// enough other captures exist. Throws Error(kEmptySupport) when the category
// has none.
std::vector<scenegen::ImageRecord> SampleSupports(
    const DatabaseBundle& bundle, CategoryId category, int k,
    const std::string& exclude_round, std::uint64_t seed);

// The k most recent supports of a category.
std::vector<scenegen::ImageRecord> RecentSupports(const DatabaseBundle& bundle,
                                                  CategoryId category, int k);

struct SampledTask {
  detector::MetaTask task;
  EntrySource source = EntrySource::kMoa;
};

// Builds n_tasks tasks. Pool entries are visited in a seeded permutation; the
// first pass conditions each entry on supports of its own category, later
// passes on the other categories of `categories` in turn, so every proposal
// of those tasks is background. Positives are always filtered to the support
// category.
std::vector<SampledTask> SampleTaskSet(std::span<const JointEntry> pool,
                                       const DatabaseBundle& bundle,
                                       std::span<const CategoryId> categories,
                                       int k, int n_tasks, std::uint64_t seed,
                                       detector::FeatureCache* cache = nullptr);

}  // namespace odip::looprunner

#endif  // ODIP_LOOPRUNNER_DATABASE_H_
