#include "odip/looprunner/database.h"

#include <algorithm>
#include <numeric>

#include "odip/core/error.h"
#include "odip/core/random.h"

namespace odip::looprunner {

using scenegen::ImageRecord;

void DatabaseBundle::AppendRound(const grasp_sim::GorResult& round) {
  udo.push_back(round.udo_image);
  for (const ImageRecord& s : round.support_images) {
    support[s.category.id].push_back(s);
  }
  moa.push_back({round.moa_image, round.one_shot_label});
}

int DatabaseBundle::SupportCount() const {
  int n = 0;
  for (const auto& [id, records] : support) n += static_cast<int>(records.size());
  return n;
}

int DatabaseBundle::PseudoAnnotationCount() const {
  int n = 0;
  for (const PseudoEntry& e : pseudo) n += static_cast<int>(e.labels.size());
  return n;
}

std::string_view AblationModeName(AblationMode mode) {
  switch (mode) {
    case AblationMode::kJoint:
      return "joint";
    case AblationMode::kUdoOnly:
      return "udo-only";
    case AblationMode::kMoaOnly:
      return "moa-only";
  }
  return "?";
}

AblationMode ParseAblationMode(std::string_view name) {
  for (AblationMode m :
       {AblationMode::kJoint, AblationMode::kUdoOnly, AblationMode::kMoaOnly}) {
    if (AblationModeName(m) == name) return m;
  }
  throw Error(ErrorCode::kInvalidArgument,
              "unknown ablation mode: " + std::string(name));
}

std::vector<JointEntry> MoaEntries(std::span<const MoaEntry> moa) {
  std::vector<JointEntry> out;
  out.reserve(moa.size());
  for (const MoaEntry& e : moa) {
    out.push_back({EntrySource::kMoa, e.image, {e.label}, 1.0});
  }
  return out;
}

std::vector<JointEntry> BuildJointSet(std::span<const PseudoEntry> pseudo,
                                      std::span<const MoaEntry> moa,
                                      AblationMode mode, double pseudo_weight) {
  std::vector<JointEntry> all;
  if (mode != AblationMode::kMoaOnly) {
    for (const PseudoEntry& e : pseudo) {
      all.push_back({EntrySource::kPseudo, e.image, e.labels, pseudo_weight});
    }
  }
  if (mode != AblationMode::kUdoOnly) {
    std::vector<JointEntry> m = MoaEntries(moa);
    all.insert(all.end(), m.begin(), m.end());
  }
  return all;
}

std::vector<ImageRecord> SampleSupports(const DatabaseBundle& bundle,
                                        CategoryId category, int k,
                                        const std::string& exclude_round,
                                        std::uint64_t seed) {
  if (k < 1) throw Error(ErrorCode::kInvalidArgument, "k must be >= 1");
  const auto it = bundle.support.find(category.id);
  if (it == bundle.support.end() || it->second.empty()) {
    throw Error(ErrorCode::kEmptySupport,
                "no support images for category " + std::to_string(category.id));
  }
  const std::vector<ImageRecord>& all = it->second;
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (exclude_round.empty() || all[i].round_key != exclude_round) {
      candidates.push_back(i);
    }
  }
  if (static_cast<int>(candidates.size()) < k) {
    candidates.resize(all.size());
    std::iota(candidates.begin(), candidates.end(), std::size_t{0});
  }
  // Partial Fisher-Yates; with fewer candidates than k, shots repeat.
  Rng rng(seed);
  std::vector<ImageRecord> out;
  const int distinct = std::min<int>(k, static_cast<int>(candidates.size()));
  for (int i = 0; i < distinct; ++i) {
    const int j = rng.UniformInt(i, static_cast<int>(candidates.size()) - 1);
    std::swap(candidates[i], candidates[j]);
    out.push_back(all[candidates[i]]);
  }
  for (int i = distinct; i < k; ++i) out.push_back(out[i % distinct]);
  return out;
}

std::vector<ImageRecord> RecentSupports(const DatabaseBundle& bundle,
                                        CategoryId category, int k) {
  if (k < 1) throw Error(ErrorCode::kInvalidArgument, "k must be >= 1");
  const auto it = bundle.support.find(category.id);
  if (it == bundle.support.end() || it->second.empty()) {
    throw Error(ErrorCode::kEmptySupport,
                "no support images for category " + std::to_string(category.id));
  }
  const std::vector<ImageRecord>& all = it->second;
  const std::size_t n = std::min<std::size_t>(k, all.size());
  std::vector<ImageRecord> out(all.end() - n, all.end());
  for (std::size_t i = n; i < static_cast<std::size_t>(k); ++i) {
    out.push_back(out[i % n]);
  }
  return out;
}

std::vector<SampledTask> SampleTaskSet(std::span<const JointEntry> pool,
                                       const DatabaseBundle& bundle,
                                       std::span<const CategoryId> categories,
                                       int k, int n_tasks, std::uint64_t seed,
                                       detector::FeatureCache* cache) {
  if (n_tasks < 0) throw Error(ErrorCode::kInvalidArgument, "n_tasks < 0");
  if (pool.empty()) {
    if (n_tasks == 0) return {};
    throw Error(ErrorCode::kEmptySupport, "empty task pool");
  }
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(DeriveSeed(seed, 0x70));
  for (std::size_t i = order.size(); i-- > 1;) {
    std::swap(order[i], order[rng.UniformInt(0, static_cast<int>(i))]);
  }

  std::vector<SampledTask> tasks;
  tasks.reserve(n_tasks);
  for (int i = 0; i < n_tasks; ++i) {
    const std::size_t pass = i / pool.size();
    const JointEntry& entry = pool[order[i % pool.size()]];
    CategoryId category = entry.image.category;
    if (pass > 0) {
      // The pass-th other category, cycling.
      std::vector<CategoryId> others;
      for (CategoryId c : categories) {
        if (!(c == entry.image.category)) others.push_back(c);
      }
      if (!others.empty()) category = others[(pass - 1) % others.size()];
    }
    const std::vector<ImageRecord> shots = SampleSupports(
        bundle, category, k, entry.image.round_key, DeriveSeed(seed, 0x73, i));
    detector::SupportSet support = detector::MakeSupportSet(shots, cache);
    tasks.push_back({detector::MakeMetaTask(entry.image, std::move(support),
                                            entry.labels, entry.weight),
                     entry.source});
  }
  return tasks;
}

}  // namespace odip::looprunner
