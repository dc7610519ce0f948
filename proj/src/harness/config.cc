#include "odip/harness/config.h"

#include <algorithm>
#include <charconv>
#include <functional>
#include <map>
#include <set>

#include "odip/core/error.h"
#include "odip/core/hash.h"
#include "odip/harness/persistence.h"

namespace odip::harness {

using looprunner::RunConfig;

namespace {

[[noreturn]] void Bad(std::string_view what) {
  throw Error(ErrorCode::kConfig, std::string(what));
}

std::string Trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> SplitList(std::string_view s) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = s.find(',', pos);
    out.push_back(Trim(s.substr(pos, comma - pos)));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

template <typename T>
T ParseNumber(std::string_view s) {
  T value{};
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || end != s.data() + s.size() || s.empty()) {
    Bad("expected a number, got '" + std::string(s) + "'");
  }
  return value;
}

bool ParseBool(std::string_view s) {
  if (s == "true") return true;
  if (s == "false") return false;
  Bad("expected true or false, got '" + std::string(s) + "'");
}

std::pair<int, int> ParseRange(std::string_view s) {
  const std::vector<std::string> parts = SplitList(s);
  if (parts.size() != 2) Bad("expected 'lo,hi', got '" + std::string(s) + "'");
  return {ParseNumber<int>(parts[0]), ParseNumber<int>(parts[1])};
}

std::vector<CategoryId> ParseCategories(std::string_view s) {
  std::vector<CategoryId> out;
  for (const std::string& name : SplitList(s)) {
    try {
      out.push_back(scenegen::Catalog::Default().Id(name));
    } catch (const Error&) {
      Bad("unknown category '" + name + "'");
    }
  }
  return out;
}

std::string FormatDouble(double v) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::string FormatRange(std::pair<int, int> r) {
  return std::to_string(r.first) + "," + std::to_string(r.second);
}

std::string FormatCategories(const std::vector<CategoryId>& ids) {
  std::string out;
  for (const CategoryId& id : ids) {
    if (!out.empty()) out += ",";
    out += scenegen::Catalog::Default().Get(id.id).name;
  }
  return out;
}

struct Field {
  std::function<void(ExperimentConfig&, std::string_view)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <typename T>
Field NumberField(T RunConfig::*member) {
  return {[member](ExperimentConfig& c, std::string_view v) {
            c.run.*member = ParseNumber<T>(v);
          },
          [member](const ExperimentConfig& c) {
            if constexpr (std::is_floating_point_v<T>) {
              return FormatDouble(c.run.*member);
            } else {
              return std::to_string(c.run.*member);
            }
          }};
}

// Same, for a member of a nested struct of RunConfig.
template <typename S, typename T>
Field NestedField(S RunConfig::*outer, T S::*member) {
  return {[outer, member](ExperimentConfig& c, std::string_view v) {
            if constexpr (std::is_same_v<T, std::pair<int, int>>) {
              (c.run.*outer).*member = ParseRange(v);
            } else {
              (c.run.*outer).*member = ParseNumber<T>(v);
            }
          },
          [outer, member](const ExperimentConfig& c) {
            const T& value = (c.run.*outer).*member;
            if constexpr (std::is_same_v<T, std::pair<int, int>>) {
              return FormatRange(value);
            } else if constexpr (std::is_floating_point_v<T>) {
              return FormatDouble(value);
            } else {
              return std::to_string(value);
            }
          }};
}

Field BoolField(bool RunConfig::*member) {
  return {[member](ExperimentConfig& c, std::string_view v) {
            c.run.*member = ParseBool(v);
          },
          [member](const ExperimentConfig& c) {
            return std::string(c.run.*member ? "true" : "false");
          }};
}

Field RangeField(std::pair<int, int> RunConfig::*member) {
  return {[member](ExperimentConfig& c, std::string_view v) {
            c.run.*member = ParseRange(v);
          },
          [member](const ExperimentConfig& c) {
            return FormatRange(c.run.*member);
          }};
}

const std::map<std::string, Field>& Fields() {
  using detector::BootstrapConfig;
  using detector::ConvergenceRule;
  using detector::HeadConfig;
  using scenegen::SceneConfig;
  static const std::map<std::string, Field> fields = [] {
    std::map<std::string, Field> f;
    f["T"] = NumberField(&RunConfig::T);
    f["N"] = NumberField(&RunConfig::N);
    f["L"] = NumberField(&RunConfig::L);
    f["eta"] = NumberField(&RunConfig::eta);
    f["k"] = NumberField(&RunConfig::k);
    f["seed"] = NumberField(&RunConfig::seed);
    f["tau_pseudo"] = NumberField(&RunConfig::tau_pseudo);
    f["mode"] = {[](ExperimentConfig& c, std::string_view v) {
                   try {
                     c.run.mode = looprunner::ParseAblationMode(v);
                   } catch (const Error&) {
                     Bad("unknown mode '" + std::string(v) + "'");
                   }
                 },
                 [](const ExperimentConfig& c) {
                   return std::string(looprunner::AblationModeName(c.run.mode));
                 }};
    f["base"] = {[](ExperimentConfig& c, std::string_view v) {
                   c.run.base_categories = ParseCategories(v);
                 },
                 [](const ExperimentConfig& c) {
                   return FormatCategories(c.run.base_categories);
                 }};
    f["joint_lr"] = NumberField(&RunConfig::joint_lr);
    f["warm_start"] = BoolField(&RunConfig::warm_start);
    f["cross_category_scan"] = BoolField(&RunConfig::cross_category_scan);
    f["cross_category_passes"] = NumberField(&RunConfig::cross_category_passes);
    f["pseudo_weight"] = NumberField(&RunConfig::pseudo_weight);
    f["support_sampling"] = {
        [](ExperimentConfig& c, std::string_view v) {
          try {
            c.run.support_sampling = looprunner::ParseSupportSampling(v);
          } catch (const Error&) {
            Bad("unknown support_sampling '" + std::string(v) + "'");
          }
        },
        [](const ExperimentConfig& c) {
          return std::string(
              looprunner::SupportSamplingName(c.run.support_sampling));
        }};
    f["eval_support_sampling"] = {
        [](ExperimentConfig& c, std::string_view v) {
          try {
            c.run.eval_support_sampling = looprunner::ParseSupportSampling(v);
          } catch (const Error&) {
            Bad("unknown eval_support_sampling '" + std::string(v) + "'");
          }
        },
        [](const ExperimentConfig& c) {
          return std::string(
              looprunner::SupportSamplingName(c.run.eval_support_sampling));
        }};
    f["n_novel"] = RangeField(&RunConfig::n_novel);
    f["n_base"] = RangeField(&RunConfig::n_base);
    f["eval_sparse_images"] = NumberField(&RunConfig::eval_sparse_images);
    f["eval_dense_images"] = NumberField(&RunConfig::eval_dense_images);
    f["eval_draws"] = NumberField(&RunConfig::eval_draws);
    f["track_pseudo_quality"] = BoolField(&RunConfig::track_pseudo_quality);
    f["margin"] = NumberField(&RunConfig::margin);

    f["grasp.success_probability"] = NestedField(
        &RunConfig::grasp, &grasp_sim::GraspModel::success_probability);
    f["grasp.max_retries"] =
        NestedField(&RunConfig::grasp, &grasp_sim::GraspModel::max_retries);
    f["grasp.center_sigma"] = {
        [](ExperimentConfig& c, std::string_view v) {
          c.run.grasp.noise.center_sigma = ParseNumber<double>(v);
        },
        [](const ExperimentConfig& c) {
          return FormatDouble(c.run.grasp.noise.center_sigma);
        }};
    f["grasp.scale_sigma"] = {
        [](ExperimentConfig& c, std::string_view v) {
          c.run.grasp.noise.scale_sigma = ParseNumber<double>(v);
        },
        [](const ExperimentConfig& c) {
          return FormatDouble(c.run.grasp.noise.scale_sigma);
        }};

    const auto scene = [&f](const std::string& name, auto member) {
      f["scene." + name] = NestedField(&RunConfig::scene, member);
    };
    scene("train_size", &SceneConfig::train_size);
    scene("dense_size", &SceneConfig::dense_size);
    scene("noise_amplitude", &SceneConfig::noise_amplitude);
    scene("min_scale", &SceneConfig::min_scale);
    scene("max_scale", &SceneConfig::max_scale);
    scene("max_rotation", &SceneConfig::max_rotation);
    scene("hue_jitter_degrees", &SceneConfig::hue_jitter_degrees);
    scene("saturation_jitter", &SceneConfig::saturation_jitter);
    scene("value_jitter", &SceneConfig::value_jitter);
    scene("overlap_cap", &SceneConfig::overlap_cap);
    scene("clutter_cap", &SceneConfig::clutter_cap);
    scene("containment_cap", &SceneConfig::containment_cap);
    scene("max_attempts", &SceneConfig::max_attempts);
    scene("cluster_count", &SceneConfig::cluster_count);
    scene("cluster_spread", &SceneConfig::cluster_spread);
    scene("cluster_probability", &SceneConfig::cluster_probability);
    scene("sparse_count", &SceneConfig::sparse_count);
    scene("dense_count", &SceneConfig::dense_count);
    scene("eval_novel_fraction", &SceneConfig::eval_novel_fraction);
    scene("views_per_grasp", &SceneConfig::views_per_grasp);
    scene("view_rotation_floor", &SceneConfig::view_rotation_floor);
    scene("view_rotation_spread", &SceneConfig::view_rotation_spread);
    scene("view_scale_jitter", &SceneConfig::view_scale_jitter);
    scene("support_margin", &SceneConfig::support_margin);

    const auto head = [&f](const std::string& name, auto member) {
      f["head." + name] = NestedField(&RunConfig::head, member);
    };
    head("detect_nms_iou", &HeadConfig::detect_nms_iou);
    head("max_detections", &HeadConfig::max_detections);
    head("positive_iou", &HeadConfig::positive_iou);
    head("negative_iou", &HeadConfig::negative_iou);
    head("negative_weight", &HeadConfig::negative_weight);
    head("threshold_lr_scale", &HeadConfig::threshold_lr_scale);
    head("max_prototypes", &HeadConfig::max_prototypes);
    head("prototype_negative_cost", &HeadConfig::prototype_negative_cost);

    const auto rule = [&f](const std::string& name, auto member) {
      f["rule." + name] = NestedField(&RunConfig::rule, member);
    };
    rule("min_improvement", &ConvergenceRule::min_improvement);
    rule("patience", &ConvergenceRule::patience);
    rule("max_epochs", &ConvergenceRule::max_epochs);

    const auto boot = [&f](const std::string& name, auto member) {
      f["bootstrap." + name] = NestedField(&RunConfig::bootstrap, member);
    };
    boot("sparse_scenes", &BootstrapConfig::sparse_scenes);
    boot("dense_scenes", &BootstrapConfig::dense_scenes);
    boot("support_objects", &BootstrapConfig::support_objects);
    boot("lr", &BootstrapConfig::lr);
    boot("initial_u", &BootstrapConfig::initial_u);
    boot("initial_u_shape", &BootstrapConfig::initial_u_shape);
    boot("initial_tau", &BootstrapConfig::initial_tau);
    boot("seed", &BootstrapConfig::seed);

    f["out_dir"] = {[](ExperimentConfig& c, std::string_view v) {
                      c.out_dir = std::string(v);
                    },
                    [](const ExperimentConfig& c) { return c.out_dir; }};
    return f;
  }();
  return fields;
}

constexpr std::string_view kSchedulePrefix = "schedule.";

}  // namespace

ExperimentConfig ParseConfig(std::string_view text) {
  ExperimentConfig config;
  config.run.base_categories = scenegen::Catalog::Default().Base();
  std::set<std::string> seen;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    const std::string trimmed = Trim(line);
    if (trimmed.empty()) continue;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    const auto eq = trimmed.find('=');
    if (eq == std::string::npos) Bad(where + "expected 'key = value'");
    const std::string key = Trim(std::string_view(trimmed).substr(0, eq));
    const std::string value = Trim(std::string_view(trimmed).substr(eq + 1));
    if (!seen.insert(key).second) Bad(where + "repeated key '" + key + "'");
    try {
      if (key.starts_with(kSchedulePrefix)) {
        const int stage = ParseNumber<int>(
            std::string_view(key).substr(kSchedulePrefix.size()));
        config.run.schedule[stage] = ParseCategories(value);
        continue;
      }
      const auto it = Fields().find(key);
      if (it == Fields().end()) Bad("unknown key '" + key + "'");
      it->second.set(config, value);
    } catch (const Error& e) {
      Bad(where + e.detail());
    }
  }
  for (const char* required : {"T", "N", "L", "eta", "k"}) {
    if (!seen.count(required)) {
      Bad(std::string("missing required key '") + required + "'");
    }
  }
  try {
    config.run.Validate();
  } catch (const Error& e) {
    Bad(e.detail());
  }
  return config;
}

ExperimentConfig LoadConfig(const std::string& path) {
  std::string text;
  try {
    text = ReadFile(path);
  } catch (const Error& e) {
    Bad(e.detail());
  }
  return ParseConfig(text);
}

std::string CanonicalConfig(const ExperimentConfig& config) {
  std::map<std::string, std::string> lines;
  for (const auto& [key, field] : Fields()) lines[key] = field.get(config);
  for (const auto& [stage, ids] : config.run.schedule) {
    lines[std::string(kSchedulePrefix) + std::to_string(stage)] =
        FormatCategories(ids);
  }
  std::string out;
  for (const auto& [key, value] : lines) out += key + " = " + value + "\n";
  return out;
}

std::string ConfigHash(const ExperimentConfig& config) {
  ExperimentConfig copy = config;
  copy.out_dir.clear();
  copy.run.mode = looprunner::AblationMode::kJoint;
  return HexDigest(Fnv1a64(CanonicalConfig(copy)));
}

std::vector<std::string> ConfigKeys() {
  std::vector<std::string> keys;
  for (const auto& [key, field] : Fields()) keys.push_back(key);
  keys.push_back(std::string(kSchedulePrefix) + "<stage>");
  return keys;
}

}  // namespace odip::harness
