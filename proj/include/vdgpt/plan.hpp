#pragma once

// Video plan data model: scenes, entity keyframe tracks, consistency groups
// and the layout-guidance ratio, plus validation and the "vdgpt-plan/1"
// document format.

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vdgpt/error.hpp"

namespace vdgpt {

inline constexpr std::string_view kPlanSchema = "vdgpt-plan/1";
inline constexpr double kGridUnit = 0.05;
inline constexpr int kDefaultKeyframes = 9;
inline constexpr int kDefaultTargetFrames = 16;

/// Normalized [x0, y0, x1, y1] box; y grows downward.
struct BoundingBox {
  double x0 = 0.0;
  double y0 = 0.0;
  double x1 = 0.0;
  double y1 = 0.0;

  bool operator==(const BoundingBox&) const = default;
};

bool is_finite(const BoundingBox& b);
/// In [0,1] with x0 <= x1 and y0 <= y1.
bool is_valid(const BoundingBox& b);

struct Keyframe {
  int frame = 0;
  BoundingBox box;

  bool operator==(const Keyframe&) const = default;
};

struct EntityTrack {
  std::string id;
  std::string name;
  std::string description;
  std::vector<Keyframe> keyframes;

  bool operator==(const EntityTrack&) const = default;
};

struct SceneSpec {
  int index = 1;
  std::string description;
  std::string background;
  std::vector<EntityTrack> entities;
  int num_keyframes = kDefaultKeyframes;
  int target_frames = kDefaultTargetFrames;

  bool operator==(const SceneSpec&) const = default;
};

/// Name (entity or background) -> ascending scene indices.
struct ConsistencyGroups {
  std::map<std::string, std::vector<int>> groups;

  bool operator==(const ConsistencyGroups&) const = default;
};

enum class AlphaMode { kStatic, kLlmDynamic };

inline constexpr double kDynamicAlphaMax = 0.3;
inline constexpr double kDefaultAlpha = 0.1;

struct AlphaSetting {
  AlphaMode mode = AlphaMode::kStatic;
  double value = kDefaultAlpha;

  bool operator==(const AlphaSetting&) const = default;
};

struct ProvenanceEntry {
  std::string step;  // "step1", "step2", "alpha"
  int scene = 0;     // 0 when not scene-specific
  int attempt = 1;
  std::string prompt;
  std::string response;

  bool operator==(const ProvenanceEntry&) const = default;
};

struct Provenance {
  std::string model;
  std::string created_at;
  std::vector<ProvenanceEntry> responses;

  bool operator==(const Provenance&) const = default;
};

struct VideoPlan {
  std::string source_prompt;
  std::vector<SceneSpec> scenes;
  ConsistencyGroups consistency;
  AlphaSetting alpha;
  Provenance provenance;

  bool operator==(const VideoPlan&) const = default;
};

/// Rounds every coordinate to the nearest multiple of `unit` (ties away from
/// zero), clamps to [0,1] and repairs inverted pairs by collapsing them onto
/// their grid-rounded mean. Throws kInvalidCoordinate on non-finite input.
BoundingBox quantize_box(const BoundingBox& b, double unit = kGridUnit);

/// Rounds a single value to the grid with ties away from zero.
double snap_to_grid(double v, double unit = kGridUnit);

enum class ViolationCode {
  kMissingKeyframes,
  kBoxOutOfRange,
  kEmptyFrame,
  kUnknownGroupEntity,
  kUnknownGroupScene,
  kSceneIndexGap,
  kNoScenes,
  kKeyframeOrder,
  kDuplicateEntity,
  kInvalidSceneShape,
  kGroupNotSorted,
  kAlphaOutOfRange,
};

std::string_view to_string(ViolationCode code);

struct Violation {
  ViolationCode code;
  int scene = 0;  // 0 when plan-wide
  std::string entity;
  int frame = -1;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool valid() const { return violations.empty(); }
  bool has(ViolationCode code) const;
};

ValidationReport validate_plan(const VideoPlan& plan);

/// Canonical "vdgpt-plan/1" text. Field order is fixed, so equal plans
/// serialize to identical bytes.
std::string serialize_plan(const VideoPlan& plan);

/// Throws kParseError with the offending field path on malformed input.
VideoPlan deserialize_plan(std::string_view text);

VideoPlan load_plan_file(const std::string& path);
void save_plan_file(const VideoPlan& plan, const std::string& path);

std::string_view to_string(AlphaMode mode);

}  // namespace vdgpt
