#include "vdgpt/plan.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "vdgpt/plan_json.hpp"

namespace vdgpt {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidCoordinate: return "INVALID_COORDINATE";
    case ErrorCode::kParseError: return "PARSE_ERROR";
    case ErrorCode::kTemplateError: return "TEMPLATE_ERROR";
    case ErrorCode::kBackendError: return "BACKEND_ERROR";
    case ErrorCode::kCompileFailed: return "COMPILE_FAILED";
    case ErrorCode::kEmptyTrack: return "EMPTY_TRACK";
    case ErrorCode::kShapeError: return "SHAPE_ERROR";
    case ErrorCode::kStepError: return "STEP_ERROR";
    case ErrorCode::kTrainingDiverged: return "TRAINING_DIVERGED";
    case ErrorCode::kInsufficientScenes: return "INSUFFICIENT_SCENES";
    case ErrorCode::kArgError: return "ARG_ERROR";
    case ErrorCode::kCancelled: return "CANCELLED";
    case ErrorCode::kIoError: return "IO_ERROR";
  }
  return "UNKNOWN";
}

std::string_view to_string(ViolationCode code) {
  switch (code) {
    case ViolationCode::kMissingKeyframes: return "MISSING_KEYFRAMES";
    case ViolationCode::kBoxOutOfRange: return "BOX_OUT_OF_RANGE";
    case ViolationCode::kEmptyFrame: return "EMPTY_FRAME";
    case ViolationCode::kUnknownGroupEntity: return "UNKNOWN_GROUP_ENTITY";
    case ViolationCode::kUnknownGroupScene: return "UNKNOWN_GROUP_SCENE";
    case ViolationCode::kSceneIndexGap: return "SCENE_INDEX_GAP";
    case ViolationCode::kNoScenes: return "NO_SCENES";
    case ViolationCode::kKeyframeOrder: return "KEYFRAME_ORDER";
    case ViolationCode::kDuplicateEntity: return "DUPLICATE_ENTITY";
    case ViolationCode::kInvalidSceneShape: return "INVALID_SCENE_SHAPE";
    case ViolationCode::kGroupNotSorted: return "GROUP_NOT_SORTED";
    case ViolationCode::kAlphaOutOfRange: return "ALPHA_OUT_OF_RANGE";
  }
  return "UNKNOWN";
}

std::string_view to_string(AlphaMode mode) {
  return mode == AlphaMode::kStatic ? "static" : "llm_dynamic";
}

bool is_finite(const BoundingBox& b) {
  return std::isfinite(b.x0) && std::isfinite(b.y0) && std::isfinite(b.x1) &&
         std::isfinite(b.y1);
}

bool is_valid(const BoundingBox& b) {
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  return is_finite(b) && in_unit(b.x0) && in_unit(b.y0) && in_unit(b.x1) &&
         in_unit(b.y1) && b.x0 <= b.x1 && b.y0 <= b.y1;
}

namespace {

// Grid index of v. Values within 1e-9 of a half step are treated as ties and
// pushed away from zero before rounding.
long grid_index(double v, double unit) {
  const double q = v / unit;
  return std::lround(q + std::copysign(1e-9, q));
}

double from_index(long k, double unit) {
  // Dividing by an integral bin count gives the correctly rounded grid value
  // (7 / 20.0 == 0.35, whereas 7 * 0.05 == 0.35000000000000003).
  const double bins = 1.0 / unit;
  const double rounded_bins = std::round(bins);
  if (std::abs(bins - rounded_bins) < 1e-9) return static_cast<double>(k) / rounded_bins;
  return static_cast<double>(k) * unit;
}

void repair_pair(long& lo, long& hi, double unit) {
  if (lo <= hi) return;
  const double mean = 0.5 * (from_index(lo, unit) + from_index(hi, unit));
  lo = hi = grid_index(mean, unit);
}

}  // namespace

double snap_to_grid(double v, double unit) {
  return from_index(grid_index(v, unit), unit);
}

BoundingBox quantize_box(const BoundingBox& b, double unit) {
  if (!is_finite(b)) {
    throw Error(ErrorCode::kInvalidCoordinate, "box has a non-finite coordinate");
  }
  if (!(unit > 0.0) || !std::isfinite(unit)) {
    throw Error(ErrorCode::kArgError, "quantization unit must be positive");
  }
  const long max_index = grid_index(1.0, unit);
  auto idx = [&](double v) { return std::clamp(grid_index(v, unit), 0L, max_index); };
  long x0 = idx(b.x0), y0 = idx(b.y0), x1 = idx(b.x1), y1 = idx(b.y1);
  repair_pair(x0, x1, unit);
  repair_pair(y0, y1, unit);
  return {from_index(x0, unit), from_index(y0, unit), from_index(x1, unit),
          from_index(y1, unit)};
}

bool ValidationReport::has(ViolationCode code) const {
  return std::any_of(violations.begin(), violations.end(),
                     [code](const Violation& v) { return v.code == code; });
}

ValidationReport validate_plan(const VideoPlan& plan) {
  ValidationReport report;
  auto add = [&](ViolationCode code, int scene, std::string entity, int frame,
                 std::string message) {
    report.violations.push_back(
        {code, scene, std::move(entity), frame, std::move(message)});
  };

  if (plan.scenes.empty()) {
    add(ViolationCode::kNoScenes, 0, {}, -1, "plan has no scenes");
  }

  std::set<std::string> known_names;
  for (std::size_t i = 0; i < plan.scenes.size(); ++i) {
    const SceneSpec& scene = plan.scenes[i];
    const int expected_index = static_cast<int>(i) + 1;
    if (scene.index != expected_index) {
      add(ViolationCode::kSceneIndexGap, scene.index, {}, -1,
          "scene at position " + std::to_string(expected_index) + " has index " +
              std::to_string(scene.index));
    }
    if (scene.num_keyframes < 2 || scene.target_frames < scene.num_keyframes) {
      add(ViolationCode::kInvalidSceneShape, scene.index, {}, -1,
          "need num_keyframes >= 2 and target_frames >= num_keyframes");
    }
    if (!scene.background.empty()) known_names.insert(scene.background);

    std::set<std::string> ids;
    std::vector<int> boxes_per_frame(
        static_cast<std::size_t>(std::max(scene.num_keyframes, 0)), 0);
    for (const EntityTrack& track : scene.entities) {
      known_names.insert(track.name);
      if (!ids.insert(track.id).second) {
        add(ViolationCode::kDuplicateEntity, scene.index, track.id, -1,
            "entity id repeated within scene");
      }
      if (static_cast<int>(track.keyframes.size()) != scene.num_keyframes) {
        add(ViolationCode::kMissingKeyframes, scene.index, track.id, -1,
            "expected " + std::to_string(scene.num_keyframes) + " keyframes, found " +
                std::to_string(track.keyframes.size()));
      }
      for (std::size_t k = 0; k < track.keyframes.size(); ++k) {
        const Keyframe& kf = track.keyframes[k];
        if (k > 0 && kf.frame <= track.keyframes[k - 1].frame) {
          add(ViolationCode::kKeyframeOrder, scene.index, track.id, kf.frame,
              "keyframe indices must be strictly increasing");
        }
        if (!is_valid(kf.box)) {
          add(ViolationCode::kBoxOutOfRange, scene.index, track.id, kf.frame,
              "box outside [0,1] or inverted");
        }
        if (kf.frame >= 0 && kf.frame < scene.num_keyframes) {
          ++boxes_per_frame[static_cast<std::size_t>(kf.frame)];
        } else {
          add(ViolationCode::kKeyframeOrder, scene.index, track.id, kf.frame,
              "keyframe index outside [0, num_keyframes)");
        }
      }
    }
    for (std::size_t f = 0; f < boxes_per_frame.size(); ++f) {
      if (boxes_per_frame[f] == 0) {
        add(ViolationCode::kEmptyFrame, scene.index, {}, static_cast<int>(f),
            "keyframe has no boxes");
      }
    }
  }

  const int scene_count = static_cast<int>(plan.scenes.size());
  for (const auto& [name, scenes] : plan.consistency.groups) {
    if (!known_names.contains(name)) {
      add(ViolationCode::kUnknownGroupEntity, 0, name, -1,
          "group names an entity absent from every scene");
    }
    for (std::size_t k = 0; k < scenes.size(); ++k) {
      if (scenes[k] < 1 || scenes[k] > scene_count) {
        add(ViolationCode::kUnknownGroupScene, scenes[k], name, -1,
            "group references scene " + std::to_string(scenes[k]) + " of " +
                std::to_string(scene_count));
      }
      if (k > 0 && scenes[k] <= scenes[k - 1]) {
        add(ViolationCode::kGroupNotSorted, 0, name, -1,
            "group scene list must be ascending without duplicates");
      }
    }
  }

  const double max_alpha = plan.alpha.mode == AlphaMode::kLlmDynamic ? kDynamicAlphaMax : 1.0;
  if (!(plan.alpha.value >= 0.0 && plan.alpha.value <= max_alpha)) {
    add(ViolationCode::kAlphaOutOfRange, 0, {}, -1, "alpha outside its allowed range");
  }
  return report;
}

// ---------------------------------------------------------------------------
// JSON document

ojson box_to_json(const BoundingBox& b) { return ojson::array({b.x0, b.y0, b.x1, b.y1}); }

ojson plan_to_json(const VideoPlan& plan) {
  ojson doc;
  doc["schema"] = kPlanSchema;
  doc["source_prompt"] = plan.source_prompt;
  ojson scenes = ojson::array();
  for (const SceneSpec& scene : plan.scenes) {
    ojson s;
    s["index"] = scene.index;
    s["description"] = scene.description;
    s["background"] = scene.background;
    s["num_keyframes"] = scene.num_keyframes;
    s["target_frames"] = scene.target_frames;
    ojson entities = ojson::array();
    for (const EntityTrack& track : scene.entities) {
      ojson e;
      e["id"] = track.id;
      e["name"] = track.name;
      e["description"] = track.description;
      ojson keyframes = ojson::array();
      for (const Keyframe& kf : track.keyframes) {
        keyframes.push_back(ojson::array({kf.frame, kf.box.x0, kf.box.y0, kf.box.x1, kf.box.y1}));
      }
      e["keyframes"] = std::move(keyframes);
      entities.push_back(std::move(e));
    }
    s["entities"] = std::move(entities);
    scenes.push_back(std::move(s));
  }
  doc["scenes"] = std::move(scenes);
  ojson groups = ojson::object();
  for (const auto& [name, indices] : plan.consistency.groups) groups[name] = indices;
  doc["consistency"] = std::move(groups);
  doc["alpha"] = {{"mode", to_string(plan.alpha.mode)}, {"value", plan.alpha.value}};
  ojson responses = ojson::array();
  for (const ProvenanceEntry& entry : plan.provenance.responses) {
    responses.push_back({{"step", entry.step},
                         {"scene", entry.scene},
                         {"attempt", entry.attempt},
                         {"prompt", entry.prompt},
                         {"response", entry.response}});
  }
  doc["provenance"] = {{"model", plan.provenance.model},
                       {"created_at", plan.provenance.created_at},
                       {"responses", std::move(responses)}};
  return doc;
}

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw Error(ErrorCode::kParseError, what + " at '" + path + "'", path);
}

const ojson& require(const ojson& obj, const std::string& key, const std::string& path) {
  const std::string field = path.empty() ? key : path + "." + key;
  if (!obj.is_object()) fail(path.empty() ? "$" : path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) fail(field, "missing field");
  return *it;
}

std::string get_string(const ojson& obj, const std::string& key, const std::string& path) {
  const ojson& v = require(obj, key, path);
  if (!v.is_string()) fail(path.empty() ? key : path + "." + key, "expected a string");
  return v.get<std::string>();
}

double get_number(const ojson& v, const std::string& path) {
  if (!v.is_number()) fail(path, "expected a number");
  return v.get<double>();
}

int get_int(const ojson& v, const std::string& path) {
  if (!v.is_number_integer()) fail(path, "expected an integer");
  return v.get<int>();
}

std::string optional_string(const ojson& obj, const std::string& key) {
  auto it = obj.find(key);
  return (it != obj.end() && it->is_string()) ? it->get<std::string>() : std::string{};
}

}  // namespace

VideoPlan plan_from_json(const ojson& doc) {
  if (!doc.is_object()) fail("$", "expected an object");
  if (auto it = doc.find("schema"); it != doc.end() && *it != kPlanSchema) {
    fail("schema", "unsupported schema");
  }
  VideoPlan plan;
  plan.source_prompt = get_string(doc, "source_prompt", "");
  const ojson& scenes = require(doc, "scenes", "");
  if (!scenes.is_array()) fail("scenes", "expected an array");
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const std::string sp = "scenes[" + std::to_string(i) + "]";
    const ojson& s = scenes[i];
    SceneSpec scene;
    scene.index = s.contains("index") ? get_int(s["index"], sp + ".index") : static_cast<int>(i) + 1;
    scene.description = get_string(s, "description", sp);
    scene.background = get_string(s, "background", sp);
    if (s.contains("num_keyframes")) scene.num_keyframes = get_int(s["num_keyframes"], sp + ".num_keyframes");
    if (s.contains("target_frames")) scene.target_frames = get_int(s["target_frames"], sp + ".target_frames");
    const ojson& entities = require(s, "entities", sp);
    if (!entities.is_array()) fail(sp + ".entities", "expected an array");
    for (std::size_t j = 0; j < entities.size(); ++j) {
      const std::string ep = sp + ".entities[" + std::to_string(j) + "]";
      const ojson& e = entities[j];
      EntityTrack track;
      track.id = get_string(e, "id", ep);
      track.name = get_string(e, "name", ep);
      track.description = e.contains("description") ? get_string(e, "description", ep) : std::string{};
      const ojson& keyframes = require(e, "keyframes", ep);
      if (!keyframes.is_array()) fail(ep + ".keyframes", "expected an array");
      for (std::size_t k = 0; k < keyframes.size(); ++k) {
        const std::string kp = ep + ".keyframes[" + std::to_string(k) + "]";
        const ojson& kf = keyframes[k];
        if (!kf.is_array() || kf.size() != 5) fail(kp, "expected [frame, x0, y0, x1, y1]");
        track.keyframes.push_back({get_int(kf[0], kp + "[0]"),
                                   {get_number(kf[1], kp + "[1]"), get_number(kf[2], kp + "[2]"),
                                    get_number(kf[3], kp + "[3]"), get_number(kf[4], kp + "[4]")}});
      }
      scene.entities.push_back(std::move(track));
    }
    plan.scenes.push_back(std::move(scene));
  }

  if (auto it = doc.find("consistency"); it != doc.end()) {
    if (!it->is_object()) fail("consistency", "expected an object");
    for (const auto& [name, indices] : it->items()) {
      const std::string gp = "consistency." + name;
      if (!indices.is_array()) fail(gp, "expected an array of scene indices");
      std::vector<int> list;
      for (std::size_t k = 0; k < indices.size(); ++k) {
        list.push_back(get_int(indices[k], gp + "[" + std::to_string(k) + "]"));
      }
      plan.consistency.groups.emplace(name, std::move(list));
    }
  }

  if (auto it = doc.find("alpha"); it != doc.end()) {
    const std::string mode = get_string(*it, "mode", "alpha");
    if (mode == "static") {
      plan.alpha.mode = AlphaMode::kStatic;
    } else if (mode == "llm_dynamic") {
      plan.alpha.mode = AlphaMode::kLlmDynamic;
    } else {
      fail("alpha.mode", "expected 'static' or 'llm_dynamic'");
    }
    plan.alpha.value = get_number(require(*it, "value", "alpha"), "alpha.value");
  }

  if (auto it = doc.find("provenance"); it != doc.end() && it->is_object()) {
    plan.provenance.model = optional_string(*it, "model");
    plan.provenance.created_at = optional_string(*it, "created_at");
    if (auto r = it->find("responses"); r != it->end() && r->is_array()) {
      for (const ojson& entry : *r) {
        ProvenanceEntry pe;
        pe.step = optional_string(entry, "step");
        pe.scene = entry.value("scene", 0);
        pe.attempt = entry.value("attempt", 1);
        pe.prompt = optional_string(entry, "prompt");
        pe.response = optional_string(entry, "response");
        plan.provenance.responses.push_back(std::move(pe));
      }
    }
  }
  return plan;
}

ojson report_to_json(const ValidationReport& report) {
  ojson violations = ojson::array();
  for (const Violation& v : report.violations) {
    ojson j;
    j["code"] = to_string(v.code);
    j["scene"] = v.scene;
    j["entity"] = v.entity;
    j["frame"] = v.frame;
    j["message"] = v.message;
    violations.push_back(std::move(j));
  }
  return {{"valid", report.valid()}, {"violations", std::move(violations)}};
}

std::string serialize_plan(const VideoPlan& plan) { return plan_to_json(plan).dump(2) + "\n"; }

VideoPlan deserialize_plan(std::string_view text) {
  ojson doc;
  try {
    doc = ojson::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    // Translate the byte offset into a line number for hand-edited files.
    const std::size_t offset = std::min<std::size_t>(e.byte, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n');
    throw Error(ErrorCode::kParseError, "malformed document at line " + std::to_string(line) + ": " + e.what(),
                "line " + std::to_string(line));
  }
  return plan_from_json(doc);
}

VideoPlan load_plan_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path, path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_plan(ss.str());
}

void save_plan_file(const VideoPlan& plan, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path, path);
  out << serialize_plan(plan);
}

}  // namespace vdgpt
