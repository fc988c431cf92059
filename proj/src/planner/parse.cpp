#include <algorithm>
#include <cctype>
#include <cmath>
#include <regex>
#include <set>
#include <sstream>

#include <json.hpp>

#include "vdgpt/planner.hpp"

namespace vdgpt::planner {

using nlohmann::json;

std::string_view to_string(ParseStatus status) {
  switch (status) {
    case ParseStatus::kOk: return "ok";
    case ParseStatus::kRepaired: return "repaired";
    case ParseStatus::kInvalid: return "invalid";
  }
  return "invalid";
}

namespace {

const std::string kNumber = R"([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)";

std::string collapse_whitespace(const std::string& s) {
  std::string out;
  bool pending_space = false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
    } else {
      if (pending_space) out += ' ';
      pending_space = false;
      out += c;
    }
  }
  return out;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

// Tracks whether any recoverable deviation was normalized.
struct Repairs {
  std::vector<Diagnostic>& diagnostics;
  bool repaired = false;

  void note(std::string code, std::string message, int scene = 0, int frame = -1) {
    repaired = true;
    diagnostics.push_back({std::move(code), std::move(message), scene, frame});
  }

  std::string clean(const std::string& raw, const char* what) {
    std::string out = collapse_whitespace(raw);
    if (out != raw) note("WHITESPACE_NORMALIZED", std::string("normalized whitespace in ") + what);
    return out;
  }
};

std::optional<std::string> fenced_block(const std::string& raw) {
  const auto open = raw.find("```");
  if (open == std::string::npos) return std::nullopt;
  const auto body = raw.find('\n', open);
  if (body == std::string::npos) return std::nullopt;
  const auto close = raw.find("```", body);
  if (close == std::string::npos) return std::nullopt;
  return raw.substr(body + 1, close - body - 1);
}

std::optional<json> try_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception&) {
    return std::nullopt;
  }
}

// Outermost {...} or [...] span of free text.
std::optional<json> embedded_json(const std::string& raw) {
  for (auto [open, close] : {std::pair{'{', '}'}, std::pair{'[', ']'}}) {
    const auto b = raw.find(open);
    const auto e = raw.rfind(close);
    if (b != std::string::npos && e != std::string::npos && e > b) {
      if (auto doc = try_json(raw.substr(b, e - b + 1))) return doc;
    }
  }
  return std::nullopt;
}

// Splits on ',' and ';' outside parentheses.
std::vector<std::string> split_top_level(const std::string& s) {
  std::vector<std::string> out;
  std::string current;
  int depth = 0;
  for (char c : s) {
    if (c == '(') ++depth;
    if (c == ')') depth = std::max(0, depth - 1);
    if ((c == ',' || c == ';') && depth == 0) {
      out.push_back(current);
      current.clear();
    } else {
      current += c;
    }
  }
  out.push_back(current);
  return out;
}

struct RawEntity {
  std::string name;
  std::string description;
};

RawEntity parse_entity_item(const std::string& item) {
  static const std::regex with_parens(R"(^\s*([^()]+?)\s*\((.*)\)\s*$)");
  static const std::regex with_colon(R"(^\s*([^:]+?)\s*:\s*(.*)$)");
  std::smatch m;
  if (std::regex_match(item, m, with_parens)) return {m[1].str(), m[2].str()};
  if (std::regex_match(item, m, with_colon)) return {m[1].str(), m[2].str()};
  return {item, {}};
}

struct RawScene {
  std::string description;
  std::string background;
  std::vector<RawEntity> entities;
};

void assign_ids(SceneSpec& scene) {
  std::map<std::string, int> seen;
  for (EntityTrack& e : scene.entities) {
    const int n = ++seen[e.name];
    e.id = n == 1 ? e.name : e.name + "#" + std::to_string(n);
  }
}

std::optional<std::vector<RawScene>> scenes_from_json(const json& doc, Repairs& repairs) {
  const json* list = nullptr;
  if (doc.is_object() && doc.contains("scenes") && doc["scenes"].is_array()) {
    list = &doc["scenes"];
  } else if (doc.is_array()) {
    list = &doc;
    repairs.note("BARE_ARRAY", "scene list was not wrapped in {\"scenes\": ...}");
  } else {
    return std::nullopt;
  }
  std::vector<RawScene> out;
  for (std::size_t i = 0; i < list->size(); ++i) {
    const json& s = (*list)[i];
    if (!s.is_object()) {
      repairs.note("SCENE_SKIPPED", "scene entry is not an object", static_cast<int>(i) + 1);
      continue;
    }
    RawScene scene;
    for (const char* key : {"description", "scene", "text"}) {
      if (s.contains(key) && s[key].is_string()) {
        scene.description = s[key].get<std::string>();
        if (std::string(key) != "description") repairs.note("FIELD_ALIAS", std::string("used '") + key + "' as description");
        break;
      }
    }
    if (s.contains("background") && s["background"].is_string()) {
      scene.background = s["background"].get<std::string>();
    } else {
      repairs.note("MISSING_BACKGROUND", "scene has no background", static_cast<int>(i) + 1);
    }
    if (s.contains("entities") && s["entities"].is_array()) {
      for (const json& e : s["entities"]) {
        if (e.is_string()) {
          scene.entities.push_back(parse_entity_item(e.get<std::string>()));
        } else if (e.is_object() && e.contains("name") && e["name"].is_string()) {
          RawEntity re{e["name"].get<std::string>(), {}};
          if (e.contains("description") && e["description"].is_string()) {
            re.description = e["description"].get<std::string>();
          }
          scene.entities.push_back(std::move(re));
        }
      }
    }
    out.push_back(std::move(scene));
  }
  return out;
}

std::vector<RawScene> scenes_from_lines(const std::string& raw, Repairs& repairs) {
  static const std::regex labeled(R"(^(?:#+\s*)?\**\s*scene\s*(\d*)\s*\**\s*[:.)\-]?\s*\**\s*(.*)$)",
                                  std::regex::icase);
  static const std::regex numbered(R"(^(\d+)\s*[.):]\s+(.*)$)");
  static const std::regex field(
      R"(^(?:[-*]\s*)?\**\s*(description|entities|entity|objects|background)\s*\**\s*:\s*(.*)$)",
      std::regex::icase);

  std::vector<RawScene> scenes;
  std::set<std::string> styles;
  std::vector<int> numbers;
  std::istringstream in(raw);
  std::string line;
  while (std::getline(in, line)) {
    const std::string text = collapse_whitespace(line);
    if (text.empty()) continue;
    std::smatch m;
    if (std::regex_match(text, m, field) && !scenes.empty()) {
      const std::string key = lower(m[1].str());
      const std::string value = m[2].str();
      RawScene& scene = scenes.back();
      if (key == "description") {
        scene.description = value;
      } else if (key == "background") {
        scene.background = value;
      } else {
        for (const std::string& item : split_top_level(value)) {
          if (!collapse_whitespace(item).empty()) scene.entities.push_back(parse_entity_item(item));
        }
      }
      continue;
    }
    if (std::regex_match(text, m, labeled)) {
      styles.insert("labeled");
      numbers.push_back(m[1].str().empty() ? -1 : std::stoi(m[1].str()));
      scenes.push_back({m[2].str(), {}, {}});
      continue;
    }
    if (std::regex_match(text, m, numbered)) {
      styles.insert("numbered");
      numbers.push_back(std::stoi(m[1].str()));
      scenes.push_back({m[2].str(), {}, {}});
      continue;
    }
    if (!scenes.empty() && scenes.back().description.empty()) scenes.back().description = text;
  }
  if (scenes.empty()) return scenes;
  repairs.note("LINE_FORMAT", "no fenced JSON block; parsed scene lines");
  if (styles.size() > 1) repairs.note("MIXED_LABELS", "scene labels mix 'Scene N:' and 'N.'");
  for (std::size_t i = 0; i < numbers.size(); ++i) {
    if (numbers[i] != static_cast<int>(i) + 1) {
      repairs.note("RENUMBERED", "scene numbering missing or out of order; renumbered");
      break;
    }
  }
  return scenes;
}

}  // namespace

ParseOutcome<std::vector<SceneSpec>> parse_step1_response(const std::string& raw) {
  ParseOutcome<std::vector<SceneSpec>> outcome;
  Repairs repairs{outcome.diagnostics};

  std::optional<std::vector<RawScene>> raw_scenes;
  if (auto block = fenced_block(raw)) {
    if (auto doc = try_json(*block)) raw_scenes = scenes_from_json(*doc, repairs);
    if (!raw_scenes) repairs.note("BAD_FENCE", "fenced block is not a scene list");
  }
  if (!raw_scenes) {
    if (auto doc = embedded_json(raw)) {
      raw_scenes = scenes_from_json(*doc, repairs);
      if (raw_scenes) repairs.note("UNFENCED_JSON", "scene JSON found outside a fenced block");
    }
  }
  if (!raw_scenes || raw_scenes->empty()) raw_scenes = scenes_from_lines(raw, repairs);

  std::vector<SceneSpec> scenes;
  for (const RawScene& rs : *raw_scenes) {
    SceneSpec scene;
    scene.index = static_cast<int>(scenes.size()) + 1;
    scene.description = repairs.clean(rs.description, "description");
    scene.background = repairs.clean(rs.background, "background");
    if (scene.description.empty()) {
      repairs.note("SCENE_SKIPPED", "scene without description dropped");
      continue;
    }
    for (const RawEntity& re : rs.entities) {
      EntityTrack track;
      track.name = repairs.clean(re.name, "entity name");
      track.description = repairs.clean(re.description, "entity description");
      if (!track.name.empty()) scene.entities.push_back(std::move(track));
    }
    assign_ids(scene);
    scenes.push_back(std::move(scene));
  }

  if (scenes.empty()) {
    outcome.status = ParseStatus::kInvalid;
    outcome.diagnostics.push_back({"NO_SCENES", "no recognizable scene list"});
    return outcome;
  }
  for (const SceneSpec& scene : scenes) {
    if (scene.entities.empty()) {
      outcome.status = ParseStatus::kInvalid;
      outcome.diagnostics.push_back({"NO_ENTITIES", "scene lists no entities", scene.index});
      return outcome;
    }
  }
  outcome.status = repairs.repaired ? ParseStatus::kRepaired : ParseStatus::kOk;
  outcome.fragment = std::move(scenes);
  return outcome;
}

// ---------------------------------------------------------------------------
// Step 2

namespace {

struct RawBox {
  std::string name;
  double coords[4] = {0, 0, 0, 0};
};

struct RawFrame {
  int number = 0;
  std::vector<RawBox> boxes;
};

std::optional<RawBox> box_from_json(const json& b) {
  RawBox out;
  const json* coords = nullptr;
  if (b.is_object()) {
    if (!b.contains("name") || !b["name"].is_string()) return std::nullopt;
    out.name = b["name"].get<std::string>();
    for (const char* key : {"box", "bbox"}) {
      if (b.contains(key)) coords = &b[key];
    }
  } else if (b.is_array() && b.size() == 2 && b[0].is_string()) {
    out.name = b[0].get<std::string>();
    coords = &b[1];
  }
  if (!coords || !coords->is_array() || coords->size() != 4) return std::nullopt;
  for (std::size_t i = 0; i < 4; ++i) {
    if (!(*coords)[i].is_number()) return std::nullopt;
    out.coords[i] = (*coords)[i].get<double>();
  }
  return out;
}

std::optional<std::vector<RawFrame>> frames_from_json(const json& doc, Repairs& repairs) {
  const json* list = nullptr;
  if (doc.is_object() && doc.contains("frames") && doc["frames"].is_array()) {
    list = &doc["frames"];
  } else if (doc.is_array()) {
    list = &doc;
    repairs.note("BARE_ARRAY", "frame list was not wrapped in {\"frames\": ...}");
  } else {
    return std::nullopt;
  }
  std::vector<RawFrame> out;
  for (const json& f : *list) {
    RawFrame frame;
    frame.number = static_cast<int>(out.size()) + 1;
    const json* boxes = nullptr;
    if (f.is_object()) {
      if (f.contains("frame") && f["frame"].is_number_integer()) frame.number = f["frame"].get<int>();
      if (f.contains("boxes")) boxes = &f["boxes"];
    } else if (f.is_array()) {
      boxes = &f;
    }
    if (boxes && boxes->is_array()) {
      for (const json& b : *boxes) {
        if (auto rb = box_from_json(b)) {
          frame.boxes.push_back(*rb);
        } else {
          repairs.note("BAD_BOX", "unreadable box entry dropped", 0, frame.number);
        }
      }
    }
    out.push_back(std::move(frame));
  }
  return out;
}

// Name preceding a coordinate list, e.g. "{'name': 'chef', 'box': " -> "chef".
std::string name_before_box(const std::string& prefix) {
  static const std::regex keys(R"(\b(?:name|box|bbox|id|label)\b)", std::regex::icase);
  std::string s = std::regex_replace(prefix, keys, " ");
  for (char& c : s) {
    if (std::string("{}[]'\":,=()").find(c) != std::string::npos) c = ' ';
  }
  std::istringstream in(s);
  std::vector<std::string> words;
  std::string w;
  while (in >> w) {
    const bool numeric = std::all_of(w.begin(), w.end(), [](unsigned char c) {
      return std::isdigit(c) || c == '.' || c == '-' || c == '+';
    });
    if (!numeric) words.push_back(w);
  }
  std::string out;
  for (const auto& word : words) out += (out.empty() ? "" : " ") + word;
  return out;
}

std::vector<RawFrame> frames_from_lines(const std::string& raw) {
  static const std::regex header(R"(^\W*frame\s*(\d+)\s*[:.)\-]?\s*(.*)$)", std::regex::icase);
  static const std::regex box("\\[\\s*(" + kNumber + ")\\s*,\\s*(" + kNumber + ")\\s*,\\s*(" +
                              kNumber + ")\\s*,\\s*(" + kNumber + ")\\s*\\]");
  std::vector<RawFrame> frames;
  std::istringstream in(raw);
  std::string line;
  while (std::getline(in, line)) {
    std::smatch m;
    std::string rest = line;
    if (std::regex_match(line, m, header)) {
      frames.push_back({std::stoi(m[1].str()), {}});
      rest = m[2].str();
    }
    if (frames.empty()) continue;
    std::size_t consumed = 0;
    for (auto it = std::sregex_iterator(rest.begin(), rest.end(), box); it != std::sregex_iterator(); ++it) {
      const std::smatch& bm = *it;
      RawBox rb;
      rb.name = name_before_box(rest.substr(consumed, static_cast<std::size_t>(bm.position(0)) - consumed));
      for (int i = 0; i < 4; ++i) rb.coords[i] = std::stod(bm[i + 1].str());
      consumed = static_cast<std::size_t>(bm.position(0) + bm.length(0));
      frames.back().boxes.push_back(std::move(rb));
    }
  }
  return frames;
}

}  // namespace

ParseOutcome<SceneSpec> parse_step2_response(const std::string& raw, const SceneSpec& scene) {
  ParseOutcome<SceneSpec> outcome;
  Repairs repairs{outcome.diagnostics};
  const int sidx = scene.index;
  const int expected = scene.num_keyframes;

  std::optional<std::vector<RawFrame>> frames;
  if (auto block = fenced_block(raw)) {
    if (auto doc = try_json(*block)) frames = frames_from_json(*doc, repairs);
    if (!frames) repairs.note("BAD_FENCE", "fenced block is not a frame list", sidx);
  }
  if (!frames) {
    if (auto doc = embedded_json(raw)) {
      frames = frames_from_json(*doc, repairs);
      if (frames) repairs.note("UNFENCED_JSON", "frame JSON found outside a fenced block", sidx);
    }
  }
  if (!frames || frames->empty()) {
    frames = frames_from_lines(raw);
    if (!frames->empty()) repairs.note("LINE_FORMAT", "no fenced JSON block; parsed frame lines", sidx);
  }

  auto invalid = [&](std::string code, std::string message, int frame = -1) {
    outcome.status = ParseStatus::kInvalid;
    outcome.fragment.reset();
    outcome.diagnostics.push_back({std::move(code), std::move(message), sidx, frame});
  };

  if (static_cast<int>(frames->size()) < expected) {
    invalid("MISSING_KEYFRAMES", "expected " + std::to_string(expected) + " frames, parsed " +
                                     std::to_string(frames->size()));
    return outcome;
  }
  if (static_cast<int>(frames->size()) > expected) {
    repairs.note("EXTRA_FRAMES", "dropped frames beyond " + std::to_string(expected), sidx);
    frames->resize(static_cast<std::size_t>(expected));
  }

  SceneSpec out = scene;
  for (EntityTrack& e : out.entities) e.keyframes.clear();
  // per entity, per frame
  std::vector<std::vector<std::optional<BoundingBox>>> grid(
      out.entities.size(), std::vector<std::optional<BoundingBox>>(static_cast<std::size_t>(expected)));
  int snapped = 0;
  bool any_empty = false;

  for (int k = 0; k < expected; ++k) {
    const RawFrame& frame = (*frames)[static_cast<std::size_t>(k)];
    int matched = 0;
    for (const RawBox& rb : frame.boxes) {
      const std::string name = collapse_whitespace(rb.name);
      auto find_slot = [&](bool normalized) -> std::optional<std::size_t> {
        for (std::size_t e = 0; e < out.entities.size(); ++e) {
          const bool same = normalized ? lower(out.entities[e].name) == lower(name)
                                       : out.entities[e].name == rb.name;
          if (same && !grid[e][static_cast<std::size_t>(k)]) return e;
        }
        return std::nullopt;
      };
      std::optional<std::size_t> slot = find_slot(false);
      if (!slot) {
        slot = find_slot(true);
        if (slot) repairs.note("NAME_NORMALIZED", "matched '" + rb.name + "' ignoring case/spacing", sidx, k);
      }
      if (!slot) {
        repairs.note("UNKNOWN_ENTITY", "box for '" + rb.name + "' ignored", sidx, k);
        continue;
      }
      const BoundingBox raw_box{rb.coords[0], rb.coords[1], rb.coords[2], rb.coords[3]};
      BoundingBox q;
      try {
        q = quantize_box(raw_box);
      } catch (const Error&) {
        repairs.note("INVALID_BOX", "non-finite coordinates for '" + rb.name + "'", sidx, k);
        continue;
      }
      const double tol = 1e-9;
      if (std::abs(q.x0 - raw_box.x0) > tol || std::abs(q.y0 - raw_box.y0) > tol ||
          std::abs(q.x1 - raw_box.x1) > tol || std::abs(q.y1 - raw_box.y1) > tol) {
        ++snapped;
      }
      grid[*slot][static_cast<std::size_t>(k)] = q;
      ++matched;
    }
    if (matched == 0) {
      outcome.diagnostics.push_back({"EMPTY_FRAME", "frame " + std::to_string(k + 1) + " has no boxes", sidx, k});
      any_empty = true;
    }
  }
  if (any_empty) {
    invalid("INVALID_LAYOUT", "every frame needs at least one box");
    return outcome;
  }
  if (snapped > 0) {
    repairs.note("SNAPPED_TO_GRID", std::to_string(snapped) + " box(es) snapped to the 0.05 grid", sidx);
  }

  std::vector<EntityTrack> kept;
  for (std::size_t e = 0; e < out.entities.size(); ++e) {
    auto& row = grid[e];
    const auto first = std::find_if(row.begin(), row.end(), [](const auto& b) { return b.has_value(); });
    if (first == row.end()) {
      repairs.note("ENTITY_WITHOUT_LAYOUT", "entity '" + out.entities[e].id + "' has no boxes; dropped", sidx);
      continue;
    }
    // Hold the nearest earlier box (or the first one) across gaps.
    std::optional<BoundingBox> last = *first;
    for (int k = 0; k < expected; ++k) {
      auto& cell = row[static_cast<std::size_t>(k)];
      if (cell) {
        last = cell;
      } else {
        repairs.note("FILLED_KEYFRAME", "entity '" + out.entities[e].id + "' missing; held previous box", sidx, k);
        cell = last;
      }
      out.entities[e].keyframes.push_back({k, *cell});
    }
    kept.push_back(std::move(out.entities[e]));
  }
  out.entities = std::move(kept);
  outcome.status = repairs.repaired ? ParseStatus::kRepaired : ParseStatus::kOk;
  outcome.fragment = std::move(out);
  return outcome;
}

// ---------------------------------------------------------------------------

ConsistencyGroups build_consistency_groups(const std::vector<SceneSpec>& scenes,
                                           const GroupingOptions& options) {
  auto key = [&](const std::string& name) {
    return options.normalize_names ? lower(collapse_whitespace(name)) : name;
  };
  std::map<std::string, std::set<int>> occurrences;
  for (const SceneSpec& scene : scenes) {
    for (const EntityTrack& e : scene.entities) occurrences[key(e.name)].insert(scene.index);
    if (options.include_backgrounds && !scene.background.empty()) {
      occurrences[key(scene.background)].insert(scene.index);
    }
  }
  ConsistencyGroups groups;
  for (const auto& [name, indices] : occurrences) {
    groups.groups.emplace(name, std::vector<int>(indices.begin(), indices.end()));
  }
  return groups;
}

int guided_step_count(double alpha, int total_steps) {
  if (total_steps < 0) throw Error(ErrorCode::kArgError, "total_steps must be non-negative");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(ErrorCode::kArgError, "alpha must lie in [0, 1]");
  return static_cast<int>(std::lround(alpha * total_steps));
}

}  // namespace vdgpt::planner
