#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "vdgpt/llm_backend.hpp"

namespace vdgpt::planner {

using nlohmann::ordered_json;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) out.push_back(trim(line));
  return out;
}

// Value of the last "Key: value" line.
std::optional<std::string> last_field(const std::vector<std::string>& lines, const std::string& key) {
  const std::string prefix = key + ":";
  for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
    if (it->rfind(prefix, 0) == 0) return trim(it->substr(prefix.size()));
  }
  return std::nullopt;
}

struct DirectionRule {
  const char* phrase;
  BoundingBox start;
  BoundingBox end;
};

const std::array<DirectionRule, 4>& direction_rules() {
  static const std::array<DirectionRule, 4> rules{{
      {"left to right", {0.05, 0.35, 0.35, 0.65}, {0.65, 0.35, 0.95, 0.65}},
      {"right to left", {0.65, 0.35, 0.95, 0.65}, {0.05, 0.35, 0.35, 0.65}},
      {"top to bottom", {0.35, 0.05, 0.65, 0.35}, {0.35, 0.65, 0.65, 0.95}},
      {"bottom to top", {0.35, 0.65, 0.65, 0.95}, {0.35, 0.05, 0.65, 0.35}},
  }};
  return rules;
}

// Guess of the moving object: the word after the last article before the
// direction phrase, else the first word.
std::string subject_of(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> words;
  std::string w;
  while (in >> w) {
    std::string clean;
    for (char c : w) {
      if (std::isalnum(static_cast<unsigned char>(c)) || c == '-') clean += c;
    }
    if (!clean.empty()) words.push_back(clean);
  }
  if (words.empty()) return "object";
  std::string subject;
  for (std::size_t i = 0; i + 1 < words.size(); ++i) {
    if (words[i] == "from") break;
    std::string lw = words[i];
    std::transform(lw.begin(), lw.end(), lw.begin(), [](unsigned char c) { return std::tolower(c); });
    if (lw == "a" || lw == "an" || lw == "the") subject = words[i + 1];
  }
  if (subject.empty()) subject = words.front();
  std::transform(subject.begin(), subject.end(), subject.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return subject;
}

MockScene rule_scene(const std::string& description) {
  MockScene scene;
  scene.description = description;
  scene.background = "plain room";
  MockEntity entity;
  entity.name = subject_of(description);
  entity.description = "a " + entity.name;
  for (const DirectionRule& rule : direction_rules()) {
    if (description.find(rule.phrase) != std::string::npos) {
      entity.start = rule.start;
      entity.end = rule.end;
      break;
    }
  }
  scene.entities.push_back(entity);
  return scene;
}

bool mentions_motion(const std::string& text) {
  return std::any_of(direction_rules().begin(), direction_rules().end(),
                     [&](const DirectionRule& r) { return text.find(r.phrase) != std::string::npos; });
}

std::string fenced(const ordered_json& doc) { return "```json\n" + doc.dump() + "\n```\n"; }

}  // namespace

void RuleBasedMockBackend::add_script(const std::string& source_prompt, MockScript script) {
  std::lock_guard lock(mutex_);
  scripts_[source_prompt] = std::move(script);
}

MockScript RuleBasedMockBackend::script_for(const std::string& source_prompt) const {
  {
    std::lock_guard lock(mutex_);
    auto it = scripts_.find(source_prompt);
    if (it != scripts_.end()) return it->second;
  }
  MockScript script;
  script.scenes.push_back(rule_scene(source_prompt));
  return script;
}

std::string RuleBasedMockBackend::step1_response(const MockScript& script) {
  ordered_json scenes = ordered_json::array();
  for (const MockScene& s : script.scenes) {
    ordered_json entities = ordered_json::array();
    for (const MockEntity& e : s.entities) {
      entities.push_back({{"name", e.name}, {"description", e.description}});
    }
    scenes.push_back({{"description", s.description}, {"entities", entities}, {"background", s.background}});
  }
  return fenced({{"scenes", scenes}});
}

std::string RuleBasedMockBackend::step2_response(const MockScene& scene, int num_keyframes) {
  ordered_json frames = ordered_json::array();
  for (int k = 0; k < num_keyframes; ++k) {
    const double t = num_keyframes > 1 ? static_cast<double>(k) / (num_keyframes - 1) : 0.0;
    ordered_json boxes = ordered_json::array();
    for (const MockEntity& e : scene.entities) {
      const BoundingBox b = quantize_box({e.start.x0 + t * (e.end.x0 - e.start.x0),
                                          e.start.y0 + t * (e.end.y0 - e.start.y0),
                                          e.start.x1 + t * (e.end.x1 - e.start.x1),
                                          e.start.y1 + t * (e.end.y1 - e.start.y1)});
      boxes.push_back({{"name", e.name}, {"box", {b.x0, b.y0, b.x1, b.y1}}});
    }
    frames.push_back({{"frame", k + 1}, {"boxes", boxes}});
  }
  return fenced({{"frames", frames}});
}

std::string RuleBasedMockBackend::complete(const std::string& prompt, const DecodingParams&) {
  const auto lines = lines_of(prompt);
  auto last = std::find_if(lines.rbegin(), lines.rend(), [](const std::string& l) { return !l.empty(); });
  if (last == lines.rend()) throw BackendError("mock backend: empty prompt");

  if (*last == "Video plan:") {
    auto source = last_field(lines, "Prompt");
    if (!source) throw BackendError("mock backend: step-1 prompt without a 'Prompt:' line");
    return step1_response(script_for(*source));
  }
  if (*last == "Guidance ratio:") {
    auto source = last_field(lines, "Prompt");
    if (!source) throw BackendError("mock backend: alpha prompt without a 'Prompt:' line");
    const MockScript script = script_for(*source);
    const double alpha = script.alpha.value_or(mentions_motion(*source) ? 0.2 : 0.1);
    std::ostringstream out;
    out << alpha;
    return out.str();
  }
  if (*last == "Layout:") {
    auto description = last_field(lines, "Scene description");
    auto frames = last_field(lines, "Frames");
    if (!description || !frames) throw BackendError("mock backend: malformed step-2 prompt");
    const int num_keyframes = static_cast<int>(std::count(frames->begin(), frames->end(), ',')) + 1;
    std::optional<MockScene> found;
    {
      std::lock_guard lock(mutex_);
      for (const auto& [_, script] : scripts_) {
        for (const MockScene& s : script.scenes) {
          if (s.description == *description) found = s;
        }
      }
    }
    return step2_response(found ? *found : rule_scene(*description), num_keyframes);
  }
  throw BackendError("mock backend: unrecognized prompt");
}

MockScript chef_oven_script() {
  MockScript script;
  const MockEntity chef_left{"chef", "a chef in a white uniform and tall hat", {0.05, 0.2, 0.4, 0.95},
                             {0.3, 0.2, 0.65, 0.95}};
  const MockEntity chef_still{"chef", "a chef in a white uniform and tall hat", {0.3, 0.2, 0.65, 0.95},
                              {0.3, 0.2, 0.65, 0.95}};
  script.scenes = {
      {"A chef in a white uniform preheats the oven.",
       "kitchen",
       {chef_left, {"oven", "a stainless steel oven", {0.6, 0.4, 0.95, 0.95}, {0.6, 0.4, 0.95, 0.95}}}},
      {"The chef mixes flour, butter and caraway seeds in a bowl.", "kitchen", {chef_still}},
      {"The chef shapes the dough into small round cakes.", "kitchen", {chef_still}},
      {"The chef serves the freshly baked caraway cakes.", "dining room", {chef_still}},
  };
  return script;
}

std::string FaultInjectingBackend::complete(const std::string& prompt, const DecodingParams& params) {
  if (auto replaced = hook_(prompt)) return *replaced;
  return inner_->complete(prompt, params);
}

// ---------------------------------------------------------------------------

std::vector<ReplayRecord> load_replay_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open replay file " + path, path);
  std::vector<ReplayRecord> records;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (trim(line).empty()) continue;
    try {
      const auto doc = nlohmann::json::parse(line);
      records.push_back({doc.at("prompt").get<std::string>(), doc.at("response").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kParseError, std::string("replay record: ") + e.what(),
                  path + ":" + std::to_string(number));
    }
  }
  return records;
}

void append_replay_record(const std::string& path, const ReplayRecord& record) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write replay file " + path, path);
  ordered_json doc;
  doc["prompt"] = record.prompt;
  doc["response"] = record.response;
  out << doc.dump() << '\n';
}

ReplayBackend::ReplayBackend(std::vector<ReplayRecord> records, std::string model) : model_(std::move(model)) {
  for (ReplayRecord& r : records) queue_[r.prompt].push_back(std::move(r.response));
}

std::shared_ptr<ReplayBackend> ReplayBackend::from_file(const std::string& path) {
  return std::make_shared<ReplayBackend>(load_replay_file(path));
}

std::string ReplayBackend::complete(const std::string& prompt, const DecodingParams&) {
  std::lock_guard lock(mutex_);
  auto it = queue_.find(prompt);
  if (it == queue_.end()) throw BackendError("replay: no recorded response for prompt");
  std::size_t& cursor = cursor_[prompt];
  if (cursor >= it->second.size()) throw BackendError("replay: recorded responses exhausted for prompt");
  return it->second[cursor++];
}

std::string RecordingBackend::complete(const std::string& prompt, const DecodingParams& params) {
  std::string response = inner_->complete(prompt, params);
  std::lock_guard lock(mutex_);
  append_replay_record(path_, {prompt, response});
  return response;
}

}  // namespace vdgpt::planner
