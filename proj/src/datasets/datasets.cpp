#include "vdgpt/datasets.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

namespace vdgpt::datasets {

using ojson = nlohmann::ordered_json;

ojson record_to_json(const PromptRecord& r) {
  ojson j;
  j["id"] = r.id;
  j["text"] = r.text;
  if (r.expected_direction) j["expected_direction"] = *r.expected_direction;
  if (r.target_entity) j["target_entity"] = *r.target_entity;
  if (r.episode_id) j["episode_id"] = *r.episode_id;
  if (!r.scenes.empty()) j["scenes"] = r.scenes;
  return j;
}

PromptRecord record_from_json(const ojson& j) {
  PromptRecord r;
  r.id = j.at("id").get<std::string>();
  r.text = j.at("text").get<std::string>();
  if (j.contains("expected_direction")) r.expected_direction = j["expected_direction"].get<std::string>();
  if (j.contains("target_entity")) r.target_entity = j["target_entity"].get<std::string>();
  if (j.contains("episode_id")) r.episode_id = j["episode_id"].get<std::string>();
  if (j.contains("scenes")) r.scenes = j["scenes"].get<std::vector<std::string>>();
  return r;
}

std::string write_prompt_set(const std::vector<PromptRecord>& records) {
  std::string out;
  for (const auto& r : records) out += record_to_json(r).dump() + "\n";
  return out;
}

std::vector<PromptRecord> read_prompt_set(const std::string& jsonl) {
  std::vector<PromptRecord> out;
  std::istringstream in(jsonl);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(record_from_json(ojson::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kParseError, std::string("bad prompt record: ") + e.what(), "line " + std::to_string(n));
    }
  }
  return out;
}

std::vector<DirectionPrompt> gen_actionbench_direction(const std::vector<std::string>& captions,
                                                       std::vector<Diagnostic>* diagnostics) {
  std::vector<DirectionPrompt> out;
  for (std::size_t i = 0; i < captions.size(); ++i) {
    const std::string& c = captions[i];
    std::size_t pos = std::string::npos, len = 0;
    for (eval::Direction d : {eval::Direction::kLeftToRight, eval::Direction::kRightToLeft}) {
      const std::string_view phrase = eval::direction_phrase(d);
      const std::size_t p = c.find(phrase);
      if (p != std::string::npos && p < pos) {
        pos = p;
        len = phrase.size();
      }
    }
    if (pos == std::string::npos) {
      if (diagnostics) {
        diagnostics->push_back({"NO_DIRECTION_PHRASE", "caption " + std::to_string(i + 1) + " has no direction phrase"});
      }
      continue;
    }
    for (eval::Direction d : eval::kAllDirections) {
      out.push_back({c.substr(0, pos) + std::string(eval::direction_phrase(d)) + c.substr(pos + len), d, i});
    }
  }
  return out;
}

std::vector<PromptRecord> to_records(const std::vector<DirectionPrompt>& prompts) {
  std::vector<PromptRecord> out;
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    PromptRecord r;
    std::ostringstream id;
    id << "actionbench-" << prompts[i].caption_index + 1 << "-" << eval::to_string(prompts[i].direction);
    r.id = id.str();
    r.text = prompts[i].text;
    r.expected_direction = std::string(eval::to_string(prompts[i].direction));
    out.push_back(std::move(r));
  }
  return out;
}

const PronounSet& PronounTable::lookup(const std::string& entity) const {
  auto it = entities.find(entity);
  return it == entities.end() ? fallback : it->second;
}

EpisodeTemplate parse_episode_template(const std::string& id, const std::vector<std::string>& sentences) {
  EpisodeTemplate t{id, sentences, {}};
  for (std::size_t s = 0; s < sentences.size(); ++s) {
    const std::string& text = sentences[s];
    std::size_t pos = 0;
    while ((pos = text.find("[[C", pos)) != std::string::npos) {
      const std::size_t close = text.find("]]", pos);
      if (close == std::string::npos) {
        throw Error(ErrorCode::kTemplateError, "unterminated character slot", id + " scene " + std::to_string(s + 1));
      }
      const std::string body = text.substr(pos + 3, close - pos - 3);
      SlotKind kind;
      if (body.empty()) kind = SlotKind::kFirst;
      else if (body == "|subj") kind = SlotKind::kSubject;
      else if (body == "|obj") kind = SlotKind::kObject;
      else if (body == "|poss") kind = SlotKind::kPossessive;
      else throw Error(ErrorCode::kTemplateError, "unknown slot '[[C" + body + "]]'", id);
      t.slots.push_back({s, pos, close + 2, kind});
      pos = close + 2;
    }
  }
  int firsts = 0;
  for (const auto& slot : t.slots) {
    if (slot.kind == SlotKind::kFirst) ++firsts;
    else if (firsts == 0) throw Error(ErrorCode::kTemplateError, "pronoun slot before the first mention", id);
  }
  if (firsts != 1) {
    throw Error(ErrorCode::kTemplateError,
                "episode needs exactly one first-mention slot, found " + std::to_string(firsts), id);
  }
  return t;
}

namespace {

bool sentence_start(const std::string& s, std::size_t pos) {
  for (std::size_t i = pos; i > 0; --i) {
    const char c = s[i - 1];
    if (c == ' ') continue;
    return c == '.' || c == '!' || c == '?';
  }
  return true;
}

}  // namespace

std::vector<Episode> gen_coref_sv(const std::vector<EpisodeTemplate>& templates,
                                  const std::vector<std::string>& entities, const PronounTable& pronouns) {
  std::vector<Episode> out;
  for (const auto& t : templates) {
    for (std::size_t e = 0; e < entities.size(); ++e) {
      const std::string& entity = entities[e];
      const PronounSet& p = pronouns.lookup(entity);
      Episode ep;
      ep.id = t.episode_id + "-" + std::to_string(e + 1);
      ep.episode_id = t.episode_id;
      ep.target_entity = entity;
      ep.scenes = t.scene_sentences;
      // Right to left so earlier offsets stay valid.
      for (auto it = t.slots.rbegin(); it != t.slots.rend(); ++it) {
        std::string& text = ep.scenes[it->sentence];
        std::string word;
        switch (it->kind) {
          case SlotKind::kFirst: word = entity; break;
          case SlotKind::kSubject: word = p.subj; break;
          case SlotKind::kObject: word = p.obj; break;
          case SlotKind::kPossessive: word = p.poss; break;
        }
        if (it->kind != SlotKind::kFirst && !word.empty() && sentence_start(text, it->begin)) {
          word[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(word[0])));
        }
        text.replace(it->begin, it->end - it->begin, word);
      }
      out.push_back(std::move(ep));
    }
  }
  return out;
}

std::vector<PromptRecord> to_records(const std::vector<Episode>& episodes) {
  std::vector<PromptRecord> out;
  for (const auto& ep : episodes) {
    PromptRecord r;
    r.id = "coref-" + ep.id;
    for (const auto& s : ep.scenes) r.text += (r.text.empty() ? "" : " ") + s;
    r.target_entity = ep.target_entity;
    r.episode_id = ep.episode_id;
    r.scenes = ep.scenes;
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<std::string> hirest_scene_prompts(const std::string& task_prompt, int n_scenes) {
  if (n_scenes < 1) throw Error(ErrorCode::kArgError, "need at least one scene");
  std::vector<std::string> out;
  for (int n = 1; n <= n_scenes; ++n) {
    out.push_back(task_prompt + ", step " + std::to_string(n) + "/" + std::to_string(n_scenes));
  }
  return out;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::kIoError, "cannot open " + path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

namespace {

ojson load_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::kIoError, "cannot open " + path);
  try {
    return ojson::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, e.what(), path);
  }
}

PronounSet pronoun_set(const ojson& j) {
  return {j.at("subj").get<std::string>(), j.at("obj").get<std::string>(), j.at("poss").get<std::string>()};
}

}  // namespace

std::vector<EpisodeTemplate> load_episode_templates(const std::string& path) {
  const ojson doc = load_json(path);
  std::vector<EpisodeTemplate> out;
  try {
    for (const auto& e : doc.at("episodes")) {
      out.push_back(parse_episode_template(e.at("id").get<std::string>(), e.at("scenes").get<std::vector<std::string>>()));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, e.what(), path);
  }
  return out;
}

PronounTable load_pronoun_table(const std::string& path) {
  const ojson doc = load_json(path);
  PronounTable t;
  try {
    if (doc.contains("default")) t.fallback = pronoun_set(doc["default"]);
    if (doc.contains("entities")) {
      for (const auto& [name, set] : doc["entities"].items()) t.entities[name] = pronoun_set(set);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, e.what(), path);
  }
  return t;
}

}  // namespace vdgpt::datasets
