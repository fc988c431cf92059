#pragma once

// Evaluation prompt sets: direction-swapped movement prompts, coreference
// episodes and step-suffixed multi-scene prompts.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vdgpt/error.hpp"
#include "vdgpt/eval.hpp"

namespace vdgpt::datasets {

/// One line of a prompt-set file.
struct PromptRecord {
  std::string id;
  std::string text;
  std::optional<std::string> expected_direction;
  std::optional<std::string> target_entity;
  std::optional<std::string> episode_id;
  /// Per-scene sentences for multi-scene prompts.
  std::vector<std::string> scenes;

  bool operator==(const PromptRecord&) const = default;
};

nlohmann::ordered_json record_to_json(const PromptRecord& r);
PromptRecord record_from_json(const nlohmann::ordered_json& j);
std::string write_prompt_set(const std::vector<PromptRecord>& records);
/// Blank lines are skipped; errors carry "line N" in the path.
std::vector<PromptRecord> read_prompt_set(const std::string& jsonl);

struct DirectionPrompt {
  std::string text;
  eval::Direction direction;
  std::size_t caption_index = 0;
};

/// Four variants per caption, one per direction, with the first "left to
/// right" / "right to left" phrase swapped. Captions without a phrase are
/// skipped with a NO_DIRECTION_PHRASE diagnostic.
std::vector<DirectionPrompt> gen_actionbench_direction(const std::vector<std::string>& captions,
                                                       std::vector<Diagnostic>* diagnostics = nullptr);

std::vector<PromptRecord> to_records(const std::vector<DirectionPrompt>& prompts);

struct PronounSet {
  std::string subj = "it";
  std::string obj = "it";
  std::string poss = "its";
};

struct PronounTable {
  PronounSet fallback;
  std::map<std::string, PronounSet> entities;

  const PronounSet& lookup(const std::string& entity) const;
};

enum class SlotKind { kFirst, kSubject, kObject, kPossessive };

struct CharacterSlot {
  std::size_t sentence = 0;
  std::size_t begin = 0;
  std::size_t end = 0;
  SlotKind kind = SlotKind::kFirst;
};

/// Sentences carry "[[C]]" at the first mention of the character and
/// "[[C|subj]]", "[[C|obj]]" or "[[C|poss]]" at later ones.
struct EpisodeTemplate {
  std::string episode_id;
  std::vector<std::string> scene_sentences;
  std::vector<CharacterSlot> slots;
};

/// Locates slots; TEMPLATE_ERROR unless there is exactly one first mention
/// and it precedes every pronoun slot.
EpisodeTemplate parse_episode_template(const std::string& id, const std::vector<std::string>& sentences);

struct Episode {
  std::string id;
  std::string episode_id;
  std::string target_entity;
  std::vector<std::string> scenes;
};

/// Cartesian product templates x entities, template-major.
std::vector<Episode> gen_coref_sv(const std::vector<EpisodeTemplate>& templates,
                                  const std::vector<std::string>& entities, const PronounTable& pronouns = {});

std::vector<PromptRecord> to_records(const std::vector<Episode>& episodes);

/// "<prompt>, step n/N" for n = 1..N. ARG_ERROR when N < 1.
std::vector<std::string> hirest_scene_prompts(const std::string& task_prompt, int n_scenes);

/// Asset loaders.
std::vector<std::string> read_lines(const std::string& path);
std::vector<EpisodeTemplate> load_episode_templates(const std::string& path);
PronounTable load_pronoun_table(const std::string& path);

}  // namespace vdgpt::datasets
