#include <fstream>
#include <regex>
#include <sstream>

#include "vdgpt/planner.hpp"

namespace vdgpt::planner {

namespace assets {
extern const std::string_view kStep1;
extern const std::string_view kStep1Examples;
extern const std::string_view kStep2;
extern const std::string_view kStep2Examples;
extern const std::string_view kDynamicAlpha;
}  // namespace assets

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_examples(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream in{std::string(text)};
  std::string line, current;
  while (std::getline(in, line)) {
    if (trim(line) == "=====") {
      out.push_back(trim(current));
      current.clear();
    } else {
      current += line + "\n";
    }
  }
  if (!trim(current).empty()) out.push_back(trim(current));
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path, path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TemplateSet make_set(std::string_view step1, std::string_view step1_examples,
                     std::string_view step2, std::string_view step2_examples,
                     std::string_view alpha) {
  TemplateSet set;
  set.step1 = {TemplateId::kStep1, std::string(step1), split_examples(step1_examples)};
  set.step2 = {TemplateId::kStep2, std::string(step2), split_examples(step2_examples)};
  set.dynamic_alpha = {TemplateId::kDynamicAlpha, std::string(alpha), {}};
  return set;
}

std::string join_examples(const PromptTemplate& tmpl) {
  std::string out;
  for (const auto& example : tmpl.in_context_examples) {
    out += example;
    out += "\n\n";
  }
  // The template supplies its own blank line after {{examples}}.
  while (!out.empty() && out.back() == '\n') out.pop_back();
  return out;
}

std::string feedback_block(const std::string& feedback) {
  if (feedback.empty()) return {};
  return "Your previous answer could not be used: " + feedback +
         "\nAnswer again using the required format.\n\n";
}

void require_id(const PromptTemplate& tmpl, TemplateId id, const char* name) {
  if (tmpl.id != id) throw Error(ErrorCode::kTemplateError, std::string("expected a ") + name + " template");
}

}  // namespace

const TemplateSet& default_templates() {
  static const TemplateSet set = make_set(assets::kStep1, assets::kStep1Examples, assets::kStep2,
                                          assets::kStep2Examples, assets::kDynamicAlpha);
  return set;
}

TemplateSet load_templates(const std::string& dir) {
  return make_set(read_file(dir + "/step1.txt"), read_file(dir + "/step1_examples.txt"),
                  read_file(dir + "/step2.txt"), read_file(dir + "/step2_examples.txt"),
                  read_file(dir + "/dynamic_alpha.txt"));
}

std::string render_template(const std::string& text,
                            const std::map<std::string, std::string>& bindings) {
  static const std::regex placeholder(R"(\{\{([A-Za-z_][A-Za-z0-9_]*)\}\})");
  std::string out;
  out.reserve(text.size());
  auto begin = std::sregex_iterator(text.begin(), text.end(), placeholder);
  std::size_t last = 0;
  for (auto it = begin; it != std::sregex_iterator(); ++it) {
    const std::smatch& m = *it;
    out.append(text, last, static_cast<std::size_t>(m.position(0)) - last);
    const std::string name = m[1].str();
    auto found = bindings.find(name);
    if (found == bindings.end()) {
      throw Error(ErrorCode::kTemplateError, "unbound placeholder {{" + name + "}}", name);
    }
    out += found->second;
    last = static_cast<std::size_t>(m.position(0) + m.length(0));
  }
  out.append(text, last, std::string::npos);
  return out;
}

std::string render_step1_prompt(const std::string& source_prompt, const PromptTemplate& tmpl,
                                const std::string& feedback) {
  require_id(tmpl, TemplateId::kStep1, "step1");
  return render_template(tmpl.text, {{"prompt", source_prompt},
                                     {"examples", join_examples(tmpl)},
                                     {"feedback", feedback_block(feedback)}});
}

std::string render_step2_prompt(const SceneSpec& scene, const PromptTemplate& tmpl,
                                const std::string& feedback) {
  require_id(tmpl, TemplateId::kStep2, "step2");
  std::string entities;
  for (const EntityTrack& e : scene.entities) {
    if (!entities.empty()) entities += "; ";
    entities += e.name;
    if (!e.description.empty()) entities += " (" + e.description + ")";
  }
  std::string slots;
  for (int k = 1; k <= scene.num_keyframes; ++k) {
    if (k > 1) slots += ", ";
    slots += std::to_string(k);
  }
  return render_template(tmpl.text, {{"num_frames", std::to_string(scene.num_keyframes)},
                                     {"examples", join_examples(tmpl)},
                                     {"feedback", feedback_block(feedback)},
                                     {"scene_description", scene.description},
                                     {"background", scene.background},
                                     {"entities", entities},
                                     {"frame_slots", slots}});
}

std::string render_dynamic_alpha_prompt(const std::string& source_prompt,
                                        const PromptTemplate& tmpl, const std::string& feedback) {
  require_id(tmpl, TemplateId::kDynamicAlpha, "dynamic_alpha");
  return render_template(tmpl.text, {{"prompt", source_prompt},
                                     {"examples", join_examples(tmpl)},
                                     {"feedback", feedback_block(feedback)}});
}

}  // namespace vdgpt::planner
