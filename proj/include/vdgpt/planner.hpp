#pragma once

// Two-step video planning: scene expansion (step 1) and per-scene keyframe
// layouts (step 2), consistency grouping and the LLM-chosen guidance ratio.

#include <map>
#include <memory>
#include <optional>
#include <stop_token>
#include <string>
#include <vector>

#include <json.hpp>

#include "vdgpt/error.hpp"
#include "vdgpt/llm_backend.hpp"
#include "vdgpt/plan.hpp"

namespace vdgpt::planner {

enum class TemplateId { kStep1, kStep2, kDynamicAlpha };

struct PromptTemplate {
  TemplateId id = TemplateId::kStep1;
  std::string text;
  std::vector<std::string> in_context_examples;
};

struct TemplateSet {
  PromptTemplate step1;
  PromptTemplate step2;
  PromptTemplate dynamic_alpha;
};

/// Templates compiled in from assets/templates (1 step-1 example, 5 step-2).
const TemplateSet& default_templates();
/// Loads step1.txt, step1_examples.txt, step2.txt, step2_examples.txt and
/// dynamic_alpha.txt from `dir`; examples are separated by "=====" lines.
TemplateSet load_templates(const std::string& dir);

/// Substitutes {{name}} placeholders in one pass. Any placeholder without a
/// binding is a kTemplateError.
std::string render_template(const std::string& text,
                            const std::map<std::string, std::string>& bindings);

std::string render_step1_prompt(const std::string& source_prompt, const PromptTemplate& tmpl,
                                const std::string& feedback = {});
std::string render_step2_prompt(const SceneSpec& scene, const PromptTemplate& tmpl,
                                const std::string& feedback = {});
std::string render_dynamic_alpha_prompt(const std::string& source_prompt,
                                        const PromptTemplate& tmpl,
                                        const std::string& feedback = {});

enum class ParseStatus { kOk, kRepaired, kInvalid };
std::string_view to_string(ParseStatus status);

template <typename Fragment>
struct ParseOutcome {
  ParseStatus status = ParseStatus::kInvalid;
  std::optional<Fragment> fragment;  // absent iff status == kInvalid
  std::vector<Diagnostic> diagnostics;
};

/// Scenes with descriptions, entities (no layouts) and backgrounds.
ParseOutcome<std::vector<SceneSpec>> parse_step1_response(const std::string& raw);

/// Fills keyframe boxes of `scene`, snapping every box to the 0.05 grid.
ParseOutcome<SceneSpec> parse_step2_response(const std::string& raw, const SceneSpec& scene);

struct GroupingOptions {
  /// Lower-case and trim names before the exact match.
  bool normalize_names = false;
  /// Also group scene backgrounds by exact name.
  bool include_backgrounds = false;
};

ConsistencyGroups build_consistency_groups(const std::vector<SceneSpec>& scenes,
                                           const GroupingOptions& options = {});

struct RetryPolicy {
  /// Extra attempts after a transport failure.
  int max_backend_retries = 2;
};

struct DynamicAlphaResult {
  AlphaSetting setting;
  std::vector<Diagnostic> diagnostics;
  std::string raw;
  std::string prompt;
};

/// Asks the backend for a guidance ratio. Replies are clamped to [0, 0.3];
/// an unparseable reply falls back to a static 0.1.
DynamicAlphaResult request_dynamic_alpha(const std::string& source_prompt, LlmBackend& backend,
                                         const PromptTemplate& tmpl = default_templates().dynamic_alpha,
                                         const RetryPolicy& retry = {},
                                         const DecodingParams& params = {});

/// Number of reverse steps that use layout guidance: round(alpha * N).
int guided_step_count(double alpha, int total_steps);

struct PlannerConfig {
  TemplateSet templates = default_templates();
  DecodingParams decoding;
  RetryPolicy retry;
  /// Re-prompts per failed parse, with the diagnostics appended.
  int max_repair_attempts = 2;
  /// Concurrent step-2 requests.
  int fanout = 4;
  bool dynamic_alpha = false;
  double static_alpha = kDefaultAlpha;
  GroupingOptions grouping;
  int num_keyframes = kDefaultKeyframes;
  int target_frames = kDefaultTargetFrames;
  std::string created_at;
  std::stop_token stop;
};

struct SceneCompileReport {
  int scene = 0;
  ParseStatus status = ParseStatus::kInvalid;
  int attempts = 0;
  std::vector<Diagnostic> diagnostics;
};

struct CompileReport {
  ParseStatus step1_status = ParseStatus::kInvalid;
  int step1_attempts = 0;
  std::vector<Diagnostic> step1_diagnostics;
  std::vector<SceneCompileReport> scenes;
  std::vector<Diagnostic> alpha_diagnostics;
  int transport_retries = 0;
  ValidationReport validation;
  std::vector<int> failed_scenes;
  bool valid = false;
};

nlohmann::ordered_json report_to_json(const CompileReport& report);

struct CompileResult {
  VideoPlan plan;
  CompileReport report;
};

/// Thrown when a plan cannot be completed; carries whatever was assembled.
class CompileFailed : public Error {
 public:
  CompileFailed(const std::string& message, VideoPlan partial, CompileReport report)
      : Error(ErrorCode::kCompileFailed, message),
        partial_(std::move(partial)),
        report_(std::move(report)) {}

  const VideoPlan& partial_plan() const { return partial_; }
  const CompileReport& report() const { return report_; }

 private:
  VideoPlan partial_;
  CompileReport report_;
};

/// step 1 -> grouping -> per-scene step 2 -> optional dynamic alpha ->
/// validation. Throws CompileFailed or kBackendError.
CompileResult compile_plan(const std::string& source_prompt, LlmBackend& backend,
                           const PlannerConfig& config = {});

struct BatchReport {
  int total = 0;
  /// Prompts whose layouts parsed into a valid plan.
  int valid_samples = 0;
  std::vector<bool> valid;
};

BatchReport compile_batch(const std::vector<std::string>& prompts, LlmBackend& backend,
                          const PlannerConfig& config = {});

}  // namespace vdgpt::planner
