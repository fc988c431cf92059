#include <algorithm>
#include <atomic>
#include <exception>
#include <regex>
#include <thread>

#include "vdgpt/plan_json.hpp"
#include "vdgpt/planner.hpp"

namespace vdgpt::planner {

namespace {

void check_stop(const std::stop_token& stop) {
  if (stop.stop_requested()) throw Error(ErrorCode::kCancelled, "compilation cancelled");
}

// Calls the backend, retrying transport failures. `retries` counts the extra
// attempts actually made.
std::string complete_with_retry(LlmBackend& backend, const std::string& prompt,
                                const DecodingParams& params, const RetryPolicy& retry,
                                std::atomic<int>& retries, const std::stop_token& stop = {}) {
  for (int attempt = 0;; ++attempt) {
    check_stop(stop);
    try {
      return backend.complete(prompt, params);
    } catch (const BackendError&) {
      if (attempt >= retry.max_backend_retries) throw;
      ++retries;
    }
  }
}

std::string summarize(const std::vector<Diagnostic>& diagnostics) {
  std::string out;
  for (const Diagnostic& d : diagnostics) {
    if (!out.empty()) out += "; ";
    out += d.code + " (" + d.message + ")";
  }
  return out;
}

ojson diagnostics_json(const std::vector<Diagnostic>& diagnostics) {
  ojson out = ojson::array();
  for (const Diagnostic& d : diagnostics) {
    ojson j;
    j["code"] = d.code;
    j["message"] = d.message;
    if (d.scene > 0) j["scene"] = d.scene;
    if (d.frame >= 0) j["frame"] = d.frame;
    out.push_back(std::move(j));
  }
  return out;
}

struct SceneSlot {
  SceneCompileReport report;
  std::optional<SceneSpec> scene;
  std::vector<ProvenanceEntry> provenance;
  std::exception_ptr error;
};

}  // namespace

DynamicAlphaResult request_dynamic_alpha(const std::string& source_prompt, LlmBackend& backend,
                                         const PromptTemplate& tmpl, const RetryPolicy& retry,
                                         const DecodingParams& params) {
  static const std::regex number(R"([-+]?(?:\d+\.?\d*|\.\d+))");
  DynamicAlphaResult result;
  result.prompt = render_dynamic_alpha_prompt(source_prompt, tmpl);
  std::atomic<int> retries{0};
  result.raw = complete_with_retry(backend, result.prompt, params, retry, retries);

  std::smatch m;
  if (!std::regex_search(result.raw, m, number)) {
    result.setting = {AlphaMode::kStatic, kDefaultAlpha};
    result.diagnostics.push_back({"ALPHA_UNPARSEABLE", "no number in reply; using static 0.1"});
    return result;
  }
  double value = std::stod(m[0].str());
  if (value < 0.0 || value > kDynamicAlphaMax) {
    const double clamped = std::clamp(value, 0.0, kDynamicAlphaMax);
    result.diagnostics.push_back(
        {"ALPHA_CLAMPED", "reply " + m[0].str() + " clamped to " + std::to_string(clamped).substr(0, 4)});
    value = clamped;
  }
  result.setting = {AlphaMode::kLlmDynamic, value};
  return result;
}

ojson report_to_json(const CompileReport& report) {
  ojson j;
  j["valid"] = report.valid;
  j["step1"] = {{"status", to_string(report.step1_status)},
                {"attempts", report.step1_attempts},
                {"diagnostics", diagnostics_json(report.step1_diagnostics)}};
  ojson scenes = ojson::array();
  for (const SceneCompileReport& s : report.scenes) {
    ojson sj;
    sj["scene"] = s.scene;
    sj["status"] = to_string(s.status);
    sj["attempts"] = s.attempts;
    sj["diagnostics"] = diagnostics_json(s.diagnostics);
    scenes.push_back(std::move(sj));
  }
  j["scenes"] = std::move(scenes);
  j["alpha_diagnostics"] = diagnostics_json(report.alpha_diagnostics);
  j["transport_retries"] = report.transport_retries;
  j["failed_scenes"] = report.failed_scenes;
  j["validation"] = vdgpt::report_to_json(report.validation);
  return j;
}

CompileResult compile_plan(const std::string& source_prompt, LlmBackend& backend,
                           const PlannerConfig& config) {
  std::atomic<int> retries{0};
  CompileReport report;
  VideoPlan plan;
  plan.source_prompt = source_prompt;
  plan.provenance.model = backend.model_id();
  plan.provenance.created_at = config.created_at;
  plan.alpha = {AlphaMode::kStatic, config.static_alpha};

  auto fail = [&](const std::string& message) {
    report.transport_retries = retries.load();
    report.validation = validate_plan(plan);
    report.valid = false;
    throw CompileFailed(message, plan, report);
  };

  // Step 1: scenes, entities and backgrounds.
  std::vector<SceneSpec> scenes;
  std::string feedback;
  for (int attempt = 1; attempt <= 1 + config.max_repair_attempts; ++attempt) {
    const std::string prompt = render_step1_prompt(source_prompt, config.templates.step1, feedback);
    const std::string raw =
        complete_with_retry(backend, prompt, config.decoding, config.retry, retries, config.stop);
    plan.provenance.responses.push_back({"step1", 0, attempt, prompt, raw});
    auto outcome = parse_step1_response(raw);
    report.step1_attempts = attempt;
    report.step1_status = outcome.status;
    report.step1_diagnostics = outcome.diagnostics;
    if (outcome.fragment) {
      scenes = std::move(*outcome.fragment);
      break;
    }
    feedback = summarize(outcome.diagnostics);
  }
  if (scenes.empty()) fail("step 1 response could not be parsed");

  for (SceneSpec& scene : scenes) {
    scene.num_keyframes = config.num_keyframes;
    scene.target_frames = config.target_frames;
  }
  plan.scenes = scenes;
  plan.consistency = build_consistency_groups(scenes, config.grouping);

  // Step 2: keyframe layouts per scene, bounded fan-out.
  std::vector<SceneSlot> slots(scenes.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= scenes.size()) return;
      SceneSlot& slot = slots[i];
      slot.report.scene = scenes[i].index;
      try {
        std::string fb;
        for (int attempt = 1; attempt <= 1 + config.max_repair_attempts; ++attempt) {
          const std::string prompt = render_step2_prompt(scenes[i], config.templates.step2, fb);
          const std::string raw =
              complete_with_retry(backend, prompt, config.decoding, config.retry, retries, config.stop);
          slot.provenance.push_back({"step2", scenes[i].index, attempt, prompt, raw});
          auto outcome = parse_step2_response(raw, scenes[i]);
          slot.report.attempts = attempt;
          slot.report.status = outcome.status;
          slot.report.diagnostics = outcome.diagnostics;
          if (outcome.fragment) {
            slot.scene = std::move(outcome.fragment);
            break;
          }
          fb = summarize(outcome.diagnostics);
        }
      } catch (...) {
        slot.error = std::current_exception();
      }
    }
  };
  const int fanout = backend.concurrent_safe() ? std::max(1, config.fanout) : 1;
  const int workers = std::min<int>(fanout, static_cast<int>(scenes.size()));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  }

  bool layouts_changed_entities = false;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    SceneSlot& slot = slots[i];
    if (slot.error) std::rethrow_exception(slot.error);
    for (ProvenanceEntry& p : slot.provenance) plan.provenance.responses.push_back(std::move(p));
    report.scenes.push_back(slot.report);
    if (slot.scene) {
      if (slot.scene->entities.size() != plan.scenes[i].entities.size()) layouts_changed_entities = true;
      plan.scenes[i] = std::move(*slot.scene);
    } else {
      report.failed_scenes.push_back(scenes[i].index);
    }
  }
  if (layouts_changed_entities) plan.consistency = build_consistency_groups(plan.scenes, config.grouping);

  if (config.dynamic_alpha) {
    check_stop(config.stop);
    auto alpha = request_dynamic_alpha(source_prompt, backend, config.templates.dynamic_alpha,
                                       config.retry, config.decoding);
    plan.alpha = alpha.setting;
    report.alpha_diagnostics = alpha.diagnostics;
    plan.provenance.responses.push_back({"alpha", 0, 1, alpha.prompt, alpha.raw});
  }

  if (!report.failed_scenes.empty()) {
    std::string list;
    for (int s : report.failed_scenes) list += (list.empty() ? "" : ", ") + std::to_string(s);
    fail("layout for scene(s) " + list + " could not be parsed");
  }

  report.transport_retries = retries.load();
  report.validation = validate_plan(plan);
  report.valid = report.validation.valid();
  if (!report.valid) fail("assembled plan failed validation");
  return {std::move(plan), std::move(report)};
}

BatchReport compile_batch(const std::vector<std::string>& prompts, LlmBackend& backend,
                          const PlannerConfig& config) {
  BatchReport batch;
  batch.total = static_cast<int>(prompts.size());
  for (const std::string& prompt : prompts) {
    bool ok = false;
    try {
      ok = compile_plan(prompt, backend, config).report.valid;
    } catch (const CompileFailed&) {
      ok = false;
    } catch (const BackendError&) {
      ok = false;
    }
    batch.valid.push_back(ok);
    if (ok) ++batch.valid_samples;
  }
  return batch;
}

}  // namespace vdgpt::planner
