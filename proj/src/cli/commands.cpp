#include <CLI11.hpp>

#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "vdgpt/cli.hpp"
#include "vdgpt/datasets.hpp"
#include "vdgpt/eval.hpp"
#include "vdgpt/grounding.hpp"
#include "vdgpt/layout.hpp"
#include "vdgpt/plan_json.hpp"
#include "vdgpt/planner.hpp"
#include "vdgpt/service.hpp"

namespace vdgpt::cli {

namespace {

std::string asset_dir() {
  if (const char* env = std::getenv("VDGPT_ASSETS")) return env;
  return VDGPT_ASSET_DIR;
}

std::string read_text(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::kIoError, "cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f || !f.write(text.data(), static_cast<std::streamsize>(text.size()))) {
    throw Error(ErrorCode::kIoError, "cannot write " + path);
  }
}

ojson parse_json(const std::string& text, const std::string& path) {
  try {
    return ojson::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, e.what(), path);
  }
}

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct BackendOptions {
  std::string kind = "mock";
  std::string replay;
  std::string record;
  std::string base_url = planner::HttpBackendConfig{}.base_url;
  std::string model = planner::HttpBackendConfig{}.model;
  std::string api_key_env = planner::HttpBackendConfig{}.api_key_env;
  int timeout = planner::HttpBackendConfig{}.timeout_seconds;
  int corrupt_scene = 0;

  void add_to(CLI::App* app) {
    app->add_option("--backend", kind, "mock, replay or http")->check(CLI::IsMember({"mock", "replay", "http"}));
    app->add_option("--replay", replay, "replay file for --backend replay");
    app->add_option("--record", record, "append every exchange to this replay file");
    app->add_option("--base-url", base_url, "chat completions server");
    app->add_option("--model", model, "model name sent to the server");
    app->add_option("--api-key-env", api_key_env, "environment variable holding the API key");
    app->add_option("--timeout", timeout, "HTTP timeout in seconds");
    app->add_option("--mock-corrupt-scene", corrupt_scene, "mock answers garbage to this scene's layout prompt");
  }

  std::shared_ptr<planner::LlmBackend> make(const std::string& source_prompt = {}) const {
    std::shared_ptr<planner::LlmBackend> b;
    std::shared_ptr<planner::RuleBasedMockBackend> mock;
    if (kind == "mock") {
      mock = std::make_shared<planner::RuleBasedMockBackend>();
      mock->add_script("make caraway cakes", planner::chef_oven_script());
      b = mock;
    } else if (kind == "replay") {
      if (replay.empty()) throw Error(ErrorCode::kArgError, "--backend replay needs --replay FILE");
      b = planner::ReplayBackend::from_file(replay);
    } else {
      b = std::make_shared<planner::HttpChatBackend>(
          planner::HttpBackendConfig{base_url, "/v1/chat/completions", model, api_key_env, timeout});
    }
    if (corrupt_scene > 0) {
      if (!mock) throw Error(ErrorCode::kArgError, "--mock-corrupt-scene needs the mock backend");
      const auto script = mock->script_for(source_prompt);
      if (corrupt_scene > static_cast<int>(script.scenes.size())) {
        throw Error(ErrorCode::kArgError, "--mock-corrupt-scene beyond the scripted scenes");
      }
      const std::string target = script.scenes[static_cast<std::size_t>(corrupt_scene - 1)].description;
      b = std::make_shared<planner::FaultInjectingBackend>(
          b, [target](const std::string& prompt) -> std::optional<std::string> {
            const std::string key = "Scene description: ";
            const auto at = prompt.rfind(key);
            if (at == std::string::npos) return std::nullopt;
            const auto eol = prompt.find('\n', at);
            if (prompt.substr(at + key.size(), eol - at - key.size()) != target) return std::nullopt;
            return std::string("lorem ipsum dolor sit amet");
          });
    }
    if (!record.empty()) b = std::make_shared<planner::RecordingBackend>(b, record);
    return b;
  }
};

}  // namespace

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kBackendError: return kExitBackend;
    case ErrorCode::kInvalidCoordinate:
    case ErrorCode::kParseError:
    case ErrorCode::kTemplateError:
    case ErrorCode::kCompileFailed:
    case ErrorCode::kEmptyTrack:
    case ErrorCode::kShapeError:
    case ErrorCode::kStepError:
    case ErrorCode::kInsufficientScenes:
    case ErrorCode::kArgError: return kExitInvalid;
    case ErrorCode::kTrainingDiverged:
    case ErrorCode::kCancelled:
    case ErrorCode::kIoError: return kExitInternal;
  }
  return kExitInternal;
}


namespace {

struct PlanArgs {
  std::string prompt;
  std::string out;
  std::string report;
  std::string alpha = "static";
  double static_alpha = kDefaultAlpha;
  std::string created_at;
  int fanout = 4;
  BackendOptions backend;
};

int cmd_plan(const PlanArgs& a, std::ostream& out, std::ostream& err) {
  auto backend = a.backend.make(a.prompt);
  planner::PlannerConfig cfg;
  cfg.dynamic_alpha = a.alpha == "llm";
  cfg.static_alpha = a.static_alpha;
  cfg.fanout = a.fanout;
  cfg.created_at = a.created_at.empty() ? utc_now() : a.created_at;
  auto write_report = [&](const planner::CompileReport& r) {
    if (!a.report.empty()) write_text(a.report, planner::report_to_json(r).dump(2) + "\n", out);
  };
  try {
    const auto result = planner::compile_plan(a.prompt, *backend, cfg);
    write_text(a.out, serialize_plan(result.plan), out);
    write_report(result.report);
    return kExitOk;
  } catch (const planner::CompileFailed& e) {
    write_report(e.report());
    if (!a.out.empty() && a.out != "-") write_text(a.out, serialize_plan(e.partial_plan()), out);
    err << e.what() << "\n" << planner::report_to_json(e.report()).dump(2) << "\n";
    return kExitInvalid;
  }
}

int cmd_validate(const std::string& path, std::ostream& out) {
  const auto report = validate_plan(load_plan_file(path));
  out << report_to_json(report).dump(2) << "\n";
  return report.valid() ? kExitOk : kExitInvalid;
}

int cmd_interp(const std::string& path, std::optional<int> frames, const std::string& dest, std::ostream& out) {
  if (frames && *frames < 1) throw Error(ErrorCode::kArgError, "--frames must be positive");
  const auto dense = layout::densify_plan(load_plan_file(path), frames);
  write_text(dest, layout::dense_to_json(dense).dump(2) + "\n", out);
  return kExitOk;
}

struct SampleArgs {
  std::string plan;
  std::string checkpoint;
  int scene = 1;
  int steps = 50;
  std::optional<double> alpha;
  std::uint64_t seed = 0;
  std::string sampler = "ddim";
  std::string out;
  bool include_latents = true;
};

int cmd_sample(const SampleArgs& a, std::ostream& out) {
  using namespace grounding;
  const VideoPlan plan = load_plan_file(a.plan);
  ToyDenoiser<double> model = a.checkpoint.empty() ? ToyDenoiser<double>() : model_from_tensors(read_checkpoint(a.checkpoint));
  const double alpha = a.alpha.value_or(plan.alpha.value);
  DenoiseSchedule schedule = model.schedule();
  schedule.with_sampling(a.steps, alpha);
  if (a.scene < 1 || a.scene > static_cast<int>(plan.scenes.size())) {
    throw Error(ErrorCode::kArgError, "--scene outside the plan");
  }
  EmbeddingCache cache(std::make_shared<HashEmbeddingProvider>(model.config().mlp.embed));
  const auto dense = layout::densify_scene(plan.scenes[static_cast<std::size_t>(a.scene - 1)]);
  const int latent_frames = 4;
  const auto cond =
      conditioning_for(tokens_for_layout(dense, cache, model.trainable().mlp), dense, cache, latent_frames);
  Rng rng(a.seed);
  const ToyConfig& c = model.config();
  const auto z_T = LatentGrid<double>::noise(rng, latent_frames, c.channels, c.height, c.width);
  SamplerTrace trace;
  const auto z0 = denoise_sample<double>(model, schedule, z_T, cond, sampler_from_string(a.sampler), &trace);
  ojson doc;
  doc["schema"] = "vdgpt-latent/1";
  doc["scene"] = a.scene;
  doc["sampler"] = a.sampler;
  doc["steps"] = a.steps;
  doc["alpha"] = alpha;
  doc["guided_steps"] = schedule.guided_steps;
  doc["seed"] = a.seed;
  doc["trace"] = {{"timesteps", trace.timesteps}, {"guided", trace.guided}, {"guided_count", trace.guided_count()},
                  {"gated_forward_passes", model.guided_calls()}};
  doc["shape"] = {z0.frame_count(), c.channels, c.height, c.width};
  if (a.include_latents) {
    ojson frames = ojson::array();
    for (const auto& f : z0.frames) {
      ojson rows = ojson::array();
      for (Eigen::Index ch = 0; ch < f.rows(); ++ch) {
        std::vector<double> row(f.cols());
        for (Eigen::Index i = 0; i < f.cols(); ++i) row[static_cast<std::size_t>(i)] = f(ch, i);
        rows.push_back(row);
      }
      frames.push_back(rows);
    }
    doc["latents"] = frames;
  }
  write_text(a.out, doc.dump(2) + "\n", out);
  return kExitOk;
}

struct TrainArgs {
  grounding::TrainConfig train;
  std::uint64_t model_seed = 0;
  std::string out;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  using namespace grounding;
  ToyConfig c;
  c.seed = a.model_seed;
  ToyDenoiser<double> model(c);
  const auto result = train_toy(model, SyntheticTask(c), a.train);
  if (!a.out.empty()) write_checkpoint(a.out, model_tensors(model));
  ojson doc;
  doc["steps"] = a.train.steps;
  doc["initial_loss"] = result.initial_loss;
  doc["final_loss"] = result.final_loss;
  doc["loss_ratio"] = result.loss_ratio();
  ojson curve = ojson::array();
  for (const auto& [step, loss] : result.eval_losses) curve.push_back({{"step", step}, {"eval_loss", loss}});
  doc["eval_losses"] = curve;
  doc["trainable_parameters"] = result.parameters.trainable;
  doc["frozen_parameters"] = result.parameters.frozen;
  doc["trainable_fraction"] = result.parameters.trainable_fraction();
  doc["gamma"] = model.trainable().gated.gamma;
  out << doc.dump(2) << "\n";
  return kExitOk;
}

void emit_report(const eval::MetricReport& report, const std::string& path, std::ostream& out) {
  if (!path.empty()) write_text(path, eval::report_to_json(report).dump(2) + "\n", out);
  out << eval::report_to_table(report);
}

VideoPlan reversed_layouts(VideoPlan plan) {
  for (auto& scene : plan.scenes) {
    for (auto& e : scene.entities) {
      const std::size_t n = e.keyframes.size();
      for (std::size_t k = 0; k < n / 2; ++k) std::swap(e.keyframes[k].box, e.keyframes[n - 1 - k].box);
    }
  }
  return plan;
}

struct EvalMovementArgs {
  std::string prompts;
  bool oracle = false;
  bool reverse = false;
  std::string detections;
  int last_frame = kDefaultTargetFrames - 1;
  double epsilon = 0.0;
  std::string out;
  BackendOptions backend;
};

int cmd_eval_movement(const EvalMovementArgs& a, std::ostream& out) {
  const auto records = datasets::read_prompt_set(read_text(a.prompts));
  std::vector<eval::MetricItem> items;
  std::optional<eval::RecordedDetector> detector;
  if (!a.detections.empty()) detector = eval::RecordedDetector::from_file(a.detections);
  if (!detector && !a.oracle) throw Error(ErrorCode::kArgError, "eval movement needs --oracle or --detections");
  for (const auto& r : records) {
    if (!r.expected_direction) continue;
    const eval::Direction d = eval::direction_from_string(*r.expected_direction);
    eval::Score s;
    if (detector) {
      s = eval::score_movement(*detector, r.id, a.last_frame, r.target_entity.value_or(""), d, a.epsilon);
    } else {
      auto backend = a.backend.make(r.text);
      planner::PlannerConfig cfg;
      cfg.created_at = "1970-01-01T00:00:00Z";
      VideoPlan plan = planner::compile_plan(r.text, *backend, cfg).plan;
      if (a.reverse) plan = reversed_layouts(std::move(plan));
      s = eval::score_plan_movement(plan, d, r.target_entity.value_or(""), a.epsilon);
    }
    ojson details{{"direction", *r.expected_direction}};
    if (!s.reason.empty()) details["reason"] = s.reason;
    items.push_back({r.id, "movement", double(s.value), details});
  }
  emit_report(eval::aggregate(std::move(items)), a.out, out);
  return kExitOk;
}

int cmd_eval_consistency(const std::string& embeddings, const std::string& plan_path, bool literal,
                         const std::string& dest, std::ostream& out) {
  const auto mode = literal ? eval::ConsistencyMode::kLiteral : eval::ConsistencyMode::kAdjacentMean;
  std::vector<eval::MetricItem> items;
  if (!plan_path.empty()) {
    const VideoPlan plan = load_plan_file(plan_path);
    grounding::EmbeddingCache cache(std::make_shared<grounding::HashEmbeddingProvider>());
    for (const auto& [name, scenes] : plan.consistency.groups) {
      if (scenes.size() < 2) continue;
      std::vector<Eigen::VectorXd> v;
      for (std::size_t i = 0; i < scenes.size(); ++i) v.push_back(cache.get(name).image.values);
      items.push_back({name, "consistency", eval::object_consistency(v, mode), {{"scenes", scenes}}});
    }
  } else {
    const ojson doc = parse_json(read_text(embeddings), embeddings);
    for (const auto& item : doc.at("items")) {
      std::vector<Eigen::VectorXd> v;
      for (const auto& e : item.at("scenes")) {
        const auto values = e.get<std::vector<double>>();
        v.push_back(Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size())));
      }
      items.push_back({item.at("id").get<std::string>(), "consistency", eval::object_consistency(v, mode)});
    }
  }
  emit_report(eval::aggregate(std::move(items)), dest, out);
  return kExitOk;
}

int cmd_eval_skills(const std::string& path, const std::string& dest, std::ostream& out) {
  std::vector<eval::MetricItem> items;
  std::istringstream in(read_text(path));
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const ojson r = ojson::parse(line);
      std::vector<eval::LabeledBox> boxes;
      for (const auto& b : r.at("boxes")) {
        const auto& c = b.at("box");
        boxes.push_back({b.at("label").get<std::string>(),
                         {c.at(0).get<double>(), c.at(1).get<double>(), c.at(2).get<double>(), c.at(3).get<double>()}});
      }
      const std::string skill = r.at("skill").get<std::string>();
      eval::Score s;
      if (skill == "object") {
        s = eval::vpeval_object(boxes, r.at("target").get<std::string>());
      } else if (skill == "count") {
        s = eval::vpeval_count(boxes, r.at("target").get<std::string>(), r.at("k").get<int>());
      } else if (skill == "spatial") {
        s = eval::vpeval_spatial(boxes, r.at("a").get<std::string>(), r.at("relation").get<std::string>(),
                                 r.at("b").get<std::string>());
      } else if (skill == "scale") {
        s = eval::vpeval_scale(boxes, r.at("a").get<std::string>(), r.at("relation").get<std::string>(),
                               r.at("b").get<std::string>());
      } else {
        throw Error(ErrorCode::kParseError, "unknown skill '" + skill + "'", "line " + std::to_string(n));
      }
      ojson details = ojson::object();
      if (!s.reason.empty()) details["reason"] = s.reason;
      items.push_back({r.at("id").get<std::string>(), skill, double(s.value), details});
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kParseError, e.what(), "line " + std::to_string(n));
    }
  }
  emit_report(eval::aggregate(std::move(items)), dest, out);
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Video planning, layout grounding and evaluation tools", "vdgpt"};
  app.require_subcommand(1);

  PlanArgs plan_args;
  auto* plan = app.add_subcommand("plan", "compile a prompt into a video plan");
  plan->add_option("prompt", plan_args.prompt, "source prompt")->required();
  plan->add_option("-o,--out", plan_args.out, "plan file (stdout when omitted)");
  plan->add_option("--report", plan_args.report, "compile report file");
  plan->add_option("--alpha", plan_args.alpha, "static or llm")->check(CLI::IsMember({"static", "llm"}));
  plan->add_option("--static-alpha", plan_args.static_alpha, "guidance ratio for --alpha static");
  plan->add_option("--created-at", plan_args.created_at, "timestamp recorded in the plan");
  plan->add_option("--fanout", plan_args.fanout, "concurrent layout requests");
  plan_args.backend.add_to(plan);

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "check a plan file");
  validate->add_option("plan", validate_path)->required();

  std::string interp_path, interp_out;
  std::optional<int> interp_frames;
  auto* interp = app.add_subcommand("interp", "interpolate keyframes into dense per-frame layouts");
  interp->add_option("plan", interp_path)->required();
  interp->add_option("--frames", interp_frames, "frames per scene (default: the scene's target)");
  interp->add_option("-o,--out", interp_out);

  SampleArgs sample_args;
  auto* sample = app.add_subcommand("sample", "run the toy guided sampler on one scene");
  sample->add_option("plan", sample_args.plan)->required();
  sample->add_option("--checkpoint", sample_args.checkpoint);
  sample->add_option("--scene", sample_args.scene);
  sample->add_option("--steps", sample_args.steps);
  sample->add_option("--alpha", sample_args.alpha, "overrides the plan's ratio");
  sample->add_option("--seed", sample_args.seed);
  sample->add_option("--sampler", sample_args.sampler)->check(CLI::IsMember({"ddim", "plms"}));
  sample->add_flag("!--no-latents", sample_args.include_latents, "omit latent values from the output");
  sample->add_option("-o,--out", sample_args.out);

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "train the grounding layers on the synthetic task");
  train->add_option("--steps", train_args.train.steps);
  train->add_option("--batch", train_args.train.batch);
  train->add_option("--lr", train_args.train.learning_rate);
  train->add_option("--seed", train_args.train.seed);
  train->add_option("--model-seed", train_args.model_seed);
  train->add_option("--eval-samples", train_args.train.eval_samples);
  train->add_option("-o,--out", train_args.out, "checkpoint file");

  auto* ev = app.add_subcommand("eval", "compute metrics");
  ev->require_subcommand(1);
  EvalMovementArgs mv;
  auto* movement = ev->add_subcommand("movement", "movement direction accuracy");
  movement->add_option("--prompts", mv.prompts, "prompt-set file")->required();
  movement->add_flag("--oracle", mv.oracle, "plan each prompt and detect with the layout oracle");
  movement->add_flag("--reverse-layouts", mv.reverse, "reverse every planned track (adversarial check)");
  movement->add_option("--detections", mv.detections, "detection exchange file");
  movement->add_option("--last-frame", mv.last_frame);
  movement->add_option("--epsilon", mv.epsilon);
  movement->add_option("-o,--out", mv.out, "report file");
  mv.backend.add_to(movement);
  std::string emb_file, emb_plan, emb_out;
  bool literal = false;
  auto* consistency = ev->add_subcommand("consistency", "cross-scene object consistency");
  consistency->add_option("--embeddings", emb_file, "{\"items\": [{\"id\", \"scenes\": [[...], ...]}]}");
  consistency->add_option("--plan", emb_plan, "score the plan's consistency groups with shared embeddings");
  consistency->add_flag("--literal", literal, "divide by the number of scenes instead of pairs");
  consistency->add_option("-o,--out", emb_out);
  std::string skills_file, skills_out;
  auto* skills = ev->add_subcommand("skills", "object / count / spatial / scale checks");
  skills->add_option("--items", skills_file, "JSONL of skill checks with labelled boxes")->required();
  skills->add_option("-o,--out", skills_out);

  auto* ds = app.add_subcommand("datasets", "generate prompt sets");
  ds->require_subcommand(1);
  std::string captions = asset_dir() + "/datasets/actionbench_seed_captions.txt", ds_out;
  auto* actionbench = ds->add_subcommand("actionbench", "direction-swapped movement prompts");
  actionbench->add_option("--captions", captions);
  actionbench->add_option("-o,--out", ds_out);
  std::string templates = asset_dir() + "/datasets/coref_episodes.json";
  std::string entities = asset_dir() + "/datasets/entities.txt";
  std::string pronouns = asset_dir() + "/datasets/pronouns.json";
  auto* coref = ds->add_subcommand("coref", "coreference episodes");
  coref->add_option("--templates", templates);
  coref->add_option("--entities", entities);
  coref->add_option("--pronouns", pronouns);
  coref->add_option("-o,--out", ds_out);
  std::string task;
  int n_scenes = 4;
  auto* hirest = ds->add_subcommand("hirest", "step-suffixed scene prompts");
  hirest->add_option("--prompt", task)->required();
  hirest->add_option("--scenes", n_scenes);
  hirest->add_option("-o,--out", ds_out);

  std::string host = "127.0.0.1", store = "vdgpt-store";
  int port = 8080;
  BackendOptions serve_backend;
  auto* serve = app.add_subcommand("serve", "HTTP API for plan editing");
  serve->add_option("--host", host);
  serve->add_option("--port", port);
  serve->add_option("--store", store, "plan store directory");
  serve_backend.add_to(serve);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n";
    return kExitInvalid;
  }

  try {
    if (*plan) return cmd_plan(plan_args, out, err);
    if (*validate) return cmd_validate(validate_path, out);
    if (*interp) return cmd_interp(interp_path, interp_frames, interp_out, out);
    if (*sample) return cmd_sample(sample_args, out);
    if (*train) return cmd_train(train_args, out);
    if (*movement) return cmd_eval_movement(mv, out);
    if (*consistency) {
      if (emb_file.empty() == emb_plan.empty()) throw Error(ErrorCode::kArgError, "give --embeddings or --plan");
      return cmd_eval_consistency(emb_file, emb_plan, literal, emb_out, out);
    }
    if (*skills) return cmd_eval_skills(skills_file, skills_out, out);
    if (*actionbench) {
      std::vector<Diagnostic> diags;
      const auto prompts = datasets::gen_actionbench_direction(datasets::read_lines(captions), &diags);
      for (const auto& d : diags) err << d.code << ": " << d.message << "\n";
      write_text(ds_out, datasets::write_prompt_set(datasets::to_records(prompts)), out);
      return kExitOk;
    }
    if (*coref) {
      const auto episodes = datasets::gen_coref_sv(datasets::load_episode_templates(templates),
                                                   datasets::read_lines(entities), datasets::load_pronoun_table(pronouns));
      write_text(ds_out, datasets::write_prompt_set(datasets::to_records(episodes)), out);
      return kExitOk;
    }
    if (*hirest) {
      std::vector<datasets::PromptRecord> records;
      const auto prompts = datasets::hirest_scene_prompts(task, n_scenes);
      for (std::size_t i = 0; i < prompts.size(); ++i) {
        records.push_back({"hirest-" + std::to_string(i + 1), prompts[i], {}, {}, {}, {}});
      }
      write_text(ds_out, datasets::write_prompt_set(records), out);
      return kExitOk;
    }
    if (*serve) {
      service::ServiceConfig cfg;
      cfg.store_dir = store;
      cfg.backend = [serve_backend] { return serve_backend.make(); };
      service::PlanService svc(cfg);
      service::HttpServer server(svc, host, port);
      err << "serving on http://" << host << ":" << port << "\n";
      server.run();
      return kExitOk;
    }
  } catch (const Error& e) {
    err << "error: " << e.what();
    if (!e.path().empty()) err << " (at " << e.path() << ")";
    err << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitInternal;
}

}  // namespace vdgpt::cli
