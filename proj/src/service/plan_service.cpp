#include <condition_variable>
#include <regex>

#include "vdgpt/eval.hpp"
#include "vdgpt/grounding/embedding.hpp"
#include "vdgpt/layout.hpp"
#include "vdgpt/plan_json.hpp"
#include "vdgpt/service.hpp"

namespace vdgpt::service {

namespace {

Response json_response(int status, const ojson& doc) { return {status, doc.dump(2) + "\n"}; }

Response error_response(int status, const std::string& code, const std::string& message,
                        const std::string& path = {}) {
  ojson doc;
  doc["error"] = code;
  doc["message"] = message;
  if (!path.empty()) doc["path"] = path;
  return json_response(status, doc);
}

Response not_found(const std::string& what) { return error_response(404, "NOT_FOUND", what + " not found"); }

bool valid_id(const std::string& id) {
  static const std::regex re("[A-Za-z0-9_.-]{1,128}");
  return std::regex_match(id, re) && id != "." && id != "..";
}

std::optional<eval::Direction> direction_in(const std::string& text) {
  std::optional<eval::Direction> found;
  std::size_t at = std::string::npos;
  for (eval::Direction d : eval::kAllDirections) {
    const std::size_t p = text.find(eval::direction_phrase(d));
    if (p < at) {
      at = p;
      found = d;
    }
  }
  return found;
}

}  // namespace

std::string_view to_string(JobState s) {
  switch (s) {
    case JobState::kQueued: return "queued";
    case JobState::kRunning: return "running";
    case JobState::kSucceeded: return "succeeded";
    case JobState::kFailed: return "failed";
    case JobState::kCancelled: return "cancelled";
  }
  return "?";
}

struct PlanService::Job {
  std::string id;
  mutable std::mutex mutex;
  mutable std::condition_variable changed;
  JobState state = JobState::kQueued;
  std::string plan_id;
  std::optional<ojson> report;
  std::string error;
  std::jthread thread;

  void finish(JobState s) {
    {
      std::lock_guard lock(mutex);
      state = s;
    }
    changed.notify_all();
  }
};

PlanService::PlanService(ServiceConfig config) : config_(std::move(config)), store_(config_.store_dir) {
  if (!config_.backend) {
    config_.backend = [] { return std::make_shared<planner::RuleBasedMockBackend>(); };
  }
}

PlanService::~PlanService() {
  std::map<std::string, std::shared_ptr<Job>> jobs;
  {
    std::lock_guard lock(jobs_mutex_);
    jobs.swap(jobs_);
  }
  for (auto& [id, job] : jobs) job->thread.request_stop();
  for (auto& [id, job] : jobs)
    if (job->thread.joinable()) job->thread.join();
}

Response PlanService::get_plan(const std::string& id) const {
  if (!valid_id(id)) return error_response(400, "BAD_ID", "invalid plan id");
  const auto entry = store_.get(id);
  if (!entry) return not_found("plan " + id);
  Response r{200, entry->bytes};
  r.headers["ETag"] = "\"" + std::to_string(entry->version) + "\"";
  r.headers["X-Plan-Version"] = std::to_string(entry->version);
  return r;
}

Response PlanService::put_plan(const std::string& id, const std::string& body, std::optional<int> if_match) {
  if (!valid_id(id)) return error_response(400, "BAD_ID", "invalid plan id");
  try {
    deserialize_plan(body);
  } catch (const Error& e) {
    return error_response(400, std::string(vdgpt::to_string(e.code())), e.what(), e.path());
  }
  std::optional<int> conflict;
  const int version = store_.put(id, body, if_match, &conflict);
  if (conflict) {
    ojson doc;
    doc["error"] = "VERSION_CONFLICT";
    doc["message"] = "plan changed since version " + std::to_string(*if_match);
    doc["current_version"] = *conflict;
    return json_response(409, doc);
  }
  Response r = json_response(200, ojson{{"id", id}, {"version", version}});
  r.headers["ETag"] = "\"" + std::to_string(version) + "\"";
  r.headers["X-Plan-Version"] = std::to_string(version);
  return r;
}

Response PlanService::list_plans() const {
  ojson doc = ojson::array();
  for (const auto& [id, version] : store_.list()) doc.push_back({{"id", id}, {"version", version}});
  return json_response(200, ojson{{"plans", doc}});
}

Response PlanService::validate(const std::string& id) const {
  const auto entry = valid_id(id) ? store_.get(id) : std::nullopt;
  if (!entry) return not_found("plan " + id);
  return json_response(200, report_to_json(validate_plan(deserialize_plan(entry->bytes))));
}

Response PlanService::interpolate(const std::string& id, const std::string& body) const {
  const auto entry = valid_id(id) ? store_.get(id) : std::nullopt;
  if (!entry) return not_found("plan " + id);
  std::optional<int> frames;
  if (body.find_first_not_of(" \t\r\n") != std::string::npos) {
    try {
      const auto req = ojson::parse(body);
      if (req.contains("frames")) frames = req["frames"].get<int>();
    } catch (const nlohmann::json::exception& e) {
      return error_response(400, "PARSE_ERROR", e.what());
    }
    if (frames && *frames < 1) return error_response(400, "ARG_ERROR", "frames must be positive", "frames");
  }
  try {
    return json_response(200, layout::dense_to_json(layout::densify_plan(deserialize_plan(entry->bytes), frames)));
  } catch (const Error& e) {
    return error_response(400, std::string(vdgpt::to_string(e.code())), e.what(), e.path());
  }
}

Response PlanService::metrics_preview(const std::string& id) const {
  const auto entry = valid_id(id) ? store_.get(id) : std::nullopt;
  if (!entry) return not_found("plan " + id);
  VideoPlan plan;
  std::vector<layout::DenseLayout> dense;
  try {
    plan = deserialize_plan(entry->bytes);
    dense = layout::densify_plan(plan);
  } catch (const Error& e) {
    return error_response(400, std::string(vdgpt::to_string(e.code())), e.what(), e.path());
  }
  std::vector<eval::MetricItem> items;
  ojson doc;
  doc["plan_id"] = id;
  const auto direction = direction_in(plan.source_prompt);
  doc["direction"] = direction ? ojson(std::string(eval::to_string(*direction))) : ojson(nullptr);
  doc["movement"] = ojson::array();
  doc["objects"] = ojson::array();
  for (std::size_t s = 0; s < plan.scenes.size(); ++s) {
    const eval::LayoutOracleDetector oracle(dense[s]);
    const auto first = dense[s].frames.empty() ? std::vector<layout::EntityBox>{} : dense[s].frames.front();
    for (const auto& e : plan.scenes[s].entities) {
      const std::string item_id = "scene" + std::to_string(s + 1) + "/" + e.id;
      const eval::Score present = eval::vpeval_object(eval::labeled_boxes(first), e.name);
      doc["objects"].push_back({{"scene", s + 1}, {"entity", e.id}, {"score", present.value}});
      items.push_back({item_id, "object", double(present.value)});
      if (!direction) continue;
      const eval::Score m = eval::score_movement(oracle, "", -1, e.id, *direction);
      ojson row{{"scene", s + 1}, {"entity", e.id}, {"score", m.value}};
      if (!m.reason.empty()) row["reason"] = m.reason;
      doc["movement"].push_back(row);
      items.push_back({item_id, "movement", double(m.value)});
    }
  }
  // Embeddings come from one shared cache, the same way grounding tokens do.
  grounding::EmbeddingCache cache(std::make_shared<grounding::HashEmbeddingProvider>());
  doc["consistency"] = ojson::array();
  for (const auto& [name, scenes] : plan.consistency.groups) {
    if (scenes.size() < 2) continue;
    std::vector<Eigen::VectorXd> embeddings;
    for (std::size_t i = 0; i < scenes.size(); ++i) embeddings.push_back(cache.get(name).image.values);
    const double score = eval::object_consistency(embeddings);
    doc["consistency"].push_back({{"group", name}, {"scenes", scenes}, {"score", score}});
    items.push_back({name, "consistency", score});
  }
  doc["report"] = eval::report_to_json(eval::aggregate(std::move(items)));
  return json_response(200, doc);
}

Response PlanService::start_compile(const std::string& body) {
  std::string prompt, target;
  bool dynamic_alpha = config_.planner.dynamic_alpha;
  try {
    const auto req = ojson::parse(body);
    prompt = req.at("prompt").get<std::string>();
    dynamic_alpha = req.value("dynamic_alpha", dynamic_alpha);
    target = req.value("plan_id", std::string());
  } catch (const nlohmann::json::exception& e) {
    return error_response(400, "PARSE_ERROR", e.what());
  }
  if (prompt.empty()) return error_response(400, "ARG_ERROR", "prompt is empty", "prompt");
  if (!target.empty() && !valid_id(target)) return error_response(400, "BAD_ID", "invalid plan id", "plan_id");
  auto job = std::make_shared<Job>();
  job->id = "job-" + std::to_string(next_job_++);
  if (target.empty()) target = "plan-" + job->id.substr(4);
  job->plan_id = target;
  {
    std::lock_guard lock(jobs_mutex_);
    jobs_[job->id] = job;
  }
  auto backend = config_.backend();
  planner::PlannerConfig cfg = config_.planner;
  cfg.dynamic_alpha = dynamic_alpha;
  Job* raw = job.get();
  job->thread = std::jthread([this, raw, backend, cfg, prompt](std::stop_token stop) mutable {
    {
      std::lock_guard lock(raw->mutex);
      if (stop.stop_requested()) {
        raw->state = JobState::kCancelled;
        raw->changed.notify_all();
        return;
      }
      raw->state = JobState::kRunning;
    }
    cfg.stop = stop;
    try {
      const auto result = planner::compile_plan(prompt, *backend, cfg);
      store_.put(raw->plan_id, serialize_plan(result.plan), std::nullopt);
      {
        std::lock_guard lock(raw->mutex);
        raw->report = planner::report_to_json(result.report);
      }
      raw->finish(JobState::kSucceeded);
    } catch (const planner::CompileFailed& e) {
      {
        std::lock_guard lock(raw->mutex);
        raw->report = planner::report_to_json(e.report());
        raw->error = e.what();
      }
      raw->finish(JobState::kFailed);
    } catch (const Error& e) {
      {
        std::lock_guard lock(raw->mutex);
        raw->error = e.what();
      }
      raw->finish(e.code() == ErrorCode::kCancelled ? JobState::kCancelled : JobState::kFailed);
    } catch (const std::exception& e) {
      {
        std::lock_guard lock(raw->mutex);
        raw->error = e.what();
      }
      raw->finish(JobState::kFailed);
    }
  });
  Response r = json_response(202, ojson{{"job_id", job->id}, {"plan_id", target}});
  r.headers["Location"] = "/jobs/" + job->id;
  return r;
}

std::shared_ptr<PlanService::Job> PlanService::find_job(const std::string& id) const {
  std::lock_guard lock(jobs_mutex_);
  auto it = jobs_.find(id);
  return it == jobs_.end() ? nullptr : it->second;
}

Response PlanService::job(const std::string& id) const {
  auto job = find_job(id);
  if (!job) return not_found("job " + id);
  std::lock_guard lock(job->mutex);
  ojson doc;
  doc["job_id"] = job->id;
  doc["state"] = std::string(to_string(job->state));
  if (job->state == JobState::kSucceeded) doc["plan_id"] = job->plan_id;
  if (job->report) doc["report"] = *job->report;
  if (!job->error.empty()) doc["error"] = job->error;
  return json_response(200, doc);
}

Response PlanService::cancel_job(const std::string& id) {
  auto job = find_job(id);
  if (!job) return not_found("job " + id);
  job->thread.request_stop();
  Response r = this->job(id);
  r.status = 202;
  return r;
}

JobState PlanService::wait_job(const std::string& id) const {
  auto job = find_job(id);
  if (!job) throw Error(ErrorCode::kArgError, "unknown job " + id);
  std::unique_lock lock(job->mutex);
  job->changed.wait(lock, [&] { return job->state != JobState::kQueued && job->state != JobState::kRunning; });
  return job->state;
}

}  // namespace vdgpt::service
