#pragma once

// Plan store and HTTP API: plan CRUD with optimistic versions, validation,
// interpolation, oracle metric previews and cancellable compile jobs.

#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "vdgpt/planner.hpp"

namespace vdgpt::service {

/// Plans kept as content-addressed files (objects/<fnv1a64 hex>.json) plus an
/// index.json mapping id -> {version, object}; the index is replaced by
/// atomic rename.
class PlanStore {
 public:
  explicit PlanStore(std::filesystem::path root);

  struct Entry {
    std::string bytes;
    int version = 0;
  };

  std::optional<Entry> get(const std::string& id) const;
  /// Stores `bytes` as the new head of `id`. When `expected_version` is set
  /// and differs from the current version (0 for a new id) nothing is written
  /// and the current version is returned in `conflict`.
  int put(const std::string& id, const std::string& bytes, std::optional<int> expected_version,
          std::optional<int>* conflict = nullptr);
  std::vector<std::pair<std::string, int>> list() const;

 private:
  void load_index();
  void save_index() const;

  std::filesystem::path root_;
  mutable std::mutex mutex_;
  struct IndexEntry {
    std::string object;
    int version = 0;
  };
  std::map<std::string, IndexEntry> index_;
};

struct Response {
  Response() = default;
  Response(int s, std::string b) : status(s), body(std::move(b)) {}

  int status = 200;
  std::string body;
  std::string content_type = "application/json";
  std::map<std::string, std::string> headers;
};

enum class JobState { kQueued, kRunning, kSucceeded, kFailed, kCancelled };
std::string_view to_string(JobState s);

using BackendFactory = std::function<std::shared_ptr<planner::LlmBackend>()>;

struct ServiceConfig {
  std::filesystem::path store_dir = "vdgpt-store";
  BackendFactory backend;
  planner::PlannerConfig planner;
};

class PlanService {
 public:
  explicit PlanService(ServiceConfig config);
  ~PlanService();

  Response get_plan(const std::string& id) const;
  /// `if_match` is the client's version; absent means last writer wins.
  Response put_plan(const std::string& id, const std::string& body, std::optional<int> if_match);
  Response list_plans() const;
  Response validate(const std::string& id) const;
  Response interpolate(const std::string& id, const std::string& body) const;
  Response metrics_preview(const std::string& id) const;

  /// {"prompt": ..., "dynamic_alpha": bool, "plan_id": optional target id}.
  Response start_compile(const std::string& body);
  Response job(const std::string& id) const;
  Response cancel_job(const std::string& id);

  /// Blocks until the job leaves queued/running; returns the final state.
  JobState wait_job(const std::string& id) const;

 private:
  struct Job;
  std::shared_ptr<Job> find_job(const std::string& id) const;

  ServiceConfig config_;
  PlanStore store_;
  mutable std::mutex jobs_mutex_;
  std::map<std::string, std::shared_ptr<Job>> jobs_;
  std::atomic<int> next_job_{1};
};

/// Serves the API on host:port until stop() (or the process ends).
class HttpServer {
 public:
  HttpServer(PlanService& service, std::string host, int port);
  ~HttpServer();

  /// Binds and starts serving on a background thread; returns the bound port.
  int start();
  /// Binds and serves on the calling thread.
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace vdgpt::service
