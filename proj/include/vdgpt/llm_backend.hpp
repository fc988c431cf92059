#pragma once

// Pluggable text-completion backends used by the planner.

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "vdgpt/error.hpp"
#include "vdgpt/plan.hpp"

namespace vdgpt::planner {

struct DecodingParams {
  double temperature = 0.0;
  int max_tokens = 2048;
};

/// Thrown by backends for transport-level failures; the planner retries these.
class BackendError : public Error {
 public:
  explicit BackendError(const std::string& message) : Error(ErrorCode::kBackendError, message) {}
};

class LlmBackend {
 public:
  virtual ~LlmBackend() = default;
  virtual std::string complete(const std::string& prompt, const DecodingParams& params) = 0;
  virtual std::string model_id() const = 0;
  /// False when complete() must not be called from several threads at once.
  virtual bool concurrent_safe() const { return true; }
};

// ---------------------------------------------------------------------------
// Rule-based mock

struct MockEntity {
  std::string name;
  std::string description;
  BoundingBox start{0.3, 0.3, 0.7, 0.7};
  BoundingBox end{0.3, 0.3, 0.7, 0.7};
};

struct MockScene {
  std::string description;
  std::string background;
  std::vector<MockEntity> entities;
};

struct MockScript {
  std::vector<MockScene> scenes;
  std::optional<double> alpha;
};

/// Deterministic backend that recognizes the three planner prompts and answers
/// them from a script. Unscripted prompts are handled by simple rules: a
/// "<something> from left to right" style prompt yields one scene with the
/// object moving in that direction, anything else yields one static entity.
class RuleBasedMockBackend : public LlmBackend {
 public:
  RuleBasedMockBackend() = default;

  void add_script(const std::string& source_prompt, MockScript script);
  std::string complete(const std::string& prompt, const DecodingParams& params) override;
  std::string model_id() const override { return "mock-rule-based"; }

  /// Script that the mock would use for `source_prompt`.
  MockScript script_for(const std::string& source_prompt) const;

  static std::string step1_response(const MockScript& script);
  static std::string step2_response(const MockScene& scene, int num_keyframes);

 private:
  mutable std::mutex mutex_;
  std::map<std::string, MockScript> scripts_;
};

/// The chef/oven scenario: chef in scenes 1-4, oven only in scene 1.
MockScript chef_oven_script();

/// Wraps a backend and lets a hook replace responses (fault injection).
class FaultInjectingBackend : public LlmBackend {
 public:
  using Hook = std::function<std::optional<std::string>(const std::string& prompt)>;

  FaultInjectingBackend(std::shared_ptr<LlmBackend> inner, Hook hook)
      : inner_(std::move(inner)), hook_(std::move(hook)) {}

  std::string complete(const std::string& prompt, const DecodingParams& params) override;
  std::string model_id() const override { return inner_->model_id(); }
  bool concurrent_safe() const override { return inner_->concurrent_safe(); }

 private:
  std::shared_ptr<LlmBackend> inner_;
  Hook hook_;
};

// ---------------------------------------------------------------------------
// Replay files: JSON Lines, one {"prompt": ..., "response": ...} per line.

struct ReplayRecord {
  std::string prompt;
  std::string response;
};

std::vector<ReplayRecord> load_replay_file(const std::string& path);
void append_replay_record(const std::string& path, const ReplayRecord& record);

/// Answers each prompt with the first unused recorded response for that exact
/// prompt text. An unknown prompt is a BackendError.
class ReplayBackend : public LlmBackend {
 public:
  explicit ReplayBackend(std::vector<ReplayRecord> records, std::string model = "replay");
  static std::shared_ptr<ReplayBackend> from_file(const std::string& path);

  std::string complete(const std::string& prompt, const DecodingParams& params) override;
  std::string model_id() const override { return model_; }

 private:
  std::mutex mutex_;
  std::map<std::string, std::vector<std::string>> queue_;
  std::map<std::string, std::size_t> cursor_;
  std::string model_;
};

/// Records every exchange of the wrapped backend into a replay file.
class RecordingBackend : public LlmBackend {
 public:
  RecordingBackend(std::shared_ptr<LlmBackend> inner, std::string path)
      : inner_(std::move(inner)), path_(std::move(path)) {}

  std::string complete(const std::string& prompt, const DecodingParams& params) override;
  std::string model_id() const override { return inner_->model_id(); }
  bool concurrent_safe() const override { return inner_->concurrent_safe(); }

 private:
  std::shared_ptr<LlmBackend> inner_;
  std::string path_;
  std::mutex mutex_;
};

// ---------------------------------------------------------------------------
// OpenAI-compatible chat completions

struct HttpBackendConfig {
  std::string base_url = "https://api.openai.com";
  std::string path = "/v1/chat/completions";
  std::string model = "gpt-4-0613";
  std::string api_key_env = "VDGPT_API_KEY";
  int timeout_seconds = 120;
};

std::string build_chat_request(const std::string& model, const std::string& prompt,
                               const DecodingParams& params);
/// Extracts choices[0].message.content; throws BackendError on anything else.
std::string parse_chat_response(const std::string& body);

class HttpChatBackend : public LlmBackend {
 public:
  explicit HttpChatBackend(HttpBackendConfig config);

  std::string complete(const std::string& prompt, const DecodingParams& params) override;
  std::string model_id() const override { return config_.model; }

 private:
  HttpBackendConfig config_;
  std::string api_key_;
};

}  // namespace vdgpt::planner
