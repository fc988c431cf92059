#include <cstdlib>

#include <httplib.h>
#include <json.hpp>

#include "vdgpt/llm_backend.hpp"

namespace vdgpt::planner {

std::string build_chat_request(const std::string& model, const std::string& prompt,
                               const DecodingParams& params) {
  nlohmann::ordered_json doc;
  doc["model"] = model;
  doc["messages"] = nlohmann::ordered_json::array({{{"role", "user"}, {"content", prompt}}});
  doc["temperature"] = params.temperature;
  doc["max_tokens"] = params.max_tokens;
  return doc.dump();
}

std::string parse_chat_response(const std::string& body) {
  try {
    const auto doc = nlohmann::json::parse(body);
    if (doc.contains("error")) throw BackendError("chat API error: " + doc["error"].dump());
    return doc.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw BackendError(std::string("malformed chat response: ") + e.what());
  }
}

HttpChatBackend::HttpChatBackend(HttpBackendConfig config) : config_(std::move(config)) {
  if (const char* key = std::getenv(config_.api_key_env.c_str())) api_key_ = key;
}

std::string HttpChatBackend::complete(const std::string& prompt, const DecodingParams& params) {
  httplib::Client client(config_.base_url);
  if (!client.is_valid()) throw BackendError("unsupported backend URL " + config_.base_url);
  client.set_connection_timeout(config_.timeout_seconds);
  client.set_read_timeout(config_.timeout_seconds);
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
  auto res = client.Post(config_.path, headers, build_chat_request(config_.model, prompt, params),
                         "application/json");
  if (!res) throw BackendError("request failed: " + httplib::to_string(res.error()));
  if (res->status != 200) {
    throw BackendError("chat API returned HTTP " + std::to_string(res->status) + ": " + res->body);
  }
  return parse_chat_response(res->body);
}

}  // namespace vdgpt::planner
