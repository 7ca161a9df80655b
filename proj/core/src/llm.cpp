#include "editroom/llm.hpp"

#include <chrono>
#include <cstdlib>
#include <thread>

// Eigen (via json_io.hpp) must precede httplib: <resolv.h> defines a `_res` macro.
#include "json_io.hpp"
#include "httplib.h"

namespace editroom {

using detail::json;

namespace {

std::string env_or_empty(const char* name) {
  const char* v = std::getenv(name);
  return v ? std::string(v) : std::string();
}

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ValidationError("LLM url must include a scheme: '" + url + "'");
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

void LlmConfig::validate() const {
  if (url.empty()) throw ValidationError("LLM url is not configured (EDITROOM_LLM_URL)");
  if (!(timeout_seconds > 0.0)) throw ValidationError("LLM timeout must be positive");
  if (retries < 0) throw ValidationError("LLM retry count must be non-negative");
  split_url(url);
}

LlmConfig LlmConfig::from_env() {
  LlmConfig c;
  c.url = env_or_empty("EDITROOM_LLM_URL");
  c.model = env_or_empty("EDITROOM_LLM_MODEL");
  return c;
}

std::string chat_request_body(const std::string& model, const std::vector<ChatMessage>& messages,
                              double temperature) {
  json msgs = json::array();
  for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
  json body = {{"messages", msgs}, {"temperature", temperature}};
  if (!model.empty()) body["model"] = model;
  return body.dump();
}

std::string chat_response_content(const std::string& body) {
  json j;
  try {
    j = json::parse(body);
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw LlmError(std::string("malformed chat-completions response: ") + e.what(), false);
  }
}

HttpLlmClient::HttpLlmClient(LlmConfig config) : config_(std::move(config)) { config_.validate(); }

std::string HttpLlmClient::complete(const std::vector<ChatMessage>& messages) {
  const SplitUrl target = split_url(config_.url);
  const std::string body = chat_request_body(config_.model, messages, config_.temperature);
  httplib::Headers headers;
  const std::string key = env_or_empty(config_.api_key_env.c_str());
  if (!key.empty()) headers.emplace("Authorization", "Bearer " + key);

  const auto secs = static_cast<time_t>(config_.timeout_seconds);
  const auto usecs = static_cast<time_t>((config_.timeout_seconds - static_cast<double>(secs)) * 1e6);

  for (int attempt = 0;; ++attempt) {
    httplib::Client cli(target.origin);
    cli.set_connection_timeout(secs, usecs);
    cli.set_read_timeout(secs, usecs);
    cli.set_write_timeout(secs, usecs);
    auto res = cli.Post(target.path, headers, body, "application/json");

    std::string error;
    bool retryable = true;
    int status = 0;
    if (!res) {
      error = "LLM request failed: " + httplib::to_string(res.error());
    } else {
      status = res->status;
      if (status == 200) return chat_response_content(res->body);
      retryable = status == 429 || status >= 500;
      error = "LLM endpoint returned HTTP " + std::to_string(status);
    }
    if (!retryable || attempt >= config_.retries) throw LlmError(error, retryable, status);
    std::this_thread::sleep_for(std::chrono::milliseconds(200 << attempt));
  }
}

CannedLlmClient::CannedLlmClient(std::vector<std::string> replies) : replies_(replies.begin(), replies.end()) {}

CannedLlmClient::CannedLlmClient(Responder responder) : responder_(std::move(responder)) {}

std::string CannedLlmClient::complete(const std::vector<ChatMessage>& messages) {
  std::lock_guard lock(mu_);
  requests_.push_back(messages);
  if (responder_) return responder_(messages);
  if (replies_.empty()) throw LlmError("canned client has no replies left", false);
  std::string r = std::move(replies_.front());
  replies_.pop_front();
  return r;
}

std::vector<std::vector<ChatMessage>> CannedLlmClient::requests() const {
  std::lock_guard lock(mu_);
  return requests_;
}

}  // namespace editroom
