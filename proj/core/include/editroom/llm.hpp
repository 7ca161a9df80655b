#pragma once

#include <deque>
#include <functional>
#include <mutex>
#include <string>
#include <vector>

#include "editroom/error.hpp"

namespace editroom {

struct ChatMessage {
  std::string role;  // "system" | "user" | "assistant"
  std::string content;
};

/// Transport or protocol failure talking to a language-model endpoint.
class LlmError : public Error {
public:
  LlmError(std::string message, bool retryable, int status = 0)
      : Error(std::move(message)), retryable_(retryable), status_(status) {}
  bool retryable() const noexcept { return retryable_; }
  /// HTTP status, 0 when no response was received.
  int status() const noexcept { return status_; }

private:
  bool retryable_;
  int status_;
};

class LlmClient {
public:
  virtual ~LlmClient() = default;
  /// Returns the assistant reply text. Throws LlmError.
  virtual std::string complete(const std::vector<ChatMessage>& messages) = 0;
};

struct LlmConfig {
  /// Full chat-completions endpoint, e.g. http://localhost:8000/v1/chat/completions
  std::string url;
  std::string model;
  /// Name of the environment variable holding the bearer token.
  std::string api_key_env = "EDITROOM_LLM_KEY";
  double timeout_seconds = 60.0;
  int retries = 2;
  double temperature = 0.0;

  /// Throws ValidationError.
  void validate() const;
  /// Reads EDITROOM_LLM_URL and EDITROOM_LLM_MODEL; missing URL leaves `url` empty.
  static LlmConfig from_env();
};

/// Generic chat-completions POST ({model, messages}) with retries on
/// connection errors, 429 and 5xx responses.
class HttpLlmClient : public LlmClient {
public:
  explicit HttpLlmClient(LlmConfig config);
  std::string complete(const std::vector<ChatMessage>& messages) override;
  const LlmConfig& config() const { return config_; }

private:
  LlmConfig config_;
};

/// Offline client replaying fixed replies; records every request.
class CannedLlmClient : public LlmClient {
public:
  using Responder = std::function<std::string(const std::vector<ChatMessage>&)>;

  CannedLlmClient() = default;
  explicit CannedLlmClient(std::vector<std::string> replies);
  explicit CannedLlmClient(Responder responder);

  std::string complete(const std::vector<ChatMessage>& messages) override;
  std::vector<std::vector<ChatMessage>> requests() const;

private:
  mutable std::mutex mu_;
  std::deque<std::string> replies_;
  Responder responder_;
  std::vector<std::vector<ChatMessage>> requests_;
};

/// Request body for a chat-completions endpoint.
std::string chat_request_body(const std::string& model, const std::vector<ChatMessage>& messages, double temperature);
/// Extracts choices[0].message.content. Throws LlmError (not retryable).
std::string chat_response_content(const std::string& body);

}  // namespace editroom
