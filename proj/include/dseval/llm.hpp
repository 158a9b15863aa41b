#pragma once

#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace dseval {

struct ChatMessage {
  std::string role;  // system, user, assistant
  std::string content;
  bool operator==(const ChatMessage&) const = default;
};

struct TokenUsage {
  long prompt = 0;
  long completion = 0;
  bool operator==(const TokenUsage&) const = default;
};

struct ChatCompletion {
  std::string text;
  std::optional<TokenUsage> usage;
};

/// Chat-completion endpoint. Transport failures throw TransportError.
class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual ChatCompletion complete(const std::vector<ChatMessage>& messages) = 0;
  virtual std::string name() const = 0;
  virtual bool concurrent_safe() const { return true; }
};

/// Replays canned completions in order. Every prompt is kept for inspection.
/// Usage is counted in whitespace-separated words.
class StubChatClient : public ChatClient {
 public:
  explicit StubChatClient(std::vector<std::string> responses, bool repeat_last = false);
  /// {"responses": [...], "repeat_last": bool} or a bare array of strings.
  static std::unique_ptr<StubChatClient> from_json(const nlohmann::json& j);

  ChatCompletion complete(const std::vector<ChatMessage>& messages) override;
  std::string name() const override { return "stub"; }
  bool concurrent_safe() const override { return false; }

  const std::vector<std::vector<ChatMessage>>& prompts() const { return prompts_; }
  std::size_t calls() const { return prompts_.size(); }

 private:
  std::vector<std::string> responses_;
  bool repeat_last_;
  std::vector<std::vector<ChatMessage>> prompts_;
  std::mutex mu_;
};

/// OpenAI-compatible /chat/completions endpoint.
class HttpChatClient : public ChatClient {
 public:
  struct Config {
    std::string base_url = "https://api.openai.com/v1";
    std::string model;
    double temperature = 0.0;
    std::optional<int> max_tokens;
    std::string api_key_env = "OPENAI_API_KEY";  // credential is read from this variable
    double timeout = 120.0;
  };
  explicit HttpChatClient(Config cfg);
  static Config config_from_json(const nlohmann::json& j);

  ChatCompletion complete(const std::vector<ChatMessage>& messages) override;
  std::string name() const override { return cfg_.model; }

 private:
  Config cfg_;
};

/// "stub:FILE" (canned JSON) or "openai:FILE" (HttpChatClient config JSON).
std::unique_ptr<ChatClient> make_chat_client(const std::string& spec);

/// First fenced code block of a reply (```python ... ``` or ``` ... ```); the
/// whole reply when there is none.
std::string extract_code_block(const std::string& reply);

}  // namespace dseval
