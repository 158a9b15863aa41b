#include "dseval/llm.hpp"

#include <cstdlib>
#include <sstream>

#include <curl/curl.h>

#include "dseval/errors.hpp"
#include "dseval/util.hpp"

namespace dseval {

namespace {

long word_count(const std::string& s) {
  std::istringstream in(s);
  long n = 0;
  std::string w;
  while (in >> w) ++n;
  return n;
}

size_t collect(char* data, size_t size, size_t nmemb, void* out) {
  static_cast<std::string*>(out)->append(data, size * nmemb);
  return size * nmemb;
}

}  // namespace

StubChatClient::StubChatClient(std::vector<std::string> responses, bool repeat_last)
    : responses_(std::move(responses)), repeat_last_(repeat_last) {}

std::unique_ptr<StubChatClient> StubChatClient::from_json(const nlohmann::json& j) {
  if (j.is_array()) return std::make_unique<StubChatClient>(j.get<std::vector<std::string>>());
  if (!j.is_object() || !j.contains("responses")) throw ConfigError("stub llm: expected {\"responses\": [...]}");
  return std::make_unique<StubChatClient>(j["responses"].get<std::vector<std::string>>(),
                                          j.value("repeat_last", false));
}

ChatCompletion StubChatClient::complete(const std::vector<ChatMessage>& messages) {
  std::lock_guard lock(mu_);
  std::size_t i = prompts_.size();
  prompts_.push_back(messages);
  if (i >= responses_.size()) {
    if (!repeat_last_ || responses_.empty()) throw TransportError("stub llm: no canned response left");
    i = responses_.size() - 1;
  }
  ChatCompletion c;
  c.text = responses_[i];
  TokenUsage u;
  for (const auto& m : messages) u.prompt += word_count(m.content);
  u.completion = word_count(c.text);
  c.usage = u;
  return c;
}

HttpChatClient::HttpChatClient(Config cfg) : cfg_(std::move(cfg)) {
  if (cfg_.model.empty()) throw ConfigError("llm config: model is required");
}

HttpChatClient::Config HttpChatClient::config_from_json(const nlohmann::json& j) {
  Config c;
  c.base_url = j.value("base_url", c.base_url);
  c.model = j.value("model", std::string());
  c.temperature = j.value("temperature", c.temperature);
  if (j.contains("max_tokens")) c.max_tokens = j["max_tokens"].get<int>();
  c.api_key_env = j.value("api_key_env", c.api_key_env);
  c.timeout = j.value("timeout", c.timeout);
  return c;
}

ChatCompletion HttpChatClient::complete(const std::vector<ChatMessage>& messages) {
  const char* key = std::getenv(cfg_.api_key_env.c_str());
  if (!key || !*key) throw TransportError("llm: environment variable " + cfg_.api_key_env + " is not set");
  nlohmann::json body{{"model", cfg_.model}, {"temperature", cfg_.temperature}, {"messages", nlohmann::json::array()}};
  for (const auto& m : messages) body["messages"].push_back({{"role", m.role}, {"content", m.content}});
  if (cfg_.max_tokens) body["max_tokens"] = *cfg_.max_tokens;
  const std::string payload = body.dump();
  std::string url = cfg_.base_url;
  while (!url.empty() && url.back() == '/') url.pop_back();
  url += "/chat/completions";

  CURL* curl = curl_easy_init();
  if (!curl) throw TransportError("llm: curl init failed");
  std::string response;
  curl_slist* headers = nullptr;
  headers = curl_slist_append(headers, "Content-Type: application/json");
  headers = curl_slist_append(headers, ("Authorization: Bearer " + std::string(key)).c_str());
  curl_easy_setopt(curl, CURLOPT_URL, url.c_str());
  curl_easy_setopt(curl, CURLOPT_HTTPHEADER, headers);
  curl_easy_setopt(curl, CURLOPT_POSTFIELDS, payload.c_str());
  curl_easy_setopt(curl, CURLOPT_WRITEFUNCTION, collect);
  curl_easy_setopt(curl, CURLOPT_WRITEDATA, &response);
  curl_easy_setopt(curl, CURLOPT_TIMEOUT_MS, static_cast<long>(cfg_.timeout * 1000));
  curl_easy_setopt(curl, CURLOPT_NOSIGNAL, 1L);
  CURLcode rc = curl_easy_perform(curl);
  long status = 0;
  curl_easy_getinfo(curl, CURLINFO_RESPONSE_CODE, &status);
  curl_slist_free_all(headers);
  curl_easy_cleanup(curl);
  if (rc != CURLE_OK) throw TransportError(std::string("llm: ") + curl_easy_strerror(rc));
  if (status != 200) throw TransportError("llm: HTTP " + std::to_string(status) + ": " + response.substr(0, 500));

  auto j = nlohmann::json::parse(response, nullptr, false);
  if (j.is_discarded() || !j.contains("choices") || j["choices"].empty())
    throw TransportError("llm: malformed response");
  ChatCompletion c;
  const auto& content = j["choices"][0]["message"]["content"];
  c.text = content.is_string() ? content.get<std::string>() : "";
  if (j.contains("usage") && j["usage"].is_object()) {
    c.usage = TokenUsage{j["usage"].value("prompt_tokens", 0L), j["usage"].value("completion_tokens", 0L)};
  }
  return c;
}

std::unique_ptr<ChatClient> make_chat_client(const std::string& spec) {
  auto colon = spec.find(':');
  if (colon == std::string::npos) throw ConfigError("llm spec must be stub:FILE or openai:FILE, got '" + spec + "'");
  const std::string kind = spec.substr(0, colon);
  const std::string path = spec.substr(colon + 1);
  auto j = nlohmann::json::parse(read_file(path));
  if (kind == "stub") return StubChatClient::from_json(j);
  if (kind == "openai") return std::make_unique<HttpChatClient>(HttpChatClient::config_from_json(j));
  throw ConfigError("unknown llm kind '" + kind + "'");
}

std::string extract_code_block(const std::string& reply) {
  auto open = reply.find("```");
  if (open == std::string::npos) return reply;
  auto body = reply.find('\n', open);
  if (body == std::string::npos) return reply;
  auto close = reply.find("```", body + 1);
  if (close == std::string::npos) close = reply.size();
  auto code = reply.substr(body + 1, close - body - 1);
  while (!code.empty() && (code.back() == '\n' || code.back() == '\r')) code.pop_back();
  return code;
}

}  // namespace dseval
