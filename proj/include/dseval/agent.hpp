#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dseval/evaluate.hpp"
#include "dseval/llm.hpp"

namespace dseval {

struct RepairFeedback {
  std::string previous_code;
  std::string error;    // "Ename: message" plus traceback; empty when the code ran
  std::string console;  // stream output followed by the result repr
  bool operator==(const RepairFeedback&) const = default;
};

struct AgentRequest {
  std::string query;
  std::string variable_description;
  std::vector<std::string> code_history;
  int round_index = 0;  // problems already posed in this session
  int attempt = 1;      // 1-based; >1 only inside the repair loop
  std::optional<RepairFeedback> repair_feedback;
  // Addressing; built-in adapters that need the problem (oracle, scripted) use these.
  std::string problemset;
  int problem_index = 0;

  bool operator==(const AgentRequest&) const = default;
};

struct AgentResponse {
  std::string code;
  std::string raw_message;
  std::optional<TokenUsage> token_usage;
  bool operator==(const AgentResponse&) const = default;
};

nlohmann::ordered_json request_to_json(const AgentRequest& r);
AgentRequest request_from_json(const nlohmann::json& j);
nlohmann::ordered_json response_to_json(const AgentResponse& r);
AgentResponse response_from_json(const nlohmann::json& j);

/// Order in which prompt-rendering adapters lay out the context: any ordered
/// selection of V (variable description), C (code history) and Q (query)
/// that contains Q. Default "VCQ".
struct ContextOrder {
  std::string parts = "VCQ";
  static ContextOrder parse(const std::string& s);  // throws ConfigError
};

/// Renders the request's context in the given order.
std::string render_context(const AgentRequest& r, const ContextOrder& order);

class Agent {
 public:
  virtual ~Agent() = default;
  /// Throws TransportError when no response could be obtained.
  virtual AgentResponse act(const AgentRequest& request) = 0;
  virtual std::string id() const = 0;
  virtual bool concurrent_safe() const { return true; }
};

/// Submits the reference code of the addressed problem.
class OracleAgent : public Agent {
 public:
  explicit OracleAgent(std::vector<Problemset> problemsets);
  AgentResponse act(const AgentRequest& request) override;
  std::string id() const override { return "oracle"; }

 private:
  std::map<std::string, const Problem*> index_;
  std::vector<Problemset> problemsets_;
};

/// Canned snippets. A script maps "problemset:index" (or just "index") to one
/// snippet or a list indexed by attempt (the last one repeats). The literal
/// "@reference" stands for the reference code when a fallback agent is set;
/// unscripted problems also go to the fallback. Without keys, `sequence`
/// snippets are handed out in call order.
class ScriptedAgent : public Agent {
 public:
  ScriptedAgent(std::map<std::string, std::vector<std::string>> script, std::shared_ptr<Agent> fallback = nullptr);
  explicit ScriptedAgent(std::vector<std::string> sequence);
  /// {"script": {...}, "sequence": [...]} ; a bare object is a script, a bare array a sequence.
  static std::unique_ptr<ScriptedAgent> from_json(const nlohmann::json& j, std::shared_ptr<Agent> fallback);

  AgentResponse act(const AgentRequest& request) override;
  std::string id() const override { return "scripted"; }
  bool concurrent_safe() const override { return script_.size() > 0; }

 private:
  std::map<std::string, std::vector<std::string>> script_;
  std::vector<std::string> sequence_;
  std::size_t next_ = 0;
  std::shared_ptr<Agent> fallback_;
  std::mutex mu_;
};

/// Spawns `argv` per request, writes the request as one JSON line, reads one
/// JSON line {"code", "raw_message"?, "token_usage"?} back.
class ProcessAgent : public Agent {
 public:
  ProcessAgent(std::vector<std::string> argv, std::chrono::duration<double> timeout = std::chrono::seconds(120));
  AgentResponse act(const AgentRequest& request) override;
  std::string id() const override;

 private:
  std::vector<std::string> argv_;
  std::chrono::duration<double> timeout_;
};

/// Prompts a chat model with the rendered context and takes the first code block.
class LlmAgent : public Agent {
 public:
  LlmAgent(std::shared_ptr<ChatClient> client, ContextOrder order = {});
  AgentResponse act(const AgentRequest& request) override;
  std::string id() const override { return "llm:" + client_->name(); }
  bool concurrent_safe() const override { return client_->concurrent_safe(); }

  /// Messages sent for a request (exposed for inspection).
  std::vector<ChatMessage> build_messages(const AgentRequest& request) const;

 private:
  std::shared_ptr<ChatClient> client_;
  ContextOrder order_;
};

/// "oracle", "scripted:FILE", "process:CMD ARGS...", "llm:stub:FILE" or "llm:openai:FILE".
/// `problemsets` feed the oracle and the scripted fallback.
std::shared_ptr<Agent> make_agent(const std::string& spec, const std::vector<Problemset>& problemsets,
                                  const ContextOrder& order = {},
                                  std::chrono::duration<double> timeout = std::chrono::seconds(120));

/// Serializes calls to adapters that are not concurrent-safe.
class GuardedAgent : public Agent {
 public:
  explicit GuardedAgent(std::shared_ptr<Agent> inner) : inner_(std::move(inner)) {}
  AgentResponse act(const AgentRequest& request) override;
  std::string id() const override { return inner_->id(); }

 private:
  std::shared_ptr<Agent> inner_;
  std::mutex mu_;
};

enum class RepairStrategy { None, SelfDebug, Resample };
std::string repair_name(RepairStrategy s);
RepairStrategy repair_from_name(const std::string& s);  // none, self-debug|self_debug, resample

struct Attempt {
  AgentResponse response;
  ExecutionResult result;
  Verdict verdict;
};

struct RepairOutcome {
  std::vector<Attempt> attempts;
  /// Set when the adapter failed; `attempts` holds what was completed before.
  std::optional<std::string> transport_error;

  const Attempt& final() const { return attempts.back(); }
  bool aborted() const { return transport_error.has_value(); }
};

/// Builds the request an agent sees on `session` for `problem`.
AgentRequest make_request(const Problemset& ps, const Problem& problem, Session& session, int round_index);

/// Asks, executes and judges up to `max_attempts` times, stopping at the first
/// pass. Before each retry the session is restored to its state before the
/// first attempt. Feedback never carries validator output.
RepairOutcome run_with_repair(Agent& agent, const AgentRequest& request, const Problem& problem,
                              const GroundTruthStep& step, Session& session, ReferencePool& refs,
                              RepairStrategy strategy, int max_attempts,
                              std::optional<Namespace> submission_pre = std::nullopt);

}  // namespace dseval
