#include "dseval/agent.hpp"

#include <sstream>

#include "dseval/errors.hpp"
#include "dseval/process.hpp"
#include "dseval/util.hpp"

namespace dseval {

using ojson = nlohmann::ordered_json;

ojson request_to_json(const AgentRequest& r) {
  ojson j{{"query", r.query},
          {"variable_description", r.variable_description},
          {"code_history", r.code_history},
          {"round_index", r.round_index},
          {"attempt", r.attempt},
          {"repair_feedback", nullptr},
          {"problemset", r.problemset},
          {"problem_index", r.problem_index}};
  if (r.repair_feedback) {
    j["repair_feedback"] = ojson{{"previous_code", r.repair_feedback->previous_code},
                                 {"error", r.repair_feedback->error},
                                 {"console", r.repair_feedback->console}};
  }
  return j;
}

AgentRequest request_from_json(const nlohmann::json& j) {
  AgentRequest r;
  r.query = j.value("query", "");
  r.variable_description = j.value("variable_description", "");
  if (j.contains("code_history")) r.code_history = j["code_history"].get<std::vector<std::string>>();
  r.round_index = j.value("round_index", 0);
  r.attempt = j.value("attempt", 1);
  if (j.contains("repair_feedback") && j["repair_feedback"].is_object()) {
    const auto& f = j["repair_feedback"];
    r.repair_feedback = RepairFeedback{f.value("previous_code", ""), f.value("error", ""), f.value("console", "")};
  }
  r.problemset = j.value("problemset", "");
  r.problem_index = j.value("problem_index", 0);
  return r;
}

ojson response_to_json(const AgentResponse& r) {
  ojson j{{"code", r.code}, {"raw_message", r.raw_message}, {"token_usage", nullptr}};
  if (r.token_usage) j["token_usage"] = ojson{{"prompt", r.token_usage->prompt}, {"completion", r.token_usage->completion}};
  return j;
}

AgentResponse response_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("code") || !j["code"].is_string())
    throw TransportError("agent response lacks a string 'code' field");
  AgentResponse r;
  r.code = j["code"].get<std::string>();
  r.raw_message = j.value("raw_message", r.code);
  if (j.contains("token_usage") && j["token_usage"].is_object()) {
    r.token_usage = TokenUsage{j["token_usage"].value("prompt", 0L), j["token_usage"].value("completion", 0L)};
  }
  return r;
}

ContextOrder ContextOrder::parse(const std::string& s) {
  std::string parts;
  for (char c : s) {
    if (c == '+' || c == ',' || c == ' ') continue;
    char u = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (u != 'V' && u != 'C' && u != 'Q') throw ConfigError("context order: unknown part '" + std::string(1, c) + "'");
    if (parts.find(u) != std::string::npos) throw ConfigError("context order: '" + std::string(1, u) + "' repeated");
    parts += u;
  }
  if (parts.find('Q') == std::string::npos) throw ConfigError("context order must include Q");
  return ContextOrder{parts};
}

std::string render_context(const AgentRequest& r, const ContextOrder& order) {
  std::ostringstream out;
  bool first = true;
  auto section = [&](const std::string& title, const std::string& body) {
    if (!first) out << "\n";
    first = false;
    out << "## " << title << "\n" << body;
    if (body.empty() || body.back() != '\n') out << "\n";
  };
  for (char p : order.parts) {
    if (p == 'V') {
      section("Variables", r.variable_description.empty() ? "(none)" : r.variable_description);
    } else if (p == 'C') {
      std::string code;
      for (const auto& c : r.code_history) {
        code += "```python\n" + c;
        if (!c.empty() && c.back() != '\n') code += "\n";
        code += "```\n";
      }
      section("Executed code", code.empty() ? "(none)" : code);
    } else {
      section("Task", r.query);
    }
  }
  if (r.repair_feedback) {
    std::string fb = "```python\n" + r.repair_feedback->previous_code + "\n```\n";
    if (!r.repair_feedback->error.empty()) fb += "Error:\n" + r.repair_feedback->error + "\n";
    if (!r.repair_feedback->console.empty()) fb += "Output:\n" + r.repair_feedback->console + "\n";
    section("Previous attempt", fb);
  }
  return out.str();
}

OracleAgent::OracleAgent(std::vector<Problemset> problemsets) : problemsets_(std::move(problemsets)) {
  for (const auto& ps : problemsets_) {
    for (const auto& p : ps.problems) index_[ps.id + ":" + std::to_string(p.index)] = &p;
  }
}

AgentResponse OracleAgent::act(const AgentRequest& request) {
  auto it = index_.find(request.problemset + ":" + std::to_string(request.problem_index));
  if (it == index_.end()) {
    throw TransportError("oracle: unknown problem " + request.problemset + ":" + std::to_string(request.problem_index));
  }
  return AgentResponse{it->second->reference_code, it->second->reference_code, std::nullopt};
}

ScriptedAgent::ScriptedAgent(std::map<std::string, std::vector<std::string>> script, std::shared_ptr<Agent> fallback)
    : script_(std::move(script)), fallback_(std::move(fallback)) {}

ScriptedAgent::ScriptedAgent(std::vector<std::string> sequence) : sequence_(std::move(sequence)) {}

std::unique_ptr<ScriptedAgent> ScriptedAgent::from_json(const nlohmann::json& j, std::shared_ptr<Agent> fallback) {
  auto snippets = [](const nlohmann::json& v) {
    if (v.is_string()) return std::vector<std::string>{v.get<std::string>()};
    if (v.is_array() && !v.empty()) return v.get<std::vector<std::string>>();
    throw ConfigError("scripted agent: entries must be a string or a non-empty list of strings");
  };
  if (j.is_array()) return std::make_unique<ScriptedAgent>(j.get<std::vector<std::string>>());
  if (!j.is_object()) throw ConfigError("scripted agent: expected an object or an array");
  if (j.contains("sequence")) return std::make_unique<ScriptedAgent>(j["sequence"].get<std::vector<std::string>>());
  const auto& body = j.contains("script") ? j["script"] : j;
  std::map<std::string, std::vector<std::string>> script;
  for (auto it = body.begin(); it != body.end(); ++it) script[it.key()] = snippets(it.value());
  return std::make_unique<ScriptedAgent>(std::move(script), std::move(fallback));
}

AgentResponse ScriptedAgent::act(const AgentRequest& request) {
  std::string code;
  {
    std::lock_guard lock(mu_);
    if (!sequence_.empty() || script_.empty()) {
      if (next_ >= sequence_.size()) throw TransportError("scripted agent: sequence exhausted");
      code = sequence_[next_++];
      return AgentResponse{code, code, std::nullopt};
    }
  }
  auto it = script_.find(request.problemset + ":" + std::to_string(request.problem_index));
  if (it == script_.end()) it = script_.find(std::to_string(request.problem_index));
  if (it == script_.end()) {
    if (!fallback_) throw TransportError("scripted agent: no script for problem " + std::to_string(request.problem_index));
    return fallback_->act(request);
  }
  const auto& list = it->second;
  code = list[std::min<std::size_t>(static_cast<std::size_t>(std::max(request.attempt, 1) - 1), list.size() - 1)];
  if (code == "@reference") {
    if (!fallback_) throw ConfigError("scripted agent: @reference needs a fallback agent");
    return fallback_->act(request);
  }
  return AgentResponse{code, code, std::nullopt};
}

ProcessAgent::ProcessAgent(std::vector<std::string> argv, std::chrono::duration<double> timeout)
    : argv_(std::move(argv)), timeout_(timeout) {
  if (argv_.empty()) throw ConfigError("process agent: empty command");
}

std::string ProcessAgent::id() const {
  std::string s = "process:";
  for (std::size_t i = 0; i < argv_.size(); ++i) s += (i ? " " : "") + argv_[i];
  return s;
}

AgentResponse ProcessAgent::act(const AgentRequest& request) {
  Subprocess::Options o;
  o.argv = argv_;
  Subprocess proc(o);
  auto deadline = std::chrono::steady_clock::now() +
                  std::chrono::duration_cast<std::chrono::steady_clock::duration>(timeout_);
  try {
    proc.write(request_to_json(request).dump() + "\n");
    proc.close_stdin();
  } catch (const std::exception& e) {
    proc.kill();
    throw TransportError(std::string("process agent: ") + e.what());
  }
  auto line = proc.read_line(deadline);
  if (!line) {
    bool eof = proc.eof();
    proc.kill();
    throw TransportError(eof ? "process agent: exited without a response" : "process agent: no response before deadline");
  }
  proc.kill();
  auto j = nlohmann::json::parse(*line, nullptr, false);
  if (j.is_discarded()) throw TransportError("process agent: response is not JSON");
  return response_from_json(j);
}

LlmAgent::LlmAgent(std::shared_ptr<ChatClient> client, ContextOrder order)
    : client_(std::move(client)), order_(std::move(order)) {}

std::vector<ChatMessage> LlmAgent::build_messages(const AgentRequest& request) const {
  return {{"system",
           "You are working in a live Python session. Reply with one ```python``` block that solves the task. "
           "The value of the block's last expression is taken as the answer."},
          {"user", render_context(request, order_)}};
}

AgentResponse LlmAgent::act(const AgentRequest& request) {
  auto c = client_->complete(build_messages(request));
  return AgentResponse{extract_code_block(c.text), c.text, c.usage};
}

AgentResponse GuardedAgent::act(const AgentRequest& request) {
  std::lock_guard lock(mu_);
  return inner_->act(request);
}

std::shared_ptr<Agent> make_agent(const std::string& spec, const std::vector<Problemset>& problemsets,
                                  const ContextOrder& order, std::chrono::duration<double> timeout) {
  auto colon = spec.find(':');
  std::string kind = spec.substr(0, colon);
  std::string rest = colon == std::string::npos ? "" : spec.substr(colon + 1);
  if (kind == "oracle") return std::make_shared<OracleAgent>(problemsets);
  if (kind == "scripted") {
    if (rest.empty()) throw ConfigError("scripted agent needs a file: scripted:FILE");
    return ScriptedAgent::from_json(nlohmann::json::parse(read_file(rest)), std::make_shared<OracleAgent>(problemsets));
  }
  if (kind == "process") {
    std::istringstream in(rest);
    std::vector<std::string> argv;
    std::string w;
    while (in >> w) argv.push_back(w);
    return std::make_shared<ProcessAgent>(argv, timeout);
  }
  if (kind == "llm") return std::make_shared<LlmAgent>(make_chat_client(rest), order);
  throw ConfigError("unknown agent spec '" + spec + "'");
}

std::string repair_name(RepairStrategy s) {
  switch (s) {
    case RepairStrategy::None: return "none";
    case RepairStrategy::SelfDebug: return "self-debug";
    case RepairStrategy::Resample: return "resample";
  }
  return "none";
}

RepairStrategy repair_from_name(const std::string& s) {
  if (s == "none") return RepairStrategy::None;
  if (s == "self-debug" || s == "self_debug") return RepairStrategy::SelfDebug;
  if (s == "resample") return RepairStrategy::Resample;
  throw ConfigError("unknown repair strategy '" + s + "'");
}

AgentRequest make_request(const Problemset& ps, const Problem& problem, Session& session, int round_index) {
  AgentRequest r;
  r.query = problem.query;
  r.variable_description = session.describe_variables(DescribeStyle::Compact);
  r.code_history = session.code_history();
  r.round_index = round_index;
  r.problemset = ps.id;
  r.problem_index = problem.index;
  return r;
}

namespace {

RepairFeedback feedback_of(const std::string& code, const ExecutionResult& r) {
  RepairFeedback f;
  f.previous_code = code;
  if (r.error) {
    f.error = r.error->ename + ": " + r.error->message;
    if (!r.error->traceback.empty()) f.error += "\n" + r.error->traceback;
  }
  f.console = cell_output_text(r);
  return f;
}

}  // namespace

RepairOutcome run_with_repair(Agent& agent, const AgentRequest& request, const Problem& problem,
                              const GroundTruthStep& step, Session& session, ReferencePool& refs,
                              RepairStrategy strategy, int max_attempts, std::optional<Namespace> submission_pre) {
  if (max_attempts < 1) throw ConfigError("max_attempts must be at least 1");
  if (strategy == RepairStrategy::None) max_attempts = 1;
  RepairOutcome out;
  SnapshotPtr before;
  if (max_attempts > 1) before = session.snapshot();
  AgentRequest req = request;
  for (int k = 1; k <= max_attempts; ++k) {
    req.attempt = k;
    AgentResponse resp;
    try {
      resp = agent.act(req);
    } catch (const TransportError& e) {
      out.transport_error = e.what();
      return out;
    }
    auto j = judge(problem, step, resp.code, session, refs, submission_pre);
    out.attempts.push_back(Attempt{resp, j.result, j.verdict});
    if (j.verdict.passed() || k == max_attempts) break;
    session.restore(*before);
    if (strategy == RepairStrategy::SelfDebug) req.repair_feedback = feedback_of(resp.code, j.result);
  }
  return out;
}

}  // namespace dseval
