#include <doctest.h>

#include "dseval/agent.hpp"
#include "dseval/errors.hpp"
#include "dseval/util.hpp"

using namespace dseval;

namespace {

std::filesystem::path fixtures() { return DSEVAL_FIXTURES; }

struct Chain {
  Problemset ps;
  Session session{Session::Options{make_temp_dir("dseval-agent")}};
  ReferencePool refs{Session::Options{make_temp_dir("dseval-agent-ref")}};
  GroundTruth gt;

  Chain() : ps(parse_problemset(fixtures() / "chain" / "chain.py")) { gt = build_ground_truth(ps, session); }

  AgentRequest request(int i) {
    session.restore(*gt.steps.at(i).pre);
    return make_request(ps, ps.problems.at(i), session, i);
  }
};

Chain& chain() {
  static Chain c;
  return c;
}

// Records what the session looked like whenever it is asked.
class Spy : public Agent {
 public:
  Spy(Session& s, std::vector<std::string> answers) : session_(s), answers_(std::move(answers)) {}
  AgentResponse act(const AgentRequest& r) override {
    requests.push_back(r);
    namespaces.push_back(session_.export_values());
    histories.push_back(session_.code_history());
    auto i = std::min<std::size_t>(requests.size() - 1, answers_.size() - 1);
    return AgentResponse{answers_[i], answers_[i], std::nullopt};
  }
  std::string id() const override { return "spy"; }

  std::vector<AgentRequest> requests;
  std::vector<Namespace> namespaces;
  std::vector<std::vector<std::string>> histories;

 private:
  Session& session_;
  std::vector<std::string> answers_;
};

class Failing : public Agent {
 public:
  AgentResponse act(const AgentRequest&) override { throw TransportError("down"); }
  std::string id() const override { return "failing"; }
};

const std::string kCrash = "v1 = 0\nundefined_name + 1";

}  // namespace

TEST_CASE("request and response survive JSON") {
  AgentRequest r;
  r.query = "q";
  r.variable_description = "x: int";
  r.code_history = {"x = 1", "y = 2"};
  r.round_index = 2;
  r.attempt = 3;
  r.repair_feedback = RepairFeedback{"x +", "SyntaxError: bad", "out"};
  r.problemset = "ps";
  r.problem_index = 4;
  CHECK(request_from_json(nlohmann::json::parse(request_to_json(r).dump())) == r);

  AgentResponse a{"print(1)", "raw", TokenUsage{10, 3}};
  CHECK(response_from_json(nlohmann::json::parse(response_to_json(a).dump())) == a);
  auto bare = response_from_json(nlohmann::json{{"code", "1"}});
  CHECK(bare.code == "1");
  CHECK_FALSE(bare.token_usage.has_value());
}

TEST_CASE("context order") {
  CHECK(ContextOrder::parse("VCQ").parts == "VCQ");
  CHECK(ContextOrder::parse("QV").parts == "QV");
  CHECK(ContextOrder::parse("Q").parts == "Q");
  CHECK_THROWS_AS(ContextOrder::parse("VC"), ConfigError);
  CHECK_THROWS_AS(ContextOrder::parse("QQ"), ConfigError);
  CHECK_THROWS_AS(ContextOrder::parse("VXQ"), ConfigError);

  AgentRequest r;
  r.query = "the task";
  r.variable_description = "the variables";
  r.code_history = {"a = 1"};
  auto vcq = render_context(r, ContextOrder::parse("VCQ"));
  CHECK(vcq.find("the variables") < vcq.find("a = 1"));
  CHECK(vcq.find("a = 1") < vcq.find("the task"));
  auto qcv = render_context(r, ContextOrder::parse("QCV"));
  CHECK(qcv.find("the task") < qcv.find("a = 1"));
  CHECK(qcv.find("a = 1") < qcv.find("the variables"));
  auto q = render_context(r, ContextOrder::parse("Q"));
  CHECK(q.find("the variables") == std::string::npos);
  CHECK(q.find("a = 1") == std::string::npos);
}

TEST_CASE("make_request reflects the session") {
  auto& c = chain();
  auto r = c.request(1);
  CHECK(r.query == c.ps.problems[1].query);
  CHECK(r.round_index == 1);
  CHECK(r.attempt == 1);
  CHECK(r.problemset == "chain");
  CHECK(r.problem_index == 1);
  CHECK(r.variable_description.find("v1") != std::string::npos);
  CHECK(r.variable_description.find("orders") != std::string::npos);
  REQUIRE(r.code_history.size() == 2);
  CHECK(r.code_history.back() == c.ps.problems[0].reference_code);
}

TEST_CASE("oracle and scripted agents") {
  auto& c = chain();
  OracleAgent oracle({c.ps});
  for (const auto& p : c.ps.problems) {
    AgentRequest r;
    r.problemset = "chain";
    r.problem_index = p.index;
    CHECK(oracle.act(r).code == p.reference_code);
  }
  AgentRequest missing;
  missing.problemset = "nope";
  CHECK_THROWS(oracle.act(missing));

  auto fallback = std::make_shared<OracleAgent>(std::vector<Problemset>{c.ps});
  auto scripted = ScriptedAgent::from_json(
      nlohmann::json::parse(R"({"script": {"chain:0": ["a", "b"], "2": "@reference"}})"), fallback);
  AgentRequest r;
  r.problemset = "chain";
  r.problem_index = 0;
  r.attempt = 1;
  CHECK(scripted->act(r).code == "a");
  r.attempt = 2;
  CHECK(scripted->act(r).code == "b");
  r.attempt = 5;
  CHECK(scripted->act(r).code == "b");
  r.problem_index = 2;
  CHECK(scripted->act(r).code == c.ps.problems[2].reference_code);
  r.problem_index = 1;
  CHECK(scripted->act(r).code == c.ps.problems[1].reference_code);

  auto seq = ScriptedAgent::from_json(nlohmann::json::parse(R"(["x = 1", "x = 2"])"), nullptr);
  CHECK(seq->act(r).code == "x = 1");
  CHECK(seq->act(r).code == "x = 2");
  CHECK_THROWS(seq->act(r));
}

TEST_CASE("process agent echoes the query") {
  auto py = default_python();
  auto script = (fixtures() / "agents" / "echo.py").string();
  ProcessAgent agent({py, script});
  AgentRequest r;
  r.query = "Count the rows.\nThen stop.";
  auto resp = agent.act(r);
  CHECK(resp.code == "# Count the rows.\n# Then stop.\n1+1");
  CHECK(resp.raw_message == "echo");

  ProcessAgent hang({py, script, "--hang"}, std::chrono::milliseconds(500));
  auto t0 = std::chrono::steady_clock::now();
  CHECK_THROWS_AS(hang.act(r), TransportError);
  CHECK(std::chrono::steady_clock::now() - t0 < std::chrono::seconds(5));

  ProcessAgent garbage({py, script, "--garbage"});
  CHECK_THROWS_AS(garbage.act(r), TransportError);

  ProcessAgent missing({"/nonexistent/agent-binary"});
  CHECK_THROWS_AS(missing.act(r), TransportError);
}

TEST_CASE("llm agent takes the first code block") {
  auto stub = std::make_shared<StubChatClient>(std::vector<std::string>{"Here:\n```python\nv1 = 1\n```\nmore"});
  LlmAgent agent(stub, ContextOrder::parse("QV"));
  AgentRequest r;
  r.query = "make v1";
  r.variable_description = "nothing yet";
  auto resp = agent.act(r);
  CHECK(resp.code == "v1 = 1");
  REQUIRE(resp.token_usage.has_value());
  CHECK(resp.token_usage->completion > 0);
  REQUIRE(stub->calls() == 1);
  const auto& user = stub->prompts()[0].back().content;
  CHECK(user.find("make v1") < user.find("nothing yet"));
}

TEST_CASE("repair: crash then correct") {
  auto& c = chain();
  auto req = c.request(0);
  auto pre = c.session.export_values();
  auto pre_history = c.session.code_history();
  Spy spy(c.session, {kCrash, c.ps.problems[0].reference_code});
  auto out = run_with_repair(spy, req, c.ps.problems[0], c.gt.steps[0], c.session, c.refs, RepairStrategy::SelfDebug, 3);
  REQUIRE_FALSE(out.aborted());
  REQUIRE(out.attempts.size() == 2);
  CHECK(out.attempts[0].verdict.category == VerdictCategory::Crash);
  CHECK(out.final().verdict.passed());

  // The second attempt saw exactly the state the first one saw.
  REQUIRE(spy.namespaces.size() == 2);
  CHECK(spy.namespaces[1] == pre);
  CHECK(spy.histories[1] == pre_history);
  CHECK(spy.namespaces[1].count("v1") == 0);

  REQUIRE(spy.requests[1].repair_feedback.has_value());
  const auto& fb = *spy.requests[1].repair_feedback;
  CHECK(spy.requests[1].attempt == 2);
  CHECK(fb.previous_code == kCrash);
  CHECK(fb.error.rfind("NameError: ", 0) == 0);
  CHECK(fb.error.find("undefined_name") != std::string::npos);
  // Feedback is what the code did, never the validator's verdict.
  auto all = fb.previous_code + fb.error + fb.console;
  for (const char* leaked : {"Crash", "Correct", "Wrong", "Mismatch", "validator", "Violation"}) {
    CHECK_MESSAGE(all.find(leaked) == std::string::npos, leaked);
  }
}

TEST_CASE("repair: resample carries no feedback and wrong output is retried") {
  auto& c = chain();
  auto req = c.request(0);
  Spy spy(c.session, {"v1 = orders['qty'] + orders['unit']", c.ps.problems[0].reference_code});
  auto out = run_with_repair(spy, req, c.ps.problems[0], c.gt.steps[0], c.session, c.refs, RepairStrategy::Resample, 2);
  REQUIRE(out.attempts.size() == 2);
  CHECK_FALSE(out.attempts[0].verdict.passed());
  CHECK(out.final().verdict.passed());
  CHECK_FALSE(spy.requests[1].repair_feedback.has_value());
  CHECK(spy.requests[1].attempt == 2);
}

TEST_CASE("repair: one attempt is a single shot") {
  auto& c = chain();
  auto req = c.request(0);
  Spy spy(c.session, {kCrash, c.ps.problems[0].reference_code});
  auto out = run_with_repair(spy, req, c.ps.problems[0], c.gt.steps[0], c.session, c.refs, RepairStrategy::SelfDebug, 1);
  REQUIRE(out.attempts.size() == 1);
  CHECK(out.final().verdict.category == VerdictCategory::Crash);
  CHECK(spy.requests.size() == 1);

  // Strategy none ignores max_attempts.
  req = c.request(0);
  Spy spy2(c.session, {kCrash, c.ps.problems[0].reference_code});
  out = run_with_repair(spy2, req, c.ps.problems[0], c.gt.steps[0], c.session, c.refs, RepairStrategy::None, 5);
  CHECK(out.attempts.size() == 1);

  // Exhausted attempts leave the last attempt's state in place.
  req = c.request(0);
  Spy spy3(c.session, {kCrash});
  out = run_with_repair(spy3, req, c.ps.problems[0], c.gt.steps[0], c.session, c.refs, RepairStrategy::SelfDebug, 3);
  CHECK(out.attempts.size() == 3);
  CHECK_FALSE(out.final().verdict.passed());
  auto names = c.session.variable_names();
  CHECK(std::find(names.begin(), names.end(), "v1") != names.end());

  CHECK_THROWS_AS(run_with_repair(spy3, req, c.ps.problems[0], c.gt.steps[0], c.session, c.refs,
                                  RepairStrategy::SelfDebug, 0),
                  ConfigError);
}

TEST_CASE("repair: transport failure aborts") {
  auto& c = chain();
  auto req = c.request(0);
  Failing f;
  auto out = run_with_repair(f, req, c.ps.problems[0], c.gt.steps[0], c.session, c.refs, RepairStrategy::SelfDebug, 3);
  CHECK(out.aborted());
  CHECK(out.attempts.empty());
}

TEST_CASE("repair strategy names") {
  CHECK(repair_from_name("none") == RepairStrategy::None);
  CHECK(repair_from_name("self-debug") == RepairStrategy::SelfDebug);
  CHECK(repair_from_name("self_debug") == RepairStrategy::SelfDebug);
  CHECK(repair_from_name("resample") == RepairStrategy::Resample);
  CHECK_THROWS_AS(repair_from_name("retry"), ConfigError);
  CHECK(repair_name(RepairStrategy::SelfDebug) == "self-debug");
}

TEST_CASE("make_agent specs") {
  auto& c = chain();
  CHECK(make_agent("oracle", {c.ps})->id() == "oracle");
  auto proc = make_agent("process:" + default_python() + " " + (fixtures() / "agents" / "echo.py").string(), {c.ps});
  AgentRequest r;
  r.query = "x";
  CHECK(proc->act(r).code == "# x\n1+1");
  CHECK_THROWS_AS(make_agent("telepathy", {c.ps}), ConfigError);
  CHECK_THROWS(make_agent("scripted:/nonexistent.json", {c.ps}));
}
