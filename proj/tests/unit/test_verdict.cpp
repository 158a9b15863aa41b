#include <doctest.h>

#include <random>

#include "dseval/errors.hpp"
#include "dseval/evaluate.hpp"
#include "dseval/util.hpp"

using namespace dseval;

namespace {

std::filesystem::path fixtures() { return DSEVAL_FIXTURES; }

struct Catalog {
  Problemset ps;
  Session session{Session::Options{make_temp_dir("dseval-verdict")}};
  ReferencePool refs{Session::Options{make_temp_dir("dseval-verdict-ref")}};
  GroundTruth gt;

  Catalog() : ps(parse_problemset(fixtures() / "verdicts" / "catalog.py")) { gt = build_ground_truth(ps, session); }

  Verdict run(int problem, const std::string& code) {
    session.restore(*gt.steps.at(problem).pre);
    return judge(ps.problems.at(problem), gt.steps.at(problem), code, session, refs).verdict;
  }
};

Catalog& catalog() {
  static Catalog c;
  return c;
}

EvaluationRecord record(VerdictCategory c, RunMode mode = RunMode::Reset) {
  EvaluationRecord r;
  r.mode = mode;
  r.verdict.category = c;
  return r;
}

}  // namespace

TEST_CASE("verdict names follow the catalog") {
  CHECK(Verdict{VerdictCategory::PresentationError, Subverdict::MissingReturn, ""}.name() ==
        "Presentation Error / Missing Return");
  CHECK(Verdict{VerdictCategory::Timeout, Subverdict::None, ""}.name() == "Timeout");
  CHECK(Verdict::from_name("Unit-test Failure / Unexpected Type").subverdict == Subverdict::UnexpectedType);
  CHECK_THROWS(Verdict::from_name("Nope"));
  auto leaves = verdict_leaves();
  CHECK(leaves.size() == 32);
  for (const auto& [c, s] : leaves) {
    Verdict v{c, s, ""};
    CHECK(Verdict::from_name(v.name()) == v);
  }
}

TEST_CASE("oracle submissions are correct on every catalog problem") {
  auto& cat = catalog();
  for (const auto& p : cat.ps.problems) {
    CAPTURE(p.index);
    auto v = cat.run(p.index, p.reference_code);
    CAPTURE(v.detail);
    CHECK(v.name() == "Correct");
  }
}

TEST_CASE("each catalog leaf is produced by its crafted submission") {
  auto& cat = catalog();
  auto cases = nlohmann::json::parse(read_file(fixtures() / "verdicts" / "cases.json"));
  std::set<std::string> seen;
  for (const auto& c : cases["leaves"]) {
    auto code = c["code"].get<std::string>();
    CAPTURE(code);
    auto v = cat.run(c["problem"].get<int>(), code);
    CAPTURE(v.detail);
    CHECK(v.name() == c["expect"].get<std::string>());
    seen.insert(v.name());
  }
  CHECK(seen.size() == 32);
}

TEST_CASE("multi-fault submissions resolve by priority") {
  auto& cat = catalog();
  auto cases = nlohmann::json::parse(read_file(fixtures() / "verdicts" / "cases.json"));
  for (const auto& c : cases["multi_fault"]) {
    auto code = c["code"].get<std::string>();
    CAPTURE(code);
    CHECK(cat.run(c["problem"].get<int>(), code).name() == c["expect"].get<std::string>());
  }
}

TEST_CASE("template expansion") {
  auto basic = expand_template(ValidatorConfig::basic_template());
  REQUIRE(basic.kind == ValidatorKind::And);
  REQUIRE(basic.children.size() == 3);
  CHECK(basic.children[0].kind == ValidatorKind::Crash);
  CHECK(basic.children[1].kind == ValidatorKind::NamespaceIntact);
  CHECK(basic.children[2] == ValidatorConfig::any_of({ValidatorConfig::leaf(ValidatorKind::ExecuteResult),
                                                      ValidatorConfig::leaf(ValidatorKind::AnswerInSource)}));

  auto fig = ValidatorConfig::basic_template();
  fig.children = {ValidatorConfig::leaf(ValidatorKind::NamespaceIntact, {{"update", {"pop"}}}),
                  ValidatorConfig::any_of({ValidatorConfig::leaf(ValidatorKind::ExecuteResult, {{"atol", 0}}),
                                           ValidatorConfig::leaf(ValidatorKind::StreamOutput)})};
  auto e = expand_template(fig);
  CHECK(e == ValidatorConfig::all_of(
                 {ValidatorConfig::leaf(ValidatorKind::Crash),
                  ValidatorConfig::leaf(ValidatorKind::NamespaceIntact, {{"update", {"pop"}}}),
                  ValidatorConfig::any_of({ValidatorConfig::leaf(ValidatorKind::ExecuteResult, {{"atol", 0}}),
                                           ValidatorConfig::leaf(ValidatorKind::StreamOutput),
                                           ValidatorConfig::leaf(ValidatorKind::AnswerInSource)})}));
  auto leaf = ValidatorConfig::leaf(ValidatorKind::Crash);
  CHECK(expand_template(leaf) == leaf);
  auto bad = ValidatorConfig::basic_template();
  bad.options["template"] = "fancy";
  CHECK_THROWS_AS(expand_template(bad), ConfigError);
}

TEST_CASE("and/or algebra on a live context") {
  auto& cat = catalog();
  const auto& p = cat.ps.problems[1];
  const auto& step = cat.gt.steps[1];
  cat.session.restore(*step.pre);
  ValidationContext ctx;
  ctx.problem = &p;
  ctx.submission_code = "df.tail()";
  ctx.submission_result = cat.session.execute(ctx.submission_code);
  ctx.submission_session = &cat.session;
  ctx.reference = &step;
  auto x = ValidatorConfig::leaf(ValidatorKind::ExecuteResult);
  auto ok = ValidatorConfig::leaf(ValidatorKind::Crash);
  CHECK(run_validator(x, ctx).pass == run_validator(ValidatorConfig::all_of({x}), ctx).pass);
  CHECK(run_validator(x, ctx).pass == run_validator(ValidatorConfig::any_of({x}), ctx).pass);
  auto and_node = run_validator(ValidatorConfig::all_of({x, ok}), ctx);
  CHECK_FALSE(and_node.pass);
  CHECK_FALSE(and_node.children[1].evaluated);
  auto or_node = run_validator(ValidatorConfig::any_of({ok, x}), ctx);
  CHECK(or_node.pass);
  CHECK_FALSE(or_node.children[1].evaluated);
  auto full = run_validator(ValidatorConfig::all_of({x, ok}), ctx, false);
  CHECK(full.children[1].evaluated);
  CHECK(full.blocking_leaves().size() == 1);
  // every pre-existing name allowed: intact always holds
  auto everything = ValidatorConfig::leaf(ValidatorKind::NamespaceIntact);
  for (const auto& [name, _] : step.pre_values) everything.options["update"].push_back(name);
  cat.session.execute("crimes['z'] = 1\ndf = None");
  CHECK(run_validator(everything, ctx).pass);
  CHECK_FALSE(run_validator(ValidatorConfig::leaf(ValidatorKind::NamespaceIntact), ctx).pass);
  auto unknown = ValidatorConfig::leaf(ValidatorKind::NamespaceCheck, {{"no_such_var", nullptr}});
  CHECK_THROWS_AS(run_validator(unknown, ctx), ConfigError);
}

TEST_CASE("answer matching is word bounded") {
  CHECK(contains_answer("x = 5", "5"));
  CHECK_FALSE(contains_answer("x = 15", "5"));
  CHECK_FALSE(contains_answer("x = 1.5", "5"));
  CHECK_FALSE(contains_answer("x = 5.25", "5"));
  CHECK(contains_answer("answer = '1970s'", "1970s"));
  CHECK(contains_answer("v = 0.12 # done", "0.12"));
  CHECK_FALSE(contains_answer("v = 0.123", "0.12"));
}

TEST_CASE("metrics arithmetic") {
  std::vector<EvaluationRecord> rs;
  for (int i = 0; i < 6; ++i) rs.push_back(record(VerdictCategory::Correct));
  rs.push_back(record(VerdictCategory::IntactViolation));
  rs.push_back(record(VerdictCategory::IntactViolation));
  rs.push_back(record(VerdictCategory::PresentationError));
  rs.push_back(record(VerdictCategory::Crash));
  auto m = aggregate_metrics(rs);
  CHECK(m.pass_rate == doctest::Approx(60.0));
  CHECK(m.pass_rate_wo_intact == doctest::Approx(80.0));
  CHECK(m.pass_rate_wo_pe == doctest::Approx(70.0));
  CHECK_FALSE(m.error_prop_measured);

  std::vector<EvaluationRecord> ok(4, record(VerdictCategory::Correct));
  auto all = aggregate_metrics(ok);
  CHECK(all.pass_rate == 100.0);
  CHECK(all.pass_rate_error_prop == 100.0);
  CHECK(all.pass_rate_wo_intact == 100.0);
  CHECK(all.pass_rate_wo_pe == 100.0);

  std::vector<EvaluationRecord> bad(3, record(VerdictCategory::Crash));
  auto none = aggregate_metrics(bad);
  CHECK(none.pass_rate == 0.0);
  CHECK(none.pass_rate_wo_pe == 0.0);

  auto empty = aggregate_metrics({});
  CHECK(empty.empty);
  CHECK(empty.pass_rate == 0.0);

  std::vector<EvaluationRecord> mixed{record(VerdictCategory::Correct), record(VerdictCategory::Correct),
                                      record(VerdictCategory::Correct, RunMode::Propagate),
                                      record(VerdictCategory::Crash, RunMode::Propagate)};
  auto mm = aggregate_metrics(mixed);
  CHECK(mm.total == 2);
  CHECK(mm.pass_rate == 100.0);
  CHECK(mm.error_prop_measured);
  CHECK(mm.pass_rate_error_prop == 50.0);
}

TEST_CASE("relaxation monotonicity on random verdict multisets") {
  std::mt19937 rng(2024);
  auto leaves = verdict_leaves();
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<EvaluationRecord> rs(1 + rng() % 30);
    for (auto& r : rs) {
      if (rng() % 3 == 0) {
        r.verdict = Verdict{VerdictCategory::Correct, Subverdict::None, ""};
      } else {
        auto [c, s] = leaves[rng() % leaves.size()];
        r.verdict = Verdict{c, s, ""};
      }
    }
    auto m = aggregate_metrics(rs);
    CHECK(m.pass_rate <= m.pass_rate_wo_intact);
    CHECK(m.pass_rate <= m.pass_rate_wo_pe);
    CHECK(m.pass_rate_wo_pe <= 100.0);
    CHECK(m.pass_rate >= 0.0);
  }
}

TEST_CASE("records round trip through json") {
  EvaluationRecord r;
  r.benchmark = "b";
  r.problemset = "ps";
  r.problem_index = 3;
  r.agent = "oracle";
  r.mode = RunMode::Propagate;
  r.query = "q";
  r.submission_code = "x = 1\n";
  r.reference_code = "x = 2\n";
  r.execution.execute_result = "1";
  r.execution.error = ExecError{ErrorKind::Key, "KeyError", "'a'", "tb"};
  r.verdict = Verdict{VerdictCategory::Crash, Subverdict::KeyError, "KeyError: 'a'"};
  r.attempts = 2;
  r.duration = 0.5;
  r.timestamp = "2024-01-01T00:00:00Z";
  auto back = record_from_json(nlohmann::json::parse(record_to_json(r).dump()));
  CHECK(back == r);
}
