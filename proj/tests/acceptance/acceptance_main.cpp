// One line per acceptance criterion: "CRITERION n PASS|FAIL|SKIP: detail".
// Released benchmarks are used when DSEVAL_RELEASED_DIR points at a directory
// with one sub-directory per benchmark (leetcode, stackoverflow, exercise, kaggle).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "dseval/analysis.hpp"
#include "dseval/annotator.hpp"
#include "dseval/errors.hpp"
#include "dseval/runner.hpp"
#include "dseval/util.hpp"
#include "dseval/validators.hpp"

using namespace dseval;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

// Pinned thresholds.
constexpr double kOracleBudgetSeconds = 120.0;
constexpr int kMinProblemsets = 3;
constexpr int kMinProblems = 20;
constexpr double kTimeoutLimit = 0.5;
constexpr double kTimeoutWallClock = 1.2;
constexpr int kTimeoutRepetitions = 10;
constexpr int kMonotonicityTrials = 1000;
constexpr double kRoundTripShare = 0.95;
constexpr double kDifficultyTolerance = 0.40;
constexpr double kInDegreeTarget = 2.08;
constexpr double kInDegreeTolerance = 0.7;
constexpr int kMinChainLength = 8;
constexpr int kRepairMaxAttempts = 4;
constexpr std::uint64_t kFewShotSeed = 7;

fs::path fixtures() { return DSEVAL_FIXTURES; }

enum class Status { Pass, Fail, Skip };

struct Outcome {
  Status status;
  std::string detail;
};

Outcome pass(std::string d) { return {Status::Pass, std::move(d)}; }
Outcome fail(std::string d) { return {Status::Fail, std::move(d)}; }
Outcome skip(std::string d) { return {Status::Skip, std::move(d)}; }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::optional<fs::path> released_dir() {
  const char* d = std::getenv("DSEVAL_RELEASED_DIR");
  if (!d || !*d || !fs::is_directory(d)) return std::nullopt;
  return fs::path(d);
}

std::optional<fs::path> released_benchmark(const std::vector<std::string>& names) {
  auto root = released_dir();
  if (!root) return std::nullopt;
  for (const auto& e : fs::directory_iterator(*root)) {
    if (!e.is_directory()) continue;
    auto stem = e.path().filename().string();
    for (auto& c : stem) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    for (const auto& n : names) {
      if (stem.find(n) != std::string::npos) return e.path();
    }
  }
  return std::nullopt;
}

void collect_kinds(const ValidatorConfig& cfg, std::set<ValidatorKind>& out) {
  out.insert(cfg.kind);
  for (const auto& c : cfg.children) collect_kinds(c, out);
}

// ---------------------------------------------------------------------------

Outcome oracle_supremacy() {
  auto bench = fixtures() / "bench";
  auto files = list_problemset_files(bench);
  std::set<ValidatorKind> kinds;
  std::size_t problems = 0;
  for (const auto& f : files) {
    auto ps = parse_problemset(f);
    problems += ps.problems.size();
    for (const auto& p : ps.problems) {
      collect_kinds(p.validator, kinds);
      collect_kinds(expand_template(p.validator), kinds);
    }
  }
  std::vector<std::string> missing;
  for (auto k : {ValidatorKind::Crash, ValidatorKind::ExecuteResult, ValidatorKind::NamespaceCheck,
                 ValidatorKind::TableTest, ValidatorKind::Model, ValidatorKind::StreamOutput,
                 ValidatorKind::AnswerInSource, ValidatorKind::NamespaceIntact, ValidatorKind::And, ValidatorKind::Or,
                 ValidatorKind::Template}) {
    if (!kinds.count(k)) missing.emplace_back(validator_key(k));
  }
  if (static_cast<int>(files.size()) < kMinProblemsets || static_cast<int>(problems) < kMinProblems)
    return fail("fixture benchmark too small: " + std::to_string(files.size()) + " problemsets, " +
                std::to_string(problems) + " problems");
  if (!missing.empty()) {
    std::string m;
    for (const auto& k : missing) m += " " + k;
    return fail("validator kinds not covered:" + m);
  }

  RunConfig cfg;
  cfg.benchmark = bench;
  cfg.modes = {RunMode::Reset, RunMode::Propagate};
  auto t0 = Clock::now();
  auto res = run_benchmark(cfg);
  double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  for (const auto& i : res.integrity) {
    if (!i.ok) return fail("integrity failure in " + i.problemset + ": " + i.message);
  }
  if (!res.completed()) return fail("run aborted: " + *res.abort_reason);
  Metrics reset, prop;
  {
    std::vector<EvaluationRecord> r, p;
    for (const auto& rec : res.records) (rec.mode == RunMode::Reset ? r : p).push_back(rec);
    reset = aggregate_metrics(r);
    prop = aggregate_metrics(p);
  }
  std::string detail = std::to_string(files.size()) + " problemsets, " + std::to_string(problems) +
                       " problems; reset " + fmt("%.1f", reset.pass_rate) + ", propagate " +
                       fmt("%.1f", prop.pass_rate) + " in " + fmt("%.1f", secs) + " s";
  if (reset.pass_rate != 100.0 || prop.pass_rate != 100.0 || reset.total != problems || prop.total != problems)
    return fail(detail);
  if (secs >= kOracleBudgetSeconds) return fail(detail + " (over budget)");

  auto released = released_dir();
  if (!released) return pass(detail + "; released benchmarks not present, that part skipped");
  std::size_t sets = 0, bad = 0, reported = 0;
  for (const auto& e : fs::directory_iterator(*released)) {
    if (!e.is_directory()) continue;
    RunConfig rc;
    rc.benchmark = e.path();
    auto rr = run_benchmark(rc);
    for (const auto& i : rr.integrity) {
      ++sets;
      if (!i.ok) ++reported;
    }
    std::map<std::string, std::pair<int, int>> per;
    for (const auto& rec : rr.records) {
      auto& [ok, n] = per[rec.problemset];
      ok += rec.verdict.passed();
      ++n;
    }
    for (const auto& [id, c] : per) bad += c.first != c.second;
  }
  detail += "; released: " + std::to_string(sets) + " problemsets, " + std::to_string(reported) +
            " reported as failing integrity, " + std::to_string(bad) + " below 100";
  return bad == 0 ? pass(detail) : fail(detail);
}

struct Catalog {
  Problemset ps;
  Session session{Session::Options{make_temp_dir("dseval-acc-cat")}};
  ReferencePool refs{Session::Options{make_temp_dir("dseval-acc-ref")}};
  GroundTruth gt;
  Catalog() : ps(parse_problemset(fixtures() / "verdicts" / "catalog.py")) { gt = build_ground_truth(ps, session); }
  Verdict run(int i, const std::string& code) {
    session.restore(*gt.steps.at(i).pre);
    return judge(ps.problems.at(i), gt.steps.at(i), code, session, refs).verdict;
  }
};

Outcome verdict_catalog() {
  Catalog cat;
  auto cases = nlohmann::json::parse(read_file(fixtures() / "verdicts" / "cases.json"));
  std::set<std::string> produced;
  std::vector<std::string> wrong;
  for (const auto& c : cases["leaves"]) {
    auto v = cat.run(c["problem"].get<int>(), c["code"].get<std::string>());
    auto expect = c["expect"].get<std::string>();
    if (v.name() != expect) wrong.push_back("expected " + expect + ", got " + v.name());
    produced.insert(v.name());
  }
  int multi = 0;
  for (const auto& c : cases["multi_fault"]) {
    auto v = cat.run(c["problem"].get<int>(), c["code"].get<std::string>());
    auto expect = c["expect"].get<std::string>();
    if (v.name() != expect) wrong.push_back("multi-fault: expected " + expect + ", got " + v.name());
    ++multi;
  }
  std::string detail = std::to_string(cases["leaves"].size()) + " leaf submissions, " +
                       std::to_string(produced.size()) + " distinct verdicts; " + std::to_string(multi) +
                       " multi-fault submissions";
  if (!wrong.empty()) return fail(detail + "; " + wrong.front() + " (+" + std::to_string(wrong.size() - 1) + " more)");
  if (produced.size() != 32 || verdict_leaves().size() != 32 || multi < 5) return fail(detail);
  return pass(detail);
}

EvaluationRecord rec(VerdictCategory c) {
  EvaluationRecord r;
  r.verdict.category = c;
  return r;
}

Outcome metrics_arithmetic() {
  std::vector<EvaluationRecord> rs(6, rec(VerdictCategory::Correct));
  rs.push_back(rec(VerdictCategory::IntactViolation));
  rs.push_back(rec(VerdictCategory::IntactViolation));
  rs.push_back(rec(VerdictCategory::PresentationError));
  rs.push_back(rec(VerdictCategory::Crash));
  auto m = aggregate_metrics(rs);
  std::string detail = "pass " + fmt("%.1f", m.pass_rate) + " / wo_intact " + fmt("%.1f", m.pass_rate_wo_intact) +
                       " / wo_pe " + fmt("%.1f", m.pass_rate_wo_pe);
  if (m.pass_rate != 60.0 || m.pass_rate_wo_intact != 80.0 || m.pass_rate_wo_pe != 70.0) return fail(detail);

  std::mt19937 rng(99);
  auto leaves = verdict_leaves();
  for (int t = 0; t < kMonotonicityTrials; ++t) {
    std::vector<EvaluationRecord> sample(1 + rng() % 40);
    for (auto& r : sample) {
      if (rng() % 3 == 0) {
        r.verdict = Verdict{VerdictCategory::Correct, Subverdict::None, ""};
      } else {
        auto [c, s] = leaves[rng() % leaves.size()];
        r.verdict = Verdict{c, s, ""};
      }
    }
    auto mm = aggregate_metrics(sample);
    if (!(mm.pass_rate <= mm.pass_rate_wo_intact && mm.pass_rate <= mm.pass_rate_wo_pe && mm.pass_rate_wo_pe <= 100.0))
      return fail(detail + "; monotonicity broken on trial " + std::to_string(t));
  }
  return pass(detail + "; monotone on " + std::to_string(kMonotonicityTrials) + " random multisets");
}

Outcome error_propagation() {
  auto run = [](RunMode mode) {
    RunConfig cfg;
    cfg.benchmark = fixtures() / "chain";
    cfg.agent_spec = "scripted:" + (fixtures() / "chain" / "wrong_first.json").string();
    cfg.modes = {mode};
    return run_benchmark(cfg).metrics;
  };
  auto reset = run(RunMode::Reset);
  auto prop = run(RunMode::Propagate);
  std::string detail = "reset " + fmt("%.1f", reset.pass_rate) + ", propagate " + fmt("%.1f", prop.pass_rate_error_prop);
  bool ok = std::round(reset.pass_rate * 10) == 667 && prop.pass_rate_error_prop == 0.0 && prop.error_prop_measured;
  return ok ? pass(detail) : fail(detail);
}

Outcome timeout() {
  std::ostringstream text;
  text << "# %%\nimport time\n\n# %%\n\"\"\"\nquery: Wait.\nexecution:\n  max_time: " << kTimeoutLimit
       << "\n\"\"\"\n\nwaited = 1\n";
  auto ps = parse_problemset_text(text.str(), "timeout");
  Session session(Session::Options{make_temp_dir("dseval-acc-timeout")});
  ReferencePool refs(Session::Options{make_temp_dir("dseval-acc-timeout-ref")});
  auto gt = build_ground_truth(ps, session);
  const std::string busy = "t0 = time.time()\nwhile time.time() - t0 < 1.0:\n    pass\nwaited = 1";
  int hits = 0;
  double worst = 0;
  for (int i = 0; i < kTimeoutRepetitions; ++i) {
    session.restore(*gt.steps[0].pre);
    auto t0 = Clock::now();
    auto v = judge(ps.problems[0], gt.steps[0], busy, session, refs).verdict;
    double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    worst = std::max(worst, secs);
    if (v.category == VerdictCategory::Timeout && secs <= kTimeoutWallClock) ++hits;
  }
  std::string detail = std::to_string(hits) + "/" + std::to_string(kTimeoutRepetitions) +
                       " timed out within " + fmt("%.1f", kTimeoutWallClock) + " s (slowest " + fmt("%.2f", worst) + " s)";
  return hits == kTimeoutRepetitions ? pass(detail) : fail(detail);
}

bool round_trips(const fs::path& f, std::string* why) {
  try {
    auto ps = parse_problemset(f);
    auto once = serialize_problemset(ps);
    auto again = parse_problemset_text(once, ps.id);
    if (!(again == ps)) {
      *why = "structure changed";
      return false;
    }
    if (serialize_problemset(again) != once) {
      *why = "serialization not a fixpoint";
      return false;
    }
    return true;
  } catch (const std::exception& e) {
    *why = e.what();
    return false;
  }
}

Outcome dseal_round_trip() {
  int n = 0;
  for (const auto& e : fs::recursive_directory_iterator(fixtures())) {
    if (e.path().extension() != ".py" || e.path().parent_path().filename() == "agents") continue;
    std::string why;
    if (!round_trips(e.path(), &why)) return fail(e.path().string() + ": " + why);
    ++n;
  }
  std::string detail = std::to_string(n) + " fixture problemsets round trip";
  auto released = released_dir();
  if (!released) return pass(detail + "; released benchmarks not present, that part skipped");
  int total = 0, ok = 0;
  for (const auto& e : fs::recursive_directory_iterator(*released)) {
    if (e.path().extension() != ".py") continue;
    ++total;
    std::string why;
    ok += round_trips(e.path(), &why);
  }
  detail += "; released " + std::to_string(ok) + "/" + std::to_string(total);
  return total > 0 && ok >= kRoundTripShare * total ? pass(detail) : fail(detail);
}

double mean_difficulty(const fs::path& bench) {
  double sum = 0;
  int n = 0;
  for (const auto& f : list_problemset_files(bench)) {
    for (const auto& p : parse_problemset(f).problems) {
      sum += score_difficulty(p.reference_code).total();
      ++n;
    }
  }
  return n ? sum / n : 0;
}

Outcome corpus_statistics() {
  auto leet = released_benchmark({"leetcode"});
  auto so = released_benchmark({"stackoverflow", "so"});
  auto exercise = released_benchmark({"exercise"});
  auto kaggle = released_benchmark({"kaggle"});
  if (!leet || !so || !exercise || !kaggle)
    return skip("released benchmarks not available (set DSEVAL_RELEASED_DIR to a directory holding them)");

  struct Row {
    std::string name;
    double mean;
    double target;
  };
  std::vector<Row> rows{{"leetcode", mean_difficulty(*leet), 56.0},
                        {"kaggle", mean_difficulty(*kaggle), 35.9},
                        {"stackoverflow", mean_difficulty(*so), 17.3},
                        {"exercise", mean_difficulty(*exercise), 16.1}};
  std::string detail = "difficulty";
  bool ok = true;
  for (const auto& r : rows) {
    detail += " " + r.name + "=" + fmt("%.1f", r.mean);
    ok &= std::abs(r.mean - r.target) <= kDifficultyTolerance * r.target;
  }
  ok &= rows[0].mean > rows[1].mean && rows[1].mean > std::max(rows[2].mean, rows[3].mean);

  AnalyzeOptions o;
  o.dependencies = true;
  std::vector<double> degrees;
  int chain = 0;
  for (const auto& bench : {*kaggle, *exercise}) {
    auto out = analyze_benchmark(bench, o);
    for (const auto& r : out.records) {
      if (r["kind"] == "dependencies") {
        chain = std::max(chain, r["max_chain_length"].get<int>());
        degrees.push_back(r["mean_in_degree"].get<double>());
      }
    }
  }
  double mean_degree = 0;
  for (double d : degrees) mean_degree += d;
  if (!degrees.empty()) mean_degree /= static_cast<double>(degrees.size());
  detail += "; mean in-degree " + fmt("%.2f", mean_degree) + ", max chain " + std::to_string(chain);
  ok &= std::abs(mean_degree - kInDegreeTarget) <= kInDegreeTolerance && chain >= kMinChainLength;
  return ok ? pass(detail) : fail(detail);
}

class Spy : public Agent {
 public:
  Spy(Session& s, std::vector<std::string> answers) : session_(s), answers_(std::move(answers)) {}
  AgentResponse act(const AgentRequest& r) override {
    seen.push_back(session_.export_values());
    histories.push_back(session_.code_history());
    auto i = std::min<std::size_t>(static_cast<std::size_t>(r.attempt - 1), answers_.size() - 1);
    return AgentResponse{answers_[i], answers_[i], std::nullopt};
  }
  std::string id() const override { return "spy"; }
  std::vector<Namespace> seen;
  std::vector<std::vector<std::string>> histories;

 private:
  Session& session_;
  std::vector<std::string> answers_;
};

Outcome repair_loop() {
  auto ps = parse_problemset(fixtures() / "chain" / "chain.py");
  Session session(Session::Options{make_temp_dir("dseval-acc-repair")});
  ReferencePool refs(Session::Options{make_temp_dir("dseval-acc-repair-ref")});
  auto gt = build_ground_truth(ps, session);
  session.restore(*gt.steps[1].pre);
  auto pre = session.export_values();
  auto pre_history = session.code_history();
  auto req = make_request(ps, ps.problems[1], session, 1);
  Spy spy(session, {"v2 = v1 / 0\nv1 = None\nv1.missing", ps.problems[1].reference_code});
  auto out = run_with_repair(spy, req, ps.problems[1], gt.steps[1], session, refs, RepairStrategy::SelfDebug,
                             kRepairMaxAttempts);
  if (out.aborted() || out.attempts.empty()) return fail("repair loop aborted");
  std::string detail = "attempts " + std::to_string(out.attempts.size()) + ", final " + out.final().verdict.name();
  if (out.attempts.size() != 2 || out.final().verdict.name() != "Correct") return fail(detail);
  if (out.attempts[0].verdict.category != VerdictCategory::Crash) return fail(detail + "; first attempt did not crash");
  if (spy.seen.size() != 2 || !(spy.seen[1] == pre) || spy.histories[1] != pre_history)
    return fail(detail + "; session after the failed attempt differs from its pre-attempt state");
  return pass(detail + "; state before attempt 2 deep-equals the pre-attempt state");
}

Outcome annotator_cycle() {
  auto seeds = load_seeds(fixtures() / "annotator" / "seeds");
  const IdeaSeed* grades = nullptr;
  for (const auto& s : seeds)
    if (s.id == "grades") grades = &s;
  if (!grades) return fail("seed fixture missing");
  auto cycle = nlohmann::json::parse(read_file(fixtures() / "annotator" / "cycle.json"));
  auto llm = std::make_shared<StubChatClient>(
      std::vector<std::string>{cycle["responses"][0].get<std::string>(), cycle["responses"][2].get<std::string>()});
  ScopedDir ws(make_temp_dir("dseval-acc-annot"));
  Annotator::Options opts;
  opts.random_seed = kFewShotSeed;
  Annotator a(ws.path, llm, PromptTemplates::builtin(), opts);
  a.generate_sketch(*grades);
  auto draft = a.generate_problemset(*grades);
  if (draft.stage != SeedStage::Drafted || !draft.issues.empty()) return fail("draft not clean");
  auto acc = a.accept_revision(*grades, draft.draft_path, "checked");
  if (!acc.accepted) return fail("draft rejected: " + acc.message);
  auto rep = check_integrity(ws.path / "accepted" / "grades.py", Session::Options{});
  if (!rep.ok) return fail("accepted problemset fails integrity: " + rep.message);

  for (int i = 0; i < 6; ++i) {
    auto id = "extra" + std::to_string(i);
    fs::copy_file(ws.path / "accepted" / "grades.py", ws.path / "accepted" / (id + ".py"));
    a.state().accepted_pool.push_back(PoolEntry{id, fs::path("accepted") / (id + ".py"), "sketch " + id});
  }
  auto first = a.select_few_shot("next", "sketch");
  auto second = a.select_few_shot("next", "sketch");
  std::string prompt = a.sketch_prompt(IdeaSeed{"next", "d", "n", {}})[0].content;
  int examples = 0;
  for (auto p = prompt.find("### Example"); p != std::string::npos; p = prompt.find("### Example", p + 1)) ++examples;
  std::string detail = "accepted problemset passes integrity; pool " + std::to_string(a.state().accepted_pool.size()) +
                       " gives " + std::to_string(examples) + " examples";
  if (a.state().accepted_pool.size() != 7 || first.size() != kMaxFewShot || examples != 5 || first != second)
    return fail(detail);
  return pass(detail);
}

}  // namespace

int main() {
  std::vector<std::pair<int, std::function<Outcome()>>> criteria{
      {1, oracle_supremacy}, {2, verdict_catalog}, {3, metrics_arithmetic}, {4, error_propagation}, {5, timeout},
      {6, dseal_round_trip}, {7, corpus_statistics}, {8, repair_loop},      {9, annotator_cycle}};
  int failures = 0;
  for (const auto& [n, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = fail(std::string("exception: ") + e.what());
    }
    const char* tag = o.status == Status::Pass ? "PASS" : o.status == Status::Fail ? "FAIL" : "SKIP";
    std::cout << "CRITERION " << n << " " << tag << ": " << o.detail << std::endl;
    failures += o.status == Status::Fail;
  }
  return failures == 0 ? 0 : 1;
}
