#include <doctest.h>

#include <random>

#include "dseval/analysis.hpp"
#include "dseval/errors.hpp"
#include "dseval/util.hpp"

using namespace dseval;
namespace fs = std::filesystem;

namespace {

fs::path fixtures() { return DSEVAL_FIXTURES; }

struct Built {
  Problemset ps;
  Workspace w;
  ScopedDir guard;
  std::unique_ptr<Session> session;
  GroundTruth gt;

  explicit Built(Problemset p) : ps(std::move(p)) {
    ProvisionOptions data;
    w = prepare_workspace(ps, {}, default_python(), 30.0, data);
    guard.path = w.root;
    session = std::make_unique<Session>(w.session);
    gt = build_ground_truth(ps, *session);
  }
};

Problemset from_text(const std::string& text, const std::string& id) { return parse_problemset_text(text, id); }

std::string cell(const std::string& query, const std::string& code) {
  return "# %%\n\"\"\"\nquery: " + query + "\n\"\"\"\n\n" + code + "\n\n";
}

const char* kSnippets[] = {"x = 1",
                           "f(x)",
                           "df.head()",
                           "[a * 2 for a in b if a]",
                           "y = a if c else d",
                           "for i in range(3):\n    total += i",
                           "while n > 0:\n    n -= 1",
                           "print(len(s), sum(t))",
                           "if p:\n    q = g(h(1))",
                           "z = {k: v for k, v in m.items()}"};

}  // namespace

TEST_CASE("difficulty is monotone and additive over statements") {
  std::mt19937 rng(3);
  std::uniform_int_distribution<std::size_t> pick(0, std::size(kSnippets) - 1);
  for (int trial = 0; trial < 200; ++trial) {
    std::string a = kSnippets[pick(rng)], b = kSnippets[pick(rng)];
    auto sa = score_difficulty(a), sb = score_difficulty(b), sab = score_difficulty(a + "\n" + b);
    CHECK(sab.total() >= sa.total());
    CHECK(sab.calls == sa.calls + sb.calls);
    CHECK(sab.expressions == sa.expressions + sb.expressions);
    CHECK(sab.conditions == sa.conditions + sb.conditions);
    CHECK(sab.loops == sa.loops + sb.loops);
  }
  CHECK(score_difficulty("").total() == 0);
  auto call = score_difficulty("f(x)");
  CHECK(call.calls == 1);
  CHECK(call.expressions >= 1);
}

TEST_CASE("dependency graph of independent problems has no edges") {
  Built b(from_text("# %%\nimport math\n\n" + cell("a", "a = 1") + cell("b", "b = 2") + cell("c", "math.sqrt(9)"), "ind"));
  auto g = extract_dependencies(b.ps, b.gt);
  CHECK(g.nodes.size() == 3);
  CHECK(g.edges.empty());
  CHECK(g.max_chain_length() == 1);
  CHECK(g.mean_in_degree() == 0.0);
  CHECK_FALSE(g.semantic_analyzed);
}

TEST_CASE("dependency graph of a chain") {
  Built b(parse_problemset(fixtures() / "chain" / "chain.py"));
  auto g = extract_dependencies(b.ps, b.gt);
  CHECK(g.max_chain_length() == 3);
  for (int d : g.in_degrees()) CHECK(d <= 1);
  REQUIRE(g.edges.size() == 2);
  CHECK(g.edges[0] == DependencyEdge{0, 1, DependencyKind::Session, {"v1"}});
  CHECK(g.edges[1] == DependencyEdge{1, 2, DependencyKind::Session, {"v2"}});
  auto dot = g.to_dot("chain");
  CHECK(dot.find("digraph") != std::string::npos);
  CHECK(dot.find("p0 -> p1") != std::string::npos);

  // Every session edge is real: without the writer the reader fails on the missing name.
  for (const auto& e : g.edges) {
    Session s(Session::Options{b.w.root / ("probe" + std::to_string(e.to))});
    REQUIRE(s.execute(b.ps.preamble).ok());
    for (int k = 0; k < e.to; ++k) {
      if (k != e.from) s.execute(b.ps.problems[k].reference_code);
    }
    auto r = s.execute(b.ps.problems[e.to].reference_code);
    REQUIRE(r.error.has_value());
    CHECK(r.error->kind == ErrorKind::Name);
  }
}

TEST_CASE("semantic edges come from the classifier") {
  Built b(parse_problemset(fixtures() / "chain" / "chain.py"));
  auto stub = std::make_shared<StubChatClient>(std::vector<std::string>{"no", "Yes.", "no"});
  auto g = extract_dependencies(b.ps, b.gt, llm_semantic_classifier(stub));
  CHECK(g.semantic_analyzed);
  CHECK(stub->calls() == 3);
  int semantic = 0;
  for (const auto& e : g.edges) semantic += e.kind == DependencyKind::Semantic;
  CHECK(semantic == 1);
}

TEST_CASE("outbreak problemset: dependencies, coverage and contexts") {
  Built b(parse_problemset(fixtures() / "analysis" / "outbreak.py"));
  auto g = extract_dependencies(b.ps, b.gt);
  bool first = false;
  for (const auto& e : g.edges) first |= e.from == 0 && e.to == 1;
  CHECK(first);
  CHECK(g.max_chain_length() >= 3);

  auto samples = context_samples(b.gt);
  REQUIRE(samples.size() == 8);
  CHECK(samples[0].variables == 0);
  auto summary = summarize_contexts(samples);
  CHECK(summary.max_variables >= 6);
  CHECK(summary.max_bytes > 0);
  CHECK(summary.problems == 8);

  Session probe(Session::Options{b.w.root / "probe"});
  auto cov = extract_api_coverage(b.ps, b.gt, probe);
  CHECK(cov.apis["pandas.read_csv"] == 1);
  CHECK(cov.apis["pandas.DataFrame.head"] == 1);
  CHECK(cov.apis["pandas.DataFrame.nlargest"] == 1);
  CHECK(cov.apis["pandas.DataFrame.groupby"] == 3);
  CHECK(cov.apis["pandas.DataFrame.[]"] >= 5);
  CHECK(cov.total() > 10);
}

TEST_CASE("api coverage naming") {
  Built b(from_text("# %%\nimport pandas as pd\ndf = pd.DataFrame({'a': [1, 2]})\n\n" +
                        cell("head", "df.head()") + cell("column", "df['a']") +
                        cell("helper", "def helper(v):\n    return v + 1\nhelper(2)"),
                    "api"));
  Session probe(Session::Options{b.w.root / "probe"});
  auto cov = extract_api_coverage(b.ps, b.gt, probe);
  CHECK(cov.apis["pandas.DataFrame.head"] == 1);
  CHECK(cov.apis["pandas.DataFrame.[]"] == 1);
  CHECK(cov.user["helper"] == 1);
  CHECK(cov.apis.count("helper") == 0);

  Built empty(from_text("# %%\nx = 1\n", "empty"));
  Session probe2(Session::Options{empty.w.root / "probe"});
  auto none = extract_api_coverage(empty.ps, empty.gt, probe2);
  CHECK(none.apis.empty());
  CHECK(none.total() == 0);

  ApiCoverage m;
  m.apis["len"] = 2;
  m.merge(cov);
  m.merge(cov);
  CHECK(m.apis["pandas.DataFrame.head"] == 2);
  CHECK(m.apis["len"] == 2);
}

TEST_CASE("context summary") {
  Built b(from_text("# %%\nx = 1\n\n" + cell("y", "y = x + 1"), "one"));
  auto s = summarize_contexts(context_samples(b.gt));
  CHECK_FALSE(s.empty);
  CHECK(s.problems == 1);
  CHECK(s.mean_variables == 1.0);
  CHECK(s.max_variables == 1);

  auto none = summarize_contexts({});
  CHECK(none.empty);
  CHECK(none.problems == 0);

  auto odd = summarize_contexts({{1, 10}, {2, 30}, {3, 20}});
  CHECK(odd.median_bytes == 20.0);
  CHECK(odd.max_bytes == 30);
  CHECK(odd.mean_variables == 2.0);
  auto even = summarize_contexts({{1, 10}, {2, 30}, {3, 20}, {4, 40}});
  CHECK(even.median_bytes == 25.0);
}

TEST_CASE("analyze_benchmark records") {
  AnalyzeOptions o;
  o.difficulty = o.dependencies = o.api_coverage = o.contexts = true;
  auto out = analyze_benchmark(fixtures() / "chain", o);
  std::map<std::string, int> kinds;
  for (const auto& r : out.records) ++kinds[r["kind"].get<std::string>()];
  CHECK(kinds["difficulty"] == 3);
  CHECK(kinds["difficulty_summary"] == 1);
  CHECK(kinds["dependencies"] == 1);
  CHECK(kinds["api_coverage"] == 1);
  CHECK(kinds["contexts"] == 2);
  CHECK(out.graphs.count("chain") == 1);
  for (const auto& i : out.integrity) CHECK(i.ok);

  AnalyzeOptions only;
  only.difficulty = true;
  auto d = analyze_benchmark(fixtures() / "chain", only);
  for (const auto& r : d.records) {
    auto k = r["kind"].get<std::string>();
    CHECK((k == "difficulty" || k == "difficulty_summary"));
  }
}
