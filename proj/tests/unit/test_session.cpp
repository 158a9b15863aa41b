#include <doctest.h>

#include <chrono>

#include "dseval/errors.hpp"
#include "dseval/session.hpp"
#include "dseval/util.hpp"

using namespace dseval;

namespace {

Session make_session() { return Session(Session::Options{make_temp_dir("dseval-test")}); }

double elapsed_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

}  // namespace

TEST_CASE("fresh session evaluates an expression") {
  auto s = make_session();
  auto r = s.execute("1 + 1");
  CHECK(r.ok());
  REQUIRE(r.execute_result.has_value());
  CHECK(*r.execute_result == Value::integer(2));
  CHECK(r.stream_output.empty());
  CHECK(r.duration >= 0);
  CHECK(s.execution_count() == 1);
}

TEST_CASE("statements without a trailing expression have no result") {
  auto s = make_session();
  auto r = s.execute("x = 3\nprint('hi', x)");
  CHECK(r.ok());
  CHECK_FALSE(r.execute_result.has_value());
  CHECK(r.stream_output == "hi 3\n");
  CHECK(s.console_log() == "hi 3\n");
}

TEST_CASE("runtime errors map to kinds") {
  auto s = make_session();
  CHECK(s.execute("import no_such_module_xyz").error->kind == ErrorKind::ModuleNotFound);
  CHECK(s.execute("(1).nope").error->kind == ErrorKind::Attribute);
  CHECK(s.execute("{}['k']").error->kind == ErrorKind::Key);
  CHECK(s.execute("undefined_name").error->kind == ErrorKind::Name);
  CHECK(s.execute("'a' > 1").error->kind == ErrorKind::Type);
  CHECK(s.execute("int('x')").error->kind == ErrorKind::Value);
  CHECK(s.execute("x = = 1").error->kind == ErrorKind::Syntax);
  CHECK(s.execute("1 / 0").error->kind == ErrorKind::Other);
  auto r = s.execute("raise RuntimeError('boom')");
  CHECK(r.error->ename == "RuntimeError");
  CHECK(r.error->message == "boom");
  CHECK_FALSE(r.execute_result.has_value());
}

TEST_CASE("sleeping past max_time times out and leaves state unchanged") {
  auto s = make_session();
  s.execute("x = 1");
  ExecutionConfig ex;
  ex.max_time = 0.5;
  auto t0 = std::chrono::steady_clock::now();
  auto r = s.execute("import time\nx = 2\ntime.sleep(1)", ex);
  double took = elapsed_since(t0);
  REQUIRE(r.error.has_value());
  CHECK(r.error->kind == ErrorKind::Timeout);
  CHECK(took < 1.0);
  CHECK(s.execute("x").execute_result == Value::integer(1));
  CHECK(s.execution_count() == 2);
}

TEST_CASE("code that blocks the interrupt is killed within the bound") {
  auto s = make_session();
  s.execute("y = 41");
  ExecutionConfig ex;
  ex.max_time = 0.5;
  auto t0 = std::chrono::steady_clock::now();
  auto r = s.execute("import signal, time\nsignal.pthread_sigmask(signal.SIG_BLOCK, [signal.SIGALRM])\ntime.sleep(3)",
                     ex);
  double took = elapsed_since(t0);
  REQUIRE(r.error.has_value());
  CHECK(r.error->kind == ErrorKind::Timeout);
  CHECK(took < 1.0);
  // the kernel is rebuilt from history on the next request
  CHECK(s.execute("y + 1").execute_result == Value::integer(42));
}

TEST_CASE("forbidden names are refused before running") {
  auto s = make_session();
  s.execute("pop_heldout_test = 5\nz = 0");
  ExecutionConfig ex;
  ex.forbid_names = {"pop_heldout_test"};
  auto r = s.execute("z = pop_heldout_test + 1", ex);
  REQUIRE(r.error.has_value());
  CHECK(r.error->kind == ErrorKind::ForbiddenName);
  CHECK(s.execute("z").execute_result == Value::integer(0));
  CHECK(s.execute("globals()['pop_held' + 'out_test']", ex).ok());  // static scan only
  CHECK(s.execute("z = pop_heldout_test", ex, false).ok());
}

TEST_CASE("snapshot and restore of a mutated table") {
  auto s = make_session();
  s.execute("import pandas as pd\ndf = pd.DataFrame({'a': [1, 2, 3], 'b': ['x', 'y', 'z']})");
  auto before = s.export_values();
  auto snap = s.snapshot();
  CHECK(snap->created_at_execution_count() == 1);
  s.execute("df['a'] = df['a'] * 10\ndf.drop(index=0, inplace=True)\nnew_var = 1");
  CHECK_FALSE(s.export_values() == before);
  s.restore(*snap);
  CHECK(s.export_values() == before);
  CHECK(s.execution_count() == 1);
  CHECK(s.execute("pd.__name__").execute_result == Value::str("pandas"));
}

TEST_CASE("empty session snapshot restores to an empty namespace") {
  auto s = make_session();
  auto snap = s.snapshot();
  s.execute("a = 1");
  s.restore(*snap);
  CHECK(s.variable_names().empty());
}

TEST_CASE("unserializable values fall back to replay") {
  auto s = make_session();
  s.execute("g = (i for i in range(3))\nk = 7");
  auto snap = s.snapshot();
  CHECK(snap->replayed == std::vector<std::string>{"g"});
  s.execute("del g\nk = 8");
  s.restore(*snap);
  CHECK(s.execute("k").execute_result == Value::integer(7));
  CHECK(s.execute("next(g)").execute_result == Value::integer(0));
  CHECK_THROWS_AS(s.snapshot(false), SnapshotUnsupported);
  try {
    s.snapshot(false);
  } catch (const SnapshotUnsupported& e) {
    CHECK(e.variable() == "g");
  }
}

TEST_CASE("describe_variables styles") {
  auto s = make_session();
  CHECK(s.describe_variables(DescribeStyle::Compact).empty());
  s.execute("import pandas as pd\ntbl = pd.DataFrame({'city': ['a', 'b', 'a'], 'n': [1, 2, 2]})");
  auto compact = s.describe_variables(DescribeStyle::Compact);
  CHECK(compact.find("tbl") != std::string::npos);
  CHECK(compact.find("(3, 2)") != std::string::npos);
  CHECK(compact.find("city") != std::string::npos);
  CHECK(compact.find("'n'") != std::string::npos);
  CHECK(compact.find("int64") == std::string::npos);
  auto verbose = s.describe_variables(DescribeStyle::Verbose);
  CHECK(verbose.find("city: object, 2 unique") != std::string::npos);
  CHECK(verbose.find("n: int64, 2 unique") != std::string::npos);
}

TEST_CASE("sessions are isolated and deterministic") {
  auto a = make_session();
  auto b = make_session();
  const char* code = "import random\nrandom.seed(3)\nv = [random.random() for _ in range(3)]\nw = {'k': v[0]}";
  a.execute(code);
  b.execute(code);
  CHECK(a.export_values() == b.export_values());
  a.execute("only_a = 1");
  CHECK(b.variable_names() == std::vector<std::string>{"v", "w"});
}

TEST_CASE("ground truth chains snapshots") {
  auto s = make_session();
  SUBCASE("preamble only") {
    auto ps = parse_problemset_text("import math\n", "p");
    CHECK(build_ground_truth(ps, s).steps.empty());
  }
  SUBCASE("second problem sees the first one's variable") {
    auto ps = parse_problemset_text(
        "base = 2\n# %%\n\"\"\"\nquery: make v\n\"\"\"\nv = base * 3\n# %%\n\"\"\"\nquery: use v\n\"\"\"\nv + 1\n", "p");
    auto gt = build_ground_truth(ps, s);
    REQUIRE(gt.steps.size() == 2);
    CHECK(gt.steps[1].pre_values.count("v") == 1);
    CHECK(gt.steps[0].post == gt.steps[1].pre);
    CHECK(gt.steps[0].changed == std::set<std::string>{"v"});
    CHECK(gt.steps[1].changed.empty());
    CHECK(gt.steps[1].reference_result.execute_result == Value::integer(7));
    s.restore(*gt.steps[1].pre);
    CHECK(s.execute("v").execute_result == Value::integer(6));
  }
  SUBCASE("crashing reference is an integrity error") {
    auto ps = parse_problemset_text("# %%\n\"\"\"\nquery: a\n\"\"\"\nx = 1\n# %%\n\"\"\"\nquery: b\n\"\"\"\ny = nope\n", "p");
    try {
      build_ground_truth(ps, s);
      FAIL("expected IntegrityError");
    } catch (const IntegrityError& e) {
      CHECK(e.problem() == 1);
    }
  }
}

TEST_CASE("execution results serialize") {
  ExecutionResult r;
  r.execute_result = Value::real(0.5);
  r.stream_output = "x";
  r.duration = 0.25;
  auto back = execution_result_from_json(nlohmann::json::parse(execution_result_to_json(r).dump()));
  CHECK(back.execute_result == r.execute_result);
  CHECK(back.stream_output == "x");
  r.execute_result.reset();
  r.error = ExecError{ErrorKind::Key, "KeyError", "'k'", "tb"};
  back = execution_result_from_json(nlohmann::json::parse(execution_result_to_json(r).dump()));
  CHECK(back.error == r.error);
}
