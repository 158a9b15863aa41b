import json

import pytest

import dseval


def test_parse_and_normalize(fixtures):
    ps = dseval.parse_problemset(fixtures / "chain" / "chain.py")
    assert ps["id"] == "chain"
    assert [p["index"] for p in ps["problems"]] == [0, 1, 2]
    assert "namespace_check" in ps["problems"][0]["config"]
    text = (fixtures / "chain" / "chain.py").read_text()
    once = dseval.normalize_problemset(text)
    assert dseval.normalize_problemset(once) == once


def test_parse_error_is_typed():
    with pytest.raises(dseval.ParseError):
        dseval.parse_problemset_text('# %%\nx = 1\n\n# %%\n"""\nquery: [oops\n"""\n\nx\n')
    assert issubclass(dseval.ParseError, dseval.Error)


def test_verdict_catalog_and_metrics():
    leaves = dseval.verdict_leaves()
    assert len(leaves) == 32
    assert "Presentation Error / Missing Return" in leaves
    base = {"benchmark": "b", "problemset": "p", "problem_index": 0, "agent": "a", "mode": "reset"}
    recs = [dict(base, verdict="Correct")] * 3 + [dict(base, verdict="Crash")]
    m = dseval.aggregate_metrics(recs)
    assert m["pass_rate"] == 75.0


def test_difficulty():
    assert dseval.score_difficulty("")["total"] == 0
    s = dseval.score_difficulty("f(x)")
    assert s["calls"] == 1 and s["expressions"] >= 1


def test_session_snapshot_restore(tmp_path):
    s = dseval.Session(tmp_path / "s")
    assert s.execute("x = 41")["error"] is None
    snap = s.snapshot()
    s.execute("x += 1")
    assert s.execute("x")["execute_result"]["repr"] == "42"
    s.restore(snap)
    assert s.execute("x")["execute_result"]["repr"] == "41"
    assert "x" in s.variable_names()
    err = s.execute("1 / 0")["error"]
    assert err["ename"] == "ZeroDivisionError"


def test_oracle_run(fixtures, tmp_path):
    out = tmp_path / "records.jsonl"
    res = dseval.run(fixtures / "chain", mode="both", out=out, reports=[tmp_path / "r.html"])
    assert res["abort_reason"] is None
    assert res["metrics"]["pass_rate"] == 100.0
    assert len(res["records"]) == 6
    assert len(out.read_text().splitlines()) == 6
    assert (tmp_path / "r.html").exists()


def test_python_callable_agent(fixtures):
    ps = dseval.parse_problemset(fixtures / "chain" / "chain.py")
    refs = {p["index"]: p["reference_code"] for p in ps["problems"]}
    seen = []

    def agent(request):
        seen.append(request)
        if request["problem_index"] == 0 and request["attempt"] == 1:
            return "v1 = undefined_thing"
        return {"code": refs[request["problem_index"]]}

    res = dseval.run(fixtures / "chain", agent=agent, repair="self-debug", max_attempts=2)
    assert res["metrics"]["pass_rate"] == 100.0
    assert res["records"][0]["attempts"] == 2
    assert seen[1]["repair_feedback"]["error"].startswith("NameError")


def test_failing_callable_aborts(fixtures):
    def agent(request):
        raise RuntimeError("backend down")

    res = dseval.run(fixtures / "chain", agent=agent)
    assert res["abort_reason"] and "backend down" in res["abort_reason"]
    assert res["records"] == []


def test_analyze(fixtures):
    records = dseval.analyze(fixtures / "chain")
    deps = [r for r in records if r["kind"] == "dependencies"]
    assert deps and deps[0]["max_chain_length"] == 3


def test_integrity(fixtures, tmp_path):
    assert dseval.check_integrity(fixtures / "chain" / "chain.py")["ok"]
    bad = tmp_path / "bad.py"
    bad.write_text('# %%\nx = 1\n\n# %%\n"""\nquery: crash\n"""\n\n1 / 0\n')
    rep = dseval.check_integrity(bad)
    assert not rep["ok"] and rep["problem"] == 0


def test_annotate_cycle(fixtures, tmp_path):
    cycle = json.loads((fixtures / "annotator" / "cycle.json").read_text())["responses"]
    (tmp_path / "sketch.json").write_text(json.dumps(cycle[:2]))
    (tmp_path / "draft.json").write_text(json.dumps(cycle[2:]))
    seeds, ws = fixtures / "annotator" / "seeds", tmp_path / "ws"
    dseval.annotate(seeds, ws, f"stub:{tmp_path / 'sketch.json'}", "sketch")
    dseval.annotate(seeds, ws, f"stub:{tmp_path / 'draft.json'}", "draft")
    summary = dseval.annotate(seeds, ws, f"stub:{tmp_path / 'draft.json'}", "accept", notes="ok")
    assert summary["pool_size"] == 1
    assert (ws / "accepted" / "grades.py").exists()
