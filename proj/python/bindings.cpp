#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "dseval/analysis.hpp"
#include "dseval/annotator.hpp"
#include "dseval/errors.hpp"
#include "dseval/runner.hpp"
#include "dseval/syntax.hpp"
#include "dseval/util.hpp"

namespace py = pybind11;
using namespace dseval;

namespace {

py::object to_py(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }
py::object to_py(const nlohmann::ordered_json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

nlohmann::json from_py(const py::handle& o) {
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

py::dict problemset_dict(const Problemset& ps) {
  py::list problems;
  for (const auto& p : ps.problems) {
    py::dict d;
    d["index"] = p.index;
    d["query"] = p.query;
    d["config"] = serialize_problem_config(p);
    d["reference_code"] = p.reference_code;
    py::dict data;
    for (const auto& [name, url] : p.data) data[py::str(name)] = url;
    d["data"] = data;
    if (p.execution.max_time) d["max_time"] = *p.execution.max_time;
    d["forbid_names"] = p.execution.forbid_names;
    problems.append(d);
  }
  py::dict out;
  out["id"] = ps.id;
  out["preamble"] = ps.preamble;
  out["problems"] = problems;
  return out;
}

py::dict integrity_dict(const IntegrityReport& r) {
  py::dict d;
  d["problemset"] = r.problemset;
  d["ok"] = r.ok;
  d["problem"] = r.problem;
  d["message"] = r.message;
  return d;
}

// Python callable agent: receives the request as a dict, returns code or a response dict.
class CallableAgent : public Agent {
 public:
  explicit CallableAgent(py::function fn) : fn_(std::move(fn)) {}
  ~CallableAgent() override {
    py::gil_scoped_acquire gil;
    fn_ = py::function();
  }
  AgentResponse act(const AgentRequest& request) override {
    py::gil_scoped_acquire gil;
    try {
      py::object out = fn_(to_py(request_to_json(request)));
      if (py::isinstance<py::str>(out)) {
        auto code = out.cast<std::string>();
        return AgentResponse{code, code, std::nullopt};
      }
      return response_from_json(from_py(out));
    } catch (py::error_already_set& e) {
      throw TransportError(std::string("python agent: ") + e.what());
    }
  }
  std::string id() const override { return "python"; }
  bool concurrent_safe() const override { return false; }

 private:
  py::function fn_;
};

struct PySnapshot {
  SnapshotPtr ptr;
};

std::vector<RunMode> modes_of(const std::string& s) {
  if (s == "both") return {RunMode::Reset, RunMode::Propagate};
  return {mode_from_name(s)};
}

}  // namespace

PYBIND11_MODULE(_dseval, m) {
  m.doc() = "Evaluation harness for data-science agents";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<IntegrityError>(m, "IntegrityError", base.ptr());
  py::register_exception<ProvisionError>(m, "ProvisionError", base.ptr());
  py::register_exception<TransportError>(m, "TransportError", base.ptr());
  py::register_exception<KernelError>(m, "KernelError", base.ptr());

  m.def("parse_problemset", [](const std::filesystem::path& p) { return problemset_dict(parse_problemset(p)); },
        py::arg("path"));
  m.def(
      "parse_problemset_text",
      [](const std::string& text, const std::string& id) { return problemset_dict(parse_problemset_text(text, id)); },
      py::arg("text"), py::arg("id") = "problemset");
  m.def(
      "normalize_problemset", [](const std::string& text) { return serialize_problemset(parse_problemset_text(text, "x")); },
      py::arg("text"), "Parses and re-serializes problemset text.");

  m.def(
      "check_integrity",
      [](const std::filesystem::path& p) {
        IntegrityReport r;
        {
          py::gil_scoped_release nogil;
          r = check_integrity(p, Session::Options{});
        }
        return integrity_dict(r);
      },
      py::arg("path"));

  m.def(
      "score_difficulty",
      [](const std::string& code) {
        auto d = score_difficulty(code);
        py::dict out;
        out["calls"] = d.calls;
        out["expressions"] = d.expressions;
        out["conditions"] = d.conditions;
        out["loops"] = d.loops;
        out["total"] = d.total();
        return out;
      },
      py::arg("code"));

  m.def("verdict_leaves", [] {
    std::vector<std::string> names;
    for (const auto& [c, s] : verdict_leaves()) names.push_back(Verdict{c, s, ""}.name());
    return names;
  });

  m.def(
      "aggregate_metrics",
      [](const py::list& records) {
        std::vector<EvaluationRecord> rs;
        for (const auto& r : records) rs.push_back(record_from_json(from_py(r)));
        return to_py(metrics_to_json(aggregate_metrics(rs)));
      },
      py::arg("records"));

  m.def(
      "run",
      [](const std::filesystem::path& benchmark, py::object agent, const std::string& mode, const std::string& repair,
         int max_attempts, int parallel, std::optional<std::filesystem::path> out,
         std::vector<std::filesystem::path> reports, const std::string& context_order, bool offline,
         std::optional<std::filesystem::path> cache_dir) {
        RunConfig cfg;
        cfg.benchmark = benchmark;
        if (py::isinstance<py::str>(agent)) {
          cfg.agent_spec = agent.cast<std::string>();
        } else if (py::isinstance<py::function>(agent)) {
          cfg.agent = std::make_shared<CallableAgent>(agent.cast<py::function>());
        } else {
          throw ConfigError("agent must be a spec string or a callable");
        }
        cfg.modes = modes_of(mode);
        cfg.repair = repair_from_name(repair);
        cfg.max_attempts = max_attempts;
        cfg.parallel = parallel;
        if (out) cfg.out = *out;
        cfg.reports = std::move(reports);
        cfg.context_order = ContextOrder::parse(context_order);
        cfg.data.offline = offline;
        if (cache_dir) cfg.data.cache_dir = *cache_dir;
        RunResult res;
        {
          py::gil_scoped_release nogil;
          res = run_benchmark(cfg);
        }
        py::list records;
        for (const auto& r : res.records) records.append(to_py(record_to_json(r)));
        py::list integrity;
        for (const auto& i : res.integrity) integrity.append(integrity_dict(i));
        py::dict d;
        d["records"] = records;
        d["metrics"] = to_py(metrics_to_json(res.metrics));
        d["integrity"] = integrity;
        d["abort_reason"] = res.abort_reason ? py::object(py::str(*res.abort_reason)) : py::object(py::none());
        return d;
      },
      py::arg("benchmark"), py::arg("agent") = "oracle", py::arg("mode") = "reset", py::arg("repair") = "none",
      py::arg("max_attempts") = 1, py::arg("parallel") = 1, py::arg("out") = py::none(),
      py::arg("reports") = std::vector<std::filesystem::path>{}, py::arg("context_order") = "VCQ",
      py::arg("offline") = false, py::arg("cache_dir") = py::none());

  m.def(
      "analyze",
      [](const std::filesystem::path& benchmark, bool difficulty, bool dependencies, bool api_coverage, bool contexts) {
        AnalyzeOptions o;
        o.difficulty = difficulty;
        o.dependencies = dependencies;
        o.api_coverage = api_coverage;
        o.contexts = contexts;
        AnalysisOutput out;
        {
          py::gil_scoped_release nogil;
          out = analyze_benchmark(benchmark, o);
        }
        py::list records;
        for (const auto& r : out.records) records.append(to_py(r));
        return records;
      },
      py::arg("benchmark"), py::arg("difficulty") = true, py::arg("dependencies") = true,
      py::arg("api_coverage") = true, py::arg("contexts") = true);

  m.def(
      "annotate",
      [](const std::filesystem::path& seeds, const std::filesystem::path& workspace, const std::string& llm,
         const std::string& stage, std::uint64_t seed, int max_retries, const std::string& notes) {
        AnnotateConfig cfg;
        cfg.seeds_dir = seeds;
        cfg.workspace = workspace;
        cfg.llm_spec = llm;
        cfg.stage = annotation_stage_from_name(stage);
        cfg.random_seed = seed;
        cfg.max_draft_attempts = max_retries;
        cfg.notes = notes;
        nlohmann::ordered_json summary;
        {
          py::gil_scoped_release nogil;
          summary = run_annotation(cfg);
        }
        return to_py(summary);
      },
      py::arg("seeds"), py::arg("workspace"), py::arg("llm"), py::arg("stage"), py::arg("seed") = 0,
      py::arg("max_retries") = 3, py::arg("notes") = "");

  py::class_<Session>(m, "Session")
      .def(py::init([](std::optional<std::filesystem::path> workdir, double max_time) {
             Session::Options o;
             o.workdir = workdir ? *workdir : make_temp_dir("dseval-py");
             o.default_max_time = max_time;
             return std::make_unique<Session>(o);
           }),
           py::arg("workdir") = py::none(), py::arg("max_time") = 30.0)
      .def(
          "execute",
          [](Session& s, const std::string& code, std::optional<double> max_time) {
            ExecutionConfig ex;
            ex.max_time = max_time;
            ExecutionResult r;
            {
              py::gil_scoped_release nogil;
              r = s.execute(code, ex);
            }
            return to_py(execution_result_to_json(r));
          },
          py::arg("code"), py::arg("max_time") = py::none())
      .def("snapshot", [](Session& s) { return PySnapshot{s.snapshot()}; })
      .def("restore", [](Session& s, const PySnapshot& snap) { s.restore(*snap.ptr); })
      .def("reset", &Session::reset)
      .def("variable_names", &Session::variable_names)
      .def("describe_variables",
           [](Session& s, bool verbose) {
             return s.describe_variables(verbose ? DescribeStyle::Verbose : DescribeStyle::Compact);
           },
           py::arg("verbose") = false)
      .def_property_readonly("code_history", &Session::code_history)
      .def_property_readonly("console_log", &Session::console_log);

  py::class_<PySnapshot>(m, "Snapshot")
      .def_property_readonly("execution_count", [](const PySnapshot& s) { return s.ptr->execution_count; })
      .def_property_readonly("needs_replay", [](const PySnapshot& s) { return s.ptr->needs_replay(); });
}
