#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "dseval/analysis.hpp"
#include "dseval/annotator.hpp"
#include "dseval/runner.hpp"
#include "dseval/util.hpp"

using namespace dseval;
namespace fs = std::filesystem;

namespace {

std::vector<RunMode> parse_modes(const std::string& s) {
  if (s == "both") return {RunMode::Reset, RunMode::Propagate};
  return {mode_from_name(s)};
}

void print_metrics(const RunResult& r) {
  const auto& m = r.metrics;
  std::cout << "records: " << r.records.size() << "\n";
  char prop[16] = "n/a";
  if (m.error_prop_measured) std::snprintf(prop, sizeof prop, "%.1f", m.pass_rate_error_prop);
  std::printf("pass rate: %.1f  error prop: %s  w/o intact: %.1f  w/o PE: %.1f\n", m.pass_rate, prop,
              m.pass_rate_wo_intact, m.pass_rate_wo_pe);
  for (const auto& i : r.integrity) {
    if (!i.ok) std::cout << "skipped " << i.problemset << ": " << i.message << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Evaluation harness for data-science agents"};
  app.require_subcommand(1);

  RunConfig run;
  std::string mode = "reset", repair = "none", context = "VCQ", report;
  auto* cmd_run = app.add_subcommand("run", "Evaluate an agent on a benchmark");
  cmd_run->add_option("--benchmark", run.benchmark, "Directory of problemset files (or one file)")->required();
  cmd_run->add_option("--agent", run.agent_spec, "oracle | scripted:FILE | process:CMD | llm:stub:FILE | llm:openai:FILE");
  cmd_run->add_option("--mode", mode, "reset | propagate | both");
  cmd_run->add_option("--repair", repair, "none | self-debug | resample");
  cmd_run->add_option("--max-attempts", run.max_attempts)->check(CLI::PositiveNumber);
  cmd_run->add_option("--parallel", run.parallel)->check(CLI::PositiveNumber);
  cmd_run->add_option("--out", run.out, "Records file (JSON lines)");
  cmd_run->add_option("--report", report, "Report file: .html, .md or .jsonl");
  cmd_run->add_option("--context-order", context, "Context layout for prompting agents, e.g. VCQ");
  cmd_run->add_option("--agent-timeout", run.agent_timeout, "Seconds per agent call");
  cmd_run->add_option("--cache-dir", run.data.cache_dir, "Data download cache");
  cmd_run->add_flag("--offline", run.data.offline, "Fail on data cache misses instead of downloading");
  cmd_run->add_option("--work-dir", run.work_root, "Keep session directories here");
  cmd_run->add_option("--python", run.python, "Python interpreter for sessions");

  std::string validate_path;
  bool validate_quiet = false;
  auto* cmd_validate = app.add_subcommand("validate-file", "Parse a problemset and check its ground truth");
  cmd_validate->add_option("path", validate_path)->required();
  cmd_validate->add_flag("--quiet", validate_quiet);

  AnalyzeOptions analyze;
  std::string analyze_bench, analyze_out, graph_dir, analyze_llm;
  auto* cmd_analyze = app.add_subcommand("analyze", "Benchmark statistics");
  cmd_analyze->add_option("--benchmark", analyze_bench)->required();
  cmd_analyze->add_flag("--difficulty", analyze.difficulty);
  cmd_analyze->add_flag("--deps", analyze.dependencies);
  cmd_analyze->add_flag("--api-coverage", analyze.api_coverage);
  cmd_analyze->add_flag("--contexts", analyze.contexts);
  cmd_analyze->add_option("--out", analyze_out, "JSON-lines output (stdout when absent)");
  cmd_analyze->add_option("--graph-dir", graph_dir, "Write one DOT dependency graph per problemset");
  cmd_analyze->add_option("--llm", analyze_llm, "Chat model for semantic dependencies: stub:FILE | openai:FILE");

  AnnotateConfig annotate;
  std::string stage;
  auto* cmd_annotate = app.add_subcommand("annotate", "LLM-bootstrapped problemset annotation");
  cmd_annotate->add_option("--seeds", annotate.seeds_dir)->required();
  cmd_annotate->add_option("--workspace", annotate.workspace)->required();
  cmd_annotate->add_option("--llm", annotate.llm_spec, "stub:FILE | openai:FILE")->required();
  cmd_annotate->add_option("--stage", stage, "sketch | draft | accept")->required();
  cmd_annotate->add_option("--prompts", annotate.prompts_dir, "Prompt template directory");
  cmd_annotate->add_option("--seed", annotate.random_seed, "Few-shot selection seed");
  cmd_annotate->add_option("--max-retries", annotate.max_draft_attempts, "Draft attempts before human repair");
  cmd_annotate->add_option("--notes", annotate.notes, "Revision notes recorded on accept");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*cmd_run) {
      run.modes = parse_modes(mode);
      run.repair = repair_from_name(repair);
      run.context_order = ContextOrder::parse(context);
      if (!report.empty()) run.reports.push_back(report);
      run.on_record = [](const EvaluationRecord& r) {
        std::cerr << r.problemset << " #" << r.problem_index << " [" << mode_name(r.mode) << "] " << r.verdict.name()
                  << "\n";
      };
      auto result = run_benchmark(run);
      print_metrics(result);
      if (!result.completed()) {
        std::cerr << "run aborted: " << *result.abort_reason << "\n";
        return 1;
      }
      return 0;
    }
    if (*cmd_validate) {
      auto ps = parse_problemset(validate_path);
      if (serialize_problemset(parse_problemset_text(serialize_problemset(ps), ps.id)) != serialize_problemset(ps)) {
        std::cerr << validate_path << ": serialization is not a fixpoint\n";
        return 1;
      }
      auto rep = check_integrity(ps, Session::Options{});
      if (!rep.ok) {
        std::cerr << validate_path << ": " << rep.message << "\n";
        return 1;
      }
      if (!validate_quiet) std::cout << validate_path << ": " << ps.problems.size() << " problems, ok\n";
      return 0;
    }
    if (*cmd_analyze) {
      if (!analyze.difficulty && !analyze.dependencies && !analyze.api_coverage && !analyze.contexts) {
        analyze.difficulty = analyze.dependencies = analyze.api_coverage = analyze.contexts = true;
      }
      if (!analyze_llm.empty()) analyze.semantic = llm_semantic_classifier(make_chat_client(analyze_llm));
      auto lines = analyze_benchmark(analyze_bench, analyze);
      std::string text;
      for (const auto& l : lines.records) text += l.dump() + "\n";
      if (analyze_out.empty()) std::cout << text;
      else write_file(analyze_out, text);
      if (!graph_dir.empty()) {
        fs::create_directories(graph_dir);
        for (const auto& [id, dot] : lines.graphs) write_file(fs::path(graph_dir) / (id + ".dot"), dot);
      }
      for (const auto& i : lines.integrity) {
        if (!i.ok) std::cerr << "skipped " << i.problemset << ": " << i.message << "\n";
      }
      return 0;
    }
    if (*cmd_annotate) {
      annotate.stage = annotation_stage_from_name(stage);
      auto summary = run_annotation(annotate);
      std::cout << summary.dump(2) << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
