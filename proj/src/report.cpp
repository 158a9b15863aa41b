#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "dseval/runner.hpp"
#include "dseval/util.hpp"

namespace dseval {

namespace {

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

std::string html_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&#39;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string md_cell(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '|') out += "\\|";
    else if (c == '\n') out += "<br>";
    else out += c;
  }
  return out;
}

/// Records grouped by agent, in first-seen order.
std::vector<std::pair<std::string, std::vector<EvaluationRecord>>> by_agent(const std::vector<EvaluationRecord>& rs) {
  std::vector<std::pair<std::string, std::vector<EvaluationRecord>>> out;
  for (const auto& r : rs) {
    auto it = std::find_if(out.begin(), out.end(), [&](const auto& g) { return g.first == r.agent; });
    if (it == out.end()) {
      out.push_back({r.agent, {}});
      it = std::prev(out.end());
    }
    it->second.push_back(r);
  }
  return out;
}

std::string error_prop_cell(const Metrics& m) { return m.error_prop_measured ? pct(m.pass_rate_error_prop) : "n/a"; }

const char* kPalette[] = {"#2e7d32", "#f9a825", "#ef6c00", "#c62828", "#6a1b9a", "#1565c0", "#4e342e", "#37474f", "#ad1457"};

std::string render_html(const std::vector<EvaluationRecord>& records, const Metrics& metrics,
                        const std::vector<IntegrityReport>& integrity) {
  std::ostringstream h;
  h << "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>Evaluation report</title>\n<style>\n"
       "body{font-family:sans-serif;margin:2em;max-width:1100px}table{border-collapse:collapse;margin:1em 0}"
       "td,th{border:1px solid #ccc;padding:4px 8px;text-align:left}th{background:#f3f3f3}"
       ".banner{padding:1em;background:#fff3cd;border:1px solid #e0c36b;margin:1em 0;font-weight:bold}"
       ".pie{width:180px;height:180px;border-radius:50%;display:inline-block;vertical-align:middle;margin-right:2em}"
       ".swatch{display:inline-block;width:12px;height:12px;margin-right:6px}"
       "pre{background:#f7f7f7;padding:6px;overflow-x:auto;margin:0}.pass{color:#2e7d32}.fail{color:#c62828}"
       "details{margin:2px 0}.code{display:flex;gap:1em}.code>div{flex:1;min-width:0}\n</style></head><body>\n";
  h << "<h1>Evaluation report</h1>\n";
  if (records.empty()) h << "<div class=\"banner\" id=\"no-records\">No records: nothing was evaluated.</div>\n";

  h << "<h2>Metrics</h2>\n<table id=\"metrics\"><tr><th>Agent</th><th>Problems</th><th>Pass Rate</th>"
       "<th>Error Prop</th><th>w/o Intact</th><th>w/o PE</th></tr>\n";
  auto groups = by_agent(records);
  auto row = [&](const std::string& name, const Metrics& m) {
    h << "<tr><td>" << html_escape(name) << "</td><td>" << m.total << "</td><td>" << pct(m.pass_rate) << "</td><td>"
      << error_prop_cell(m) << "</td><td>" << pct(m.pass_rate_wo_intact) << "</td><td>" << pct(m.pass_rate_wo_pe)
      << "</td></tr>\n";
  };
  if (groups.size() == 1) {
    row(groups[0].first, metrics);
  } else {
    for (const auto& [agent, rs] : groups) row(agent, aggregate_metrics(rs));
    if (groups.size() > 1) row("all", metrics);
  }
  if (groups.empty()) row("-", metrics);
  h << "</table>\n";

  h << "<h2>Verdict breakdown</h2>\n";
  int total = 0;
  for (const auto& [_, n] : metrics.category_counts) total += n;
  std::ostringstream grad;
  double acc = 0;
  int color = 0;
  std::ostringstream legend;
  legend << "<table id=\"breakdown\"><tr><th>Category</th><th>Count</th><th>Share</th></tr>\n";
  for (const auto& [cat, n] : metrics.category_counts) {
    const char* c = kPalette[color++ % (sizeof kPalette / sizeof *kPalette)];
    double share = total ? 100.0 * n / total : 0.0;
    if (acc > 0) grad << ",";
    grad << c << " " << pct(acc) << "% " << pct(acc + share) << "%";
    acc += share;
    legend << "<tr><td><span class=\"swatch\" style=\"background:" << c << "\"></span>" << html_escape(cat)
           << "</td><td>" << n << "</td><td>" << pct(share) << "%</td></tr>\n";
  }
  legend << "</table>\n";
  if (total > 0) h << "<div class=\"pie\" style=\"background:conic-gradient(" << grad.str() << ")\"></div>\n";
  h << legend.str();
  if (!metrics.verdict_counts.empty()) {
    h << "<table id=\"leaves\"><tr><th>Verdict</th><th>Count</th></tr>\n";
    for (const auto& [v, n] : metrics.verdict_counts) h << "<tr><td>" << html_escape(v) << "</td><td>" << n << "</td></tr>\n";
    h << "</table>\n";
  }
  h << "<script type=\"application/json\" id=\"breakdown-data\">"
    << html_escape(nlohmann::json(metrics.category_counts).dump()) << "</script>\n";

  bool skipped = false;
  for (const auto& i : integrity) skipped |= !i.ok;
  if (skipped) {
    h << "<h2>Skipped problemsets</h2>\n<table id=\"integrity\"><tr><th>Problemset</th><th>Problem</th><th>Reason</th></tr>\n";
    for (const auto& i : integrity) {
      if (i.ok) continue;
      h << "<tr><td>" << html_escape(i.problemset) << "</td><td>" << (i.problem < 0 ? "-" : std::to_string(i.problem))
        << "</td><td>" << html_escape(i.message) << "</td></tr>\n";
    }
    h << "</table>\n";
  }

  if (!records.empty()) {
    h << "<h2>Problems</h2>\n";
    for (const auto& r : records) {
      const bool ok = r.verdict.passed();
      h << "<details><summary><span class=\"" << (ok ? "pass" : "fail") << "\">" << html_escape(r.verdict.name())
        << "</span> &middot; " << html_escape(r.problemset) << " #" << r.problem_index << " &middot; "
        << mode_name(r.mode) << " &middot; attempts " << r.attempts << "</summary>\n";
      h << "<p>" << html_escape(r.query) << "</p>\n";
      if (!r.verdict.detail.empty()) h << "<p><b>Detail:</b> " << html_escape(r.verdict.detail) << "</p>\n";
      h << "<div class=\"code\"><div><b>Submission</b><pre>" << html_escape(r.submission_code)
        << "</pre></div><div><b>Reference</b><pre>" << html_escape(r.reference_code) << "</pre></div></div>\n";
      if (!r.execution.stream_output.empty())
        h << "<b>Output</b><pre>" << html_escape(r.execution.stream_output) << "</pre>\n";
      if (r.execution.execute_result) h << "<b>Result</b><pre>" << html_escape(*r.execution.execute_result) << "</pre>\n";
      if (r.execution.error) {
        h << "<b>Error</b><pre>" << html_escape(r.execution.error->ename + ": " + r.execution.error->message) << "</pre>\n";
      }
      h << "</details>\n";
    }
  }
  h << "</body></html>\n";
  return h.str();
}

std::string render_markdown(const std::vector<EvaluationRecord>& records, const Metrics& metrics,
                            const std::vector<IntegrityReport>& integrity) {
  std::ostringstream m;
  m << "# Evaluation report\n\n";
  if (records.empty()) m << "> **No records**: nothing was evaluated.\n\n";
  m << "| Agent | Problems | Pass Rate | Error Prop | w/o Intact | w/o PE |\n|---|---|---|---|---|---|\n";
  auto row = [&](const std::string& name, const Metrics& x) {
    m << "| " << md_cell(name) << " | " << x.total << " | " << pct(x.pass_rate) << " | " << error_prop_cell(x) << " | "
      << pct(x.pass_rate_wo_intact) << " | " << pct(x.pass_rate_wo_pe) << " |\n";
  };
  auto groups = by_agent(records);
  if (groups.size() == 1) row(groups[0].first, metrics);
  else if (groups.empty()) row("-", metrics);
  else {
    for (const auto& [agent, rs] : groups) row(agent, aggregate_metrics(rs));
    row("all", metrics);
  }
  if (!metrics.verdict_counts.empty()) {
    m << "\n| Verdict | Count |\n|---|---|\n";
    for (const auto& [v, n] : metrics.verdict_counts) m << "| " << md_cell(v) << " | " << n << " |\n";
  }
  bool skipped = false;
  for (const auto& i : integrity) skipped |= !i.ok;
  if (skipped) {
    m << "\n## Skipped problemsets\n\n| Problemset | Problem | Reason |\n|---|---|---|\n";
    for (const auto& i : integrity) {
      if (!i.ok) m << "| " << md_cell(i.problemset) << " | " << (i.problem < 0 ? "-" : std::to_string(i.problem)) << " | "
                   << md_cell(i.message) << " |\n";
    }
  }
  if (!records.empty()) {
    m << "\n## Problems\n\n| Problemset | # | Mode | Verdict | Attempts |\n|---|---|---|---|---|\n";
    for (const auto& r : records) {
      m << "| " << md_cell(r.problemset) << " | " << r.problem_index << " | " << mode_name(r.mode) << " | "
        << md_cell(r.verdict.name()) << " | " << r.attempts << " |\n";
    }
  }
  return m.str();
}

}  // namespace

ReportFormat report_format_for(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  if (ext == ".jsonl" || ext == ".ndjson") return ReportFormat::Jsonl;
  if (ext == ".html" || ext == ".htm") return ReportFormat::Html;
  if (ext == ".md" || ext == ".markdown") return ReportFormat::Markdown;
  throw ConfigError("cannot tell the report format of '" + path.string() + "' (use .jsonl, .html or .md)");
}

std::string render_report(const std::vector<EvaluationRecord>& records, const Metrics& metrics, ReportFormat format,
                          const std::vector<IntegrityReport>& integrity) {
  switch (format) {
    case ReportFormat::Jsonl: {
      std::string out;
      for (const auto& r : records) out += record_to_json(r).dump() + "\n";
      return out;
    }
    case ReportFormat::Html: return render_html(records, metrics, integrity);
    case ReportFormat::Markdown: return render_markdown(records, metrics, integrity);
  }
  return {};
}

void emit_report(const std::vector<EvaluationRecord>& records, const Metrics& metrics, ReportFormat format,
                 const std::filesystem::path& path, const std::vector<IntegrityReport>& integrity) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  try {
    write_file(path, render_report(records, metrics, format, integrity));
  } catch (const std::exception& e) {
    throw Error("cannot write report " + path.string() + ": " + e.what());
  }
}

}  // namespace dseval
