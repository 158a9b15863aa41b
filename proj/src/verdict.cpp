#include "dseval/verdict.hpp"

#include <algorithm>
#include <array>

#include "dseval/errors.hpp"
#include "dseval/syntax.hpp"
#include "dseval/util.hpp"

namespace dseval {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

constexpr std::array<std::pair<VerdictCategory, const char*>, 9> kCategoryNames{{
    {VerdictCategory::Correct, "Correct"},
    {VerdictCategory::IntactViolation, "Intact Violation"},
    {VerdictCategory::PresentationError, "Presentation Error"},
    {VerdictCategory::WrongOutput, "Wrong Output"},
    {VerdictCategory::WrongVariables, "Wrong Variables"},
    {VerdictCategory::UnitTestFailure, "Unit-test Failure"},
    {VerdictCategory::Timeout, "Timeout"},
    {VerdictCategory::Crash, "Crash"},
    {VerdictCategory::SyntaxError, "Syntax Error"},
}};

constexpr std::array<std::pair<Subverdict, const char*>, 17> kSubverdictNames{{
    {Subverdict::None, ""},
    {Subverdict::IndexMismatch, "Index Mismatch"},
    {Subverdict::MissingReturn, "Missing Return"},
    {Subverdict::PartialMatch, "Partial Match"},
    {Subverdict::NonCode, "Non-code"},
    {Subverdict::ShapeMismatch, "Shape Mismatch"},
    {Subverdict::DtypeMismatch, "Dtype Mismatch"},
    {Subverdict::ColumnsMismatch, "Columns Mismatch"},
    {Subverdict::ValueMismatch, "Value Mismatch"},
    {Subverdict::UnexpectedType, "Unexpected Type"},
    {Subverdict::Others, "Others"},
    {Subverdict::ModuleNotFound, "Module Not Found"},
    {Subverdict::AttributeError, "Attribute Error"},
    {Subverdict::KeyError, "Key Error"},
    {Subverdict::NameError, "Name Error"},
    {Subverdict::TypeError, "Type Error"},
    {Subverdict::ValueError, "Value Error"},
}};

const std::vector<Subverdict> kComparisonSubs{Subverdict::ShapeMismatch,   Subverdict::DtypeMismatch,
                                              Subverdict::ColumnsMismatch, Subverdict::ValueMismatch,
                                              Subverdict::UnexpectedType,  Subverdict::Others};

Verdict make(VerdictCategory c, Subverdict s, std::string detail) { return Verdict{c, s, std::move(detail)}; }

bool is_output_leaf(ValidatorKind k) {
  return k == ValidatorKind::ExecuteResult || k == ValidatorKind::StreamOutput || k == ValidatorKind::AnswerInSource;
}

bool is_frame_like(const Value& v) {
  return v.kind() == ValueKind::Table || v.kind() == ValueKind::Series;
}

std::string level_name(const std::optional<std::string>& n, std::size_t level, std::size_t levels) {
  if (n) return *n;
  return levels == 1 ? "index" : "level_" + std::to_string(level);
}

/// Index levels become leading columns; the new index is positional.
TableValue reset_index(const TableValue& t) {
  TableValue out;
  const std::size_t levels = std::max<std::size_t>(1, t.index.names.size());
  const std::size_t rows = t.index.labels.size();
  for (std::size_t l = 0; l < levels; ++l) {
    std::vector<Value> col;
    for (const auto& label : t.index.labels) {
      const auto* tup = label.get_if<SeqValue>();
      col.push_back(levels > 1 && tup && l < tup->items.size() ? tup->items[l] : label);
    }
    out.columns.push_back(level_name(l < t.index.names.size() ? t.index.names[l] : std::nullopt, l, levels));
    out.dtypes.push_back(infer_dtype(col));
    out.data.push_back(std::move(col));
  }
  for (std::size_t j = 0; j < t.columns.size(); ++j) {
    out.columns.push_back(t.columns[j]);
    out.dtypes.push_back(t.dtypes[j]);
    out.data.push_back(t.data[j]);
  }
  out.rows = rows;
  out.index.names = {std::nullopt};
  for (std::size_t i = 0; i < rows; ++i) out.index.labels.push_back(Value::integer(static_cast<std::int64_t>(i)));
  return out;
}

std::optional<TableValue> select_columns(const TableValue& t, const std::vector<std::string>& cols) {
  TableValue out;
  out.index = t.index;
  out.rows = t.rows;
  for (const auto& c : cols) {
    auto it = std::find(t.columns.begin(), t.columns.end(), c);
    if (it == t.columns.end()) return std::nullopt;
    auto j = static_cast<std::size_t>(it - t.columns.begin());
    out.columns.push_back(c);
    out.dtypes.push_back(t.dtypes[j]);
    out.data.push_back(t.data[j]);
  }
  return out;
}

Value column_series(const TableValue& t, std::size_t j) {
  SeriesValue s;
  s.name = t.columns[j];
  s.dtype = t.dtypes[j];
  s.index = t.index;
  s.cells = t.data[j];
  s.rows = s.cells.size();
  return Value{std::move(s), "pandas.Series"};
}

Value to_frame(const SeriesValue& s) {
  TableValue t;
  t.columns = {s.name.value_or("0")};
  t.dtypes = {s.dtype};
  t.index = s.index;
  t.data = {s.cells};
  t.rows = s.cells.size();
  return Value{std::move(t), "pandas.DataFrame"};
}

/// The reference answer is found inside a larger or differently shaped submission value.
bool partial_match(const Value& sub, const Value& ref, const CompareOptions& base) {
  CompareOptions o = base;
  o.ignore_index = true;
  o.ignore_names = true;
  auto same = [&](const Value& a, const Value& b) { return compare_values(a, b, o).match; };
  if (const auto* st = sub.get_if<TableValue>()) {
    if (const auto* rt = ref.get_if<TableValue>()) {
      auto flat = reset_index(*st);
      if (flat.columns != rt->columns) {
        if (auto picked = select_columns(flat, rt->columns)) {
          CompareOptions strict_names = base;
          strict_names.ignore_index = true;
          if (compare_values(Value{*picked, sub.type_name}, ref, strict_names).match) return true;
        }
      }
    }
    if (auto rs = series_view(ref)) {
      for (std::size_t j = 0; j < st->columns.size(); ++j) {
        if (same(column_series(*st, j), *rs)) return true;
      }
      if (auto idx = index_as_series(sub); idx && same(*idx, *rs)) return true;
    }
  }
  if (const auto* ss = sub.get_if<SeriesValue>()) {
    if (auto rs = series_view(ref)) {
      if (auto idx = index_as_series(sub); idx && same(*idx, *rs)) return true;
      if (same(sub, *rs)) return true;
    }
    if (ref.kind() == ValueKind::Table && same(to_frame(*ss), ref)) return true;
  }
  return false;
}

/// The last top-level statement assigns a plain name; returns it.
std::optional<std::string> last_assigned_name(const ojson& tree) {
  if (!tree.contains("body") || tree["body"].empty()) return std::nullopt;
  const auto& last = tree["body"].back();
  const auto type = last.value("_type", std::string());
  const ojson* target = nullptr;
  if (type == "Assign" && last["targets"].size() == 1) target = &last["targets"][0];
  if (type == "AnnAssign" || type == "AugAssign") target = &last["target"];
  if (target && target->value("_type", std::string()) == "Name") return (*target)["id"].get<std::string>();
  return std::nullopt;
}

/// Every top-level statement is a bare constant (a string or number standing in for an answer).
bool only_constants(const ojson& tree) {
  for (const auto& stmt : tree["body"]) {
    if (stmt.value("_type", std::string()) != "Expr") return false;
    if (stmt["value"].value("_type", std::string()) != "Constant") return false;
  }
  return true;
}

// Column names still count: a renamed column is a wrong output, not an index problem.
CompareOptions index_relaxed(CompareOptions o) {
  o.ignore_index = o.ignore_order = true;
  return o;
}

std::optional<Verdict> presentation_error(const ValidationContext& ctx, const ParsedCode& parsed,
                                          const std::vector<const NodeOutcome*>& blocking) {
  const auto& refres = ctx.reference->reference_result;
  const auto& subres = ctx.submission_result;
  ojson leaf_opts = ojson::object();
  for (const auto* b : blocking) {
    if (b->kind == ValidatorKind::ExecuteResult && b->options.is_object()) leaf_opts = b->options;
  }
  const auto opts = CompareOptions::from_json(leaf_opts);
  if (!refres.execute_result) return std::nullopt;
  const Value& ref = *refres.execute_result;

  if (!subres.execute_result) {
    auto shown = cell_output_text(refres);
    if (!trim(shown).empty() && contains_answer(subres.stream_output, shown)) {
      return make(VerdictCategory::PresentationError, Subverdict::MissingReturn, "answer printed instead of returned");
    }
    if (auto name = last_assigned_name(parsed.tree)) {
      const auto& vals = ctx.submission_values();
      auto it = vals.find(*name);
      if (it != vals.end() && compare_values(it->second, ref, CompareOptions::relaxed(opts)).match) {
        return make(VerdictCategory::PresentationError, Subverdict::MissingReturn,
                    "answer stored in '" + *name + "' but not returned");
      }
    }
  }
  if (subres.execute_result) {
    const Value& sub = *subres.execute_result;
    if ((is_frame_like(sub) || is_frame_like(ref)) &&
        compare_values(squeeze(sub), squeeze(ref), index_relaxed(opts)).match) {
      return make(VerdictCategory::PresentationError, Subverdict::IndexMismatch,
                  "values match once the index and row order are ignored");
    }
    if (partial_match(sub, ref, opts)) {
      return make(VerdictCategory::PresentationError, Subverdict::PartialMatch,
                  "reference answer found inside the submission output");
    }
  }
  if (only_constants(parsed.tree) && contains_answer(ctx.submission_code, answer_text(ref))) {
    return make(VerdictCategory::PresentationError, Subverdict::NonCode, "answer written as a literal");
  }
  return std::nullopt;
}

ojson error_to_json(const ExecError& e) {
  return ojson{{"kind", error_kind_name(e.kind)}, {"ename", e.ename}, {"message", e.message}, {"traceback", e.traceback}};
}

ExecError error_from_json(const json& j) {
  return ExecError{error_kind_from_name(j.value("kind", "other")), j.value("ename", ""), j.value("message", ""),
                   j.value("traceback", "")};
}

double percent(std::size_t n, std::size_t d) { return d == 0 ? 0.0 : 100.0 * static_cast<double>(n) / static_cast<double>(d); }

}  // namespace

std::string category_name(VerdictCategory c) {
  for (const auto& [k, n] : kCategoryNames) {
    if (k == c) return n;
  }
  return "?";
}

std::string subverdict_name(Subverdict s) {
  for (const auto& [k, n] : kSubverdictNames) {
    if (k == s) return n;
  }
  return "?";
}

std::optional<VerdictCategory> category_from_name(const std::string& s) {
  for (const auto& [k, n] : kCategoryNames) {
    if (s == n) return k;
  }
  return std::nullopt;
}

std::optional<Subverdict> subverdict_from_name(const std::string& s) {
  for (const auto& [k, n] : kSubverdictNames) {
    if (s == n) return k;
  }
  return std::nullopt;
}

std::vector<Subverdict> subverdicts_of(VerdictCategory c) {
  switch (c) {
    case VerdictCategory::PresentationError:
      return {Subverdict::IndexMismatch, Subverdict::MissingReturn, Subverdict::PartialMatch, Subverdict::NonCode};
    case VerdictCategory::WrongOutput:
    case VerdictCategory::WrongVariables:
    case VerdictCategory::UnitTestFailure: return kComparisonSubs;
    case VerdictCategory::Crash:
      return {Subverdict::ModuleNotFound, Subverdict::AttributeError, Subverdict::KeyError, Subverdict::NameError,
              Subverdict::TypeError,      Subverdict::ValueError,     Subverdict::Others};
    default: return {};
  }
}

std::vector<std::pair<VerdictCategory, Subverdict>> verdict_leaves() {
  std::vector<std::pair<VerdictCategory, Subverdict>> out;
  for (const auto& [c, _] : kCategoryNames) {
    if (c == VerdictCategory::Correct) continue;
    auto subs = subverdicts_of(c);
    if (subs.empty()) out.emplace_back(c, Subverdict::None);
    for (auto s : subs) out.emplace_back(c, s);
  }
  return out;
}

std::string Verdict::name() const {
  auto n = category_name(category);
  if (subverdict != Subverdict::None) n += " / " + subverdict_name(subverdict);
  return n;
}

Verdict Verdict::from_name(const std::string& name, std::string detail) {
  auto slash = name.find(" / ");
  auto c = category_from_name(name.substr(0, slash));
  if (!c) throw Error("unknown verdict '" + name + "'");
  Verdict v{*c, Subverdict::None, std::move(detail)};
  if (slash != std::string::npos) {
    auto s = subverdict_from_name(name.substr(slash + 3));
    if (!s) throw Error("unknown verdict '" + name + "'");
    v.subverdict = *s;
  }
  return v;
}

Subverdict subverdict_for_mismatch(std::optional<MismatchKind> k) {
  if (!k) return Subverdict::Others;
  switch (*k) {
    case MismatchKind::Type: return Subverdict::UnexpectedType;
    case MismatchKind::Shape: return Subverdict::ShapeMismatch;
    case MismatchKind::Columns: return Subverdict::ColumnsMismatch;
    case MismatchKind::Dtype: return Subverdict::DtypeMismatch;
    case MismatchKind::Value: return Subverdict::ValueMismatch;
  }
  return Subverdict::Others;
}

Subverdict subverdict_for_error(ErrorKind k) {
  switch (k) {
    case ErrorKind::ModuleNotFound: return Subverdict::ModuleNotFound;
    case ErrorKind::Attribute: return Subverdict::AttributeError;
    case ErrorKind::Key: return Subverdict::KeyError;
    case ErrorKind::Name: return Subverdict::NameError;
    case ErrorKind::Type: return Subverdict::TypeError;
    case ErrorKind::Value: return Subverdict::ValueError;
    default: return Subverdict::Others;
  }
}

Verdict classify_verdict(const ValidationContext& ctx, const NodeOutcome& outcome) {
  if (outcome.pass) return make(VerdictCategory::Correct, Subverdict::None, "");
  if (ctx.reference == nullptr) throw ConfigError("classification needs the reference execution");

  auto parsed = parse_code(ctx.submission_code);
  if (!parsed.ok) {
    if (looks_like_prose(ctx.submission_code)) {
      return make(VerdictCategory::PresentationError, Subverdict::NonCode, "submission is prose, not code");
    }
    return make(VerdictCategory::SyntaxError, Subverdict::None, parsed.error_message);
  }
  if (statement_count(parsed.tree) == 0) {
    return make(VerdictCategory::PresentationError, Subverdict::NonCode, "submission contains no statements");
  }
  if (const auto& err = ctx.submission_result.error) {
    const std::string why = err->ename + ": " + err->message;
    if (err->kind == ErrorKind::Syntax) return make(VerdictCategory::SyntaxError, Subverdict::None, why);
    if (err->kind == ErrorKind::Timeout) return make(VerdictCategory::Timeout, Subverdict::None, why);
    return make(VerdictCategory::Crash, subverdict_for_error(err->kind), why);
  }

  auto blocking = outcome.blocking_leaves();
  auto first_of = [&](std::initializer_list<ValidatorKind> kinds) -> const NodeOutcome* {
    for (const auto* b : blocking) {
      if (std::find(kinds.begin(), kinds.end(), b->kind) != kinds.end()) return b;
    }
    return nullptr;
  };
  if (const auto* t = first_of({ValidatorKind::TableTest})) {
    return make(VerdictCategory::UnitTestFailure, subverdict_for_mismatch(t->mismatch), t->detail);
  }
  if (const auto* v = first_of({ValidatorKind::NamespaceCheck, ValidatorKind::Model})) {
    return make(VerdictCategory::WrongVariables, subverdict_for_mismatch(v->mismatch), v->detail);
  }
  const bool output_failed =
      std::any_of(blocking.begin(), blocking.end(), [](const NodeOutcome* b) { return is_output_leaf(b->kind); });
  if (output_failed) {
    if (auto pe = presentation_error(ctx, parsed, blocking)) return *pe;
    const auto* r = first_of({ValidatorKind::ExecuteResult});
    if (r == nullptr) r = first_of({ValidatorKind::StreamOutput, ValidatorKind::AnswerInSource});
    return make(VerdictCategory::WrongOutput, subverdict_for_mismatch(r->mismatch), r->detail);
  }
  if (const auto* i = first_of({ValidatorKind::NamespaceIntact})) {
    return make(VerdictCategory::IntactViolation, Subverdict::None, i->detail);
  }
  // a failing crash leaf without an error cannot happen; anything else is an uncategorized wrong output
  return make(VerdictCategory::WrongOutput, Subverdict::Others, outcome.detail);
}

Verdict evaluate_submission(const ValidatorConfig& cfg, const ValidationContext& ctx) {
  auto tree = run_validator(expand_template(cfg), ctx, false);
  return classify_verdict(ctx, tree);
}

ExecutionSummary ExecutionSummary::of(const ExecutionResult& r) {
  ExecutionSummary s;
  if (r.execute_result) {
    auto text = r.execute_result->repr.empty() ? cell_text(*r.execute_result) : r.execute_result->repr;
    if (text.size() > 4000) text = text.substr(0, 4000) + "...";
    s.execute_result = std::move(text);
  }
  s.stream_output = r.stream_output.size() > 4000 ? r.stream_output.substr(0, 4000) + "..." : r.stream_output;
  s.error = r.error;
  s.duration = r.duration;
  return s;
}

std::string mode_name(RunMode m) { return m == RunMode::Reset ? "reset" : "propagate"; }

RunMode mode_from_name(const std::string& s) {
  if (s == "reset") return RunMode::Reset;
  if (s == "propagate") return RunMode::Propagate;
  throw Error("unknown mode '" + s + "'");
}

bool EvaluationRecord::operator==(const EvaluationRecord& o) const {
  return benchmark == o.benchmark && problemset == o.problemset && problem_index == o.problem_index &&
         agent == o.agent && mode == o.mode && query == o.query && submission_code == o.submission_code &&
         reference_code == o.reference_code && execution == o.execution && verdict == o.verdict &&
         verdict.detail == o.verdict.detail && attempts == o.attempts && duration == o.duration &&
         timestamp == o.timestamp;
}

ojson record_to_json(const EvaluationRecord& r) {
  ojson exec;
  exec["execute_result"] = r.execution.execute_result ? ojson(*r.execution.execute_result) : ojson(nullptr);
  exec["stream_output"] = r.execution.stream_output;
  exec["error"] = r.execution.error ? error_to_json(*r.execution.error) : ojson(nullptr);
  exec["duration"] = r.execution.duration;
  ojson j;
  j["benchmark"] = r.benchmark;
  j["problemset"] = r.problemset;
  j["problem_index"] = r.problem_index;
  j["agent"] = r.agent;
  j["mode"] = mode_name(r.mode);
  j["verdict"] = r.verdict.name();
  j["category"] = category_name(r.verdict.category);
  j["subcategory"] = r.verdict.subverdict == Subverdict::None ? ojson(nullptr) : ojson(subverdict_name(r.verdict.subverdict));
  j["detail"] = r.verdict.detail;
  j["attempts"] = r.attempts;
  j["duration"] = r.duration;
  j["timestamp"] = r.timestamp;
  j["query"] = r.query;
  j["submission_code"] = r.submission_code;
  j["reference_code"] = r.reference_code;
  j["execution"] = exec;
  return j;
}

EvaluationRecord record_from_json(const json& j) {
  EvaluationRecord r;
  r.benchmark = j.at("benchmark").get<std::string>();
  r.problemset = j.at("problemset").get<std::string>();
  r.problem_index = j.at("problem_index").get<int>();
  r.agent = j.at("agent").get<std::string>();
  r.mode = mode_from_name(j.at("mode").get<std::string>());
  r.verdict = Verdict::from_name(j.at("verdict").get<std::string>(), j.value("detail", ""));
  r.attempts = j.value("attempts", 1);
  r.duration = j.value("duration", 0.0);
  r.timestamp = j.value("timestamp", "");
  r.query = j.value("query", "");
  r.submission_code = j.value("submission_code", "");
  r.reference_code = j.value("reference_code", "");
  if (j.contains("execution")) {
    const auto& e = j["execution"];
    if (e.contains("execute_result") && !e["execute_result"].is_null()) {
      r.execution.execute_result = e["execute_result"].get<std::string>();
    }
    r.execution.stream_output = e.value("stream_output", "");
    if (e.contains("error") && !e["error"].is_null()) r.execution.error = error_from_json(e["error"]);
    r.execution.duration = e.value("duration", 0.0);
  }
  return r;
}

Metrics aggregate_metrics(const std::vector<EvaluationRecord>& records) {
  Metrics m;
  std::vector<const EvaluationRecord*> primary;
  std::vector<const EvaluationRecord*> propagated;
  for (const auto& r : records) {
    (r.mode == RunMode::Reset ? primary : propagated).push_back(&r);
  }
  if (primary.empty()) primary = propagated;
  m.total = primary.size();
  m.empty = primary.empty();
  if (m.empty) return m;
  std::size_t pass = 0, wo_intact = 0, wo_pe = 0;
  for (const auto* r : primary) {
    pass += r->verdict.passed();
    wo_intact += r->verdict.passed_wo_intact();
    wo_pe += r->verdict.passed_wo_pe();
    ++m.category_counts[category_name(r->verdict.category)];
    ++m.verdict_counts[r->verdict.name()];
  }
  m.pass_rate = percent(pass, primary.size());
  m.pass_rate_wo_intact = percent(wo_intact, primary.size());
  m.pass_rate_wo_pe = percent(wo_pe, primary.size());
  m.error_prop_measured = !propagated.empty();
  if (m.error_prop_measured) {
    std::size_t ok = std::count_if(propagated.begin(), propagated.end(),
                                   [](const EvaluationRecord* r) { return r->verdict.passed(); });
    m.pass_rate_error_prop = percent(ok, propagated.size());
  } else {
    m.pass_rate_error_prop = m.pass_rate;
  }
  return m;
}

ojson metrics_to_json(const Metrics& m) {
  ojson j;
  j["empty"] = m.empty;
  j["total"] = m.total;
  j["pass_rate"] = m.pass_rate;
  j["pass_rate_error_prop"] = m.pass_rate_error_prop;
  j["pass_rate_wo_intact"] = m.pass_rate_wo_intact;
  j["pass_rate_wo_pe"] = m.pass_rate_wo_pe;
  j["error_prop_measured"] = m.error_prop_measured;
  j["category_counts"] = m.category_counts;
  j["verdict_counts"] = m.verdict_counts;
  return j;
}

}  // namespace dseval
