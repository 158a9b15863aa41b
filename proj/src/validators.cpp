#include "dseval/validators.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include "dseval/errors.hpp"
#include "dseval/kernel.hpp"
#include "dseval/util.hpp"

namespace dseval {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

NodeOutcome passed(ValidatorKind k, std::string detail = {}) {
  NodeOutcome o;
  o.kind = k;
  o.detail = std::move(detail);
  return o;
}

NodeOutcome failed(ValidatorKind k, std::string detail, std::optional<MismatchKind> m = std::nullopt) {
  NodeOutcome o;
  o.kind = k;
  o.pass = false;
  o.detail = std::move(detail);
  o.mismatch = m;
  return o;
}

std::string key_of(ValidatorKind k) { return std::string(validator_key(k)); }

void check_keys(const ojson& opts, std::initializer_list<const char*> allowed, ValidatorKind k) {
  for (const auto& [key, _] : opts.items()) {
    bool ok = std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; });
    if (!ok) throw ConfigError(key_of(k) + ": unknown option '" + key + "'");
  }
}

std::vector<std::string> string_list(const ojson& v, const std::string& what) {
  std::vector<std::string> out;
  if (v.is_null()) return out;
  if (v.is_string()) return {v.get<std::string>()};
  if (!v.is_array()) throw ConfigError(what + " must be a list of names");
  for (const auto& x : v) {
    if (!x.is_string()) throw ConfigError(what + " must be a list of names");
    out.push_back(x.get<std::string>());
  }
  return out;
}

const GroundTruthStep& reference_of(const ValidationContext& ctx) {
  if (ctx.reference == nullptr) throw ConfigError("validation context has no reference execution");
  return *ctx.reference;
}

double call_budget(const ValidationContext& ctx) {
  double limit = ctx.submission_session ? ctx.submission_session->options().default_max_time : 30.0;
  if (ctx.problem && ctx.problem->execution.max_time) limit = *ctx.problem->execution.max_time;
  return limit + 1.0;
}

// ---------------------------------------------------------------- leaves

NodeOutcome run_crash(const ValidationContext& ctx) {
  const auto& err = ctx.submission_result.error;
  if (!err) return passed(ValidatorKind::Crash);
  auto o = failed(ValidatorKind::Crash, err->ename + ": " + err->message);
  o.error = err;
  return o;
}

NodeOutcome run_execute_result(const ValidatorConfig& cfg, const ValidationContext& ctx) {
  auto opts = CompareOptions::from_json(cfg.options);
  const auto& ref = reference_of(ctx).reference_result.execute_result;
  const auto& sub = ctx.submission_result.execute_result;
  if (!ref) return passed(cfg.kind, "reference has no result");
  if (!sub) return failed(cfg.kind, "submission has no result");
  auto r = compare_values(*sub, *ref, opts);
  if (r.match) return passed(cfg.kind);
  return failed(cfg.kind, "result mismatch: " + r.detail, r.kind);
}

NodeOutcome run_stream_output(const ValidatorConfig& cfg, const ValidationContext& ctx) {
  check_keys(cfg.options, {}, cfg.kind);
  auto ref = normalize_whitespace(cell_output_text(reference_of(ctx).reference_result));
  auto sub = normalize_whitespace(cell_output_text(ctx.submission_result));
  if (sub.find(ref) != std::string::npos) return passed(cfg.kind);
  return failed(cfg.kind, "console output does not contain the expected text");
}

NodeOutcome run_answer_in_source(const ValidatorConfig& cfg, const ValidationContext& ctx) {
  check_keys(cfg.options, {}, cfg.kind);
  const auto& ref = reference_of(ctx).reference_result.execute_result;
  if (!ref) return failed(cfg.kind, "reference has no answer");
  if (ctx.submission_result.execute_result) return failed(cfg.kind, "submission computed a result");
  auto text = answer_text(*ref);
  if (text.empty()) return failed(cfg.kind, "answer has no literal form");
  if (contains_answer(ctx.submission_code, text)) return passed(cfg.kind, "answer appears in the code: " + text);
  return failed(cfg.kind, "answer not found in the code");
}

NodeOutcome run_namespace_intact(const ValidatorConfig& cfg, const ValidationContext& ctx) {
  check_keys(cfg.options, {"update", "addition"}, cfg.kind);
  const auto& step = reference_of(ctx);
  std::set<std::string> allowed = step.changed;
  bool any_update = false;
  if (cfg.options.contains("update")) {
    const auto& u = cfg.options["update"];
    if (u.is_boolean()) {
      any_update = u.get<bool>();
    } else {
      for (auto& n : string_list(u, "namespace_intact.update")) allowed.insert(n);
    }
  }
  bool additions = true;
  if (cfg.options.contains("addition")) {
    if (!cfg.options["addition"].is_boolean()) throw ConfigError("namespace_intact.addition must be true or false");
    additions = cfg.options["addition"].get<bool>();
  }
  const Namespace& base = ctx.submission_pre ? *ctx.submission_pre : step.pre_values;
  const Namespace& now = ctx.submission_values();
  CompareOptions exact;
  exact.atol = exact.rtol = 0;
  if (!any_update) {
    for (const auto& [name, before] : base) {
      if (allowed.count(name)) continue;
      auto it = now.find(name);
      if (it == now.end()) {
        auto o = failed(cfg.kind, "variable '" + name + "' was deleted");
        o.variable = name;
        return o;
      }
      if (!compare_values(it->second, before, exact).match) {
        auto o = failed(cfg.kind, "variable '" + name + "' was modified");
        o.variable = name;
        return o;
      }
    }
  }
  if (!additions) {
    for (const auto& [name, _] : now) {
      if (!base.count(name) && !allowed.count(name)) {
        auto o = failed(cfg.kind, "variable '" + name + "' was added");
        o.variable = name;
        return o;
      }
    }
  }
  return passed(cfg.kind);
}

NodeOutcome run_namespace_check(const ValidatorConfig& cfg, const ValidationContext& ctx) {
  const auto& step = reference_of(ctx);
  std::vector<std::pair<std::string, CompareOptions>> targets;
  if (cfg.options.empty()) {
    for (const auto& n : step.changed) targets.emplace_back(n, CompareOptions{});
  } else {
    for (const auto& [name, opts] : cfg.options.items()) {
      if (!step.post_values.count(name)) {
        throw ConfigError("namespace_check: reference does not define variable '" + name + "'");
      }
      targets.emplace_back(name, CompareOptions::from_json(opts));
    }
  }
  const Namespace& sub = ctx.submission_values();
  for (const auto& [name, opts] : targets) {
    auto ref = step.post_values.find(name);
    auto got = sub.find(name);
    if (ref == step.post_values.end()) {
      if (got != sub.end()) {
        auto o = failed(cfg.kind, "variable '" + name + "' should have been deleted");
        o.variable = name;
        return o;
      }
      continue;
    }
    if (got == sub.end()) {
      auto o = failed(cfg.kind, "variable '" + name + "' not found");
      o.variable = name;
      return o;
    }
    auto r = compare_values(got->second, ref->second, opts);
    if (!r.match) {
      auto o = failed(cfg.kind, "variable '" + name + "': " + r.detail, r.kind);
      o.variable = name;
      return o;
    }
  }
  return passed(cfg.kind);
}

/// Python expression for one YAML test-case argument.
std::string argument_expression(const ojson& arg) {
  if (arg.is_string()) {
    auto s = trim(arg.get<std::string>());
    if (s.size() >= 2 && s.front() == '`' && s.back() == '`') return s.substr(1, s.size() - 2);
  }
  // literal data: round-trip through JSON so any value survives quoting
  return "__import__('json').loads(" + json(arg.dump()).dump() + ")";
}

json call_test(Session& s, const std::string& function, const std::vector<std::string>& inputs,
               const std::optional<std::string>& validator, double budget) {
  json req{{"op", "call_test"}, {"function", function}, {"inputs", inputs}};
  if (validator) req["input_validator"] = *validator;
  return s.kernel_call(req, std::chrono::duration<double>(budget));
}

NodeOutcome run_table_test(const ValidatorConfig& cfg, const ValidationContext& ctx) {
  check_keys(cfg.options, {"function_name", "test_cases", "input_validator", "output_checker", "input_checker"},
             cfg.kind);
  if (!cfg.options.contains("function_name") || !cfg.options["function_name"].is_string()) {
    throw ConfigError("table_test needs function_name");
  }
  auto function = cfg.options["function_name"].get<std::string>();
  std::optional<std::string> validator;
  if (cfg.options.contains("input_validator") && cfg.options["input_validator"].is_string()) {
    validator = cfg.options["input_validator"].get<std::string>();
  }
  auto checker = CompareOptions::from_json(cfg.options.value("output_checker", ojson::object()));
  const auto& cases = cfg.options.value("test_cases", ojson::array());
  if (!cases.is_array() || cases.empty()) throw ConfigError("table_test needs a non-empty test_cases list");
  if (!ctx.reference_session) throw ConfigError("table_test needs a reference session");
  if (ctx.submission_session == nullptr) throw ConfigError("table_test needs the submission session");

  Session& ref = ctx.reference_session();
  const double budget = call_budget(ctx);
  std::optional<ojson> last;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    ojson c = cases[i];
    if (c.is_string() && c.get<std::string>() == "//") {
      if (!last) throw ConfigError("table_test case " + std::to_string(i) + " repeats nothing");
      c = *last;
    }
    last = c;
    if (c.is_object()) throw ConfigError("table_test keyword cases are not supported");
    std::vector<std::string> inputs;
    if (c.is_array()) {
      for (const auto& a : c) inputs.push_back(argument_expression(a));
    } else {
      inputs.push_back(argument_expression(c));
    }
    const std::string tag = "case " + std::to_string(i) + ": ";

    auto expected = call_test(ref, function, inputs, validator, 600);
    if (expected.value("missing", false)) throw ConfigError("table_test: reference does not define " + function);
    if (expected.contains("invalid")) throw ConfigError("table_test " + tag + expected["invalid"].get<std::string>());
    if (expected.contains("error")) {
      throw ConfigError("table_test " + tag + "reference raised " + expected["error"].value("message", ""));
    }

    json got;
    try {
      got = call_test(*ctx.submission_session, function, inputs, std::nullopt, budget);
    } catch (const KernelError& e) {
      auto o = failed(cfg.kind, tag + function + " did not finish");
      o.error = ExecError{ErrorKind::Timeout, "TimeoutError", e.what(), ""};
      return o;
    }
    if (got.value("missing", false)) return failed(cfg.kind, "function " + function + " not found");
    if (got.contains("invalid")) return failed(cfg.kind, tag + got["invalid"].get<std::string>());
    if (got.contains("error")) {
      const auto& e = got["error"];
      auto o = failed(cfg.kind, tag + function + " raised " + e.value("ename", "") + ": " + e.value("message", ""));
      o.error = ExecError{error_kind_from_name(e.value("kind", "other")), e.value("ename", ""), e.value("message", ""),
                          e.value("traceback", "")};
      return o;
    }
    auto r = compare_values(value_from_json(got["output"]), value_from_json(expected["output"]), checker);
    if (!r.match) return failed(cfg.kind, tag + "output mismatch: " + r.detail, r.kind);
  }
  return passed(cfg.kind, "all " + std::to_string(cases.size()) + " cases pass");
}

NodeOutcome run_model(const ValidatorConfig& cfg, const ValidationContext& ctx) {
  check_keys(cfg.options, {"model_name", "inputs_name", "labels_name", "metric_type", "tolerance", "threshold"},
             cfg.kind);
  auto need = [&](const char* key) {
    if (!cfg.options.contains(key) || !cfg.options[key].is_string()) {
      throw ConfigError(std::string("model validator needs ") + key);
    }
    return cfg.options[key].get<std::string>();
  };
  auto model = need("model_name");
  auto x = need("inputs_name");
  auto y = need("labels_name");
  std::vector<std::string> metrics{"score"};
  if (cfg.options.contains("metric_type")) metrics = string_list(cfg.options["metric_type"], "model.metric_type");
  double tolerance = 0.05;
  if (cfg.options.contains("tolerance")) {
    if (!cfg.options["tolerance"].is_number() || cfg.options["tolerance"].get<double>() < 0) {
      throw ConfigError("model.tolerance must be a number >= 0");
    }
    tolerance = cfg.options["tolerance"].get<double>();
  }
  std::optional<double> threshold;
  if (cfg.options.contains("threshold")) {
    if (!cfg.options["threshold"].is_number()) throw ConfigError("model.threshold must be a number");
    threshold = cfg.options["threshold"].get<double>();
  }
  const auto& step = reference_of(ctx);
  for (const auto& n : {model, x, y}) {
    if (!step.post_values.count(n)) throw ConfigError("model validator: reference does not define '" + n + "'");
  }
  if (!ctx.reference_session || ctx.submission_session == nullptr) {
    throw ConfigError("model validator needs both sessions");
  }
  if (!ctx.submission_values().count(model)) return failed(cfg.kind, "model '" + model + "' not found");

  auto dumped = ctx.submission_session->kernel_call(json{{"op", "dump"}, {"names", {model}}});
  if (!dumped.value("ok", false)) {
    auto o = failed(cfg.kind, "model '" + model + "' cannot be transferred");
    return o;
  }
  Session& ref = ctx.reference_session();
  for (const auto& metric : metrics) {
    json req{{"op", "score_model"}, {"model", model}, {"x", x}, {"y", y}, {"metric", metric}};
    auto expected = ref.kernel_call(req);
    if (!expected.value("ok", false)) {
      throw ConfigError("model validator: reference model failed to score: " +
                        expected["error"].value("message", std::string()));
    }
    req["blob"] = dumped["blob"];
    auto got = ref.kernel_call(req, std::chrono::duration<double>(call_budget(ctx) + 60));
    if (!got.value("ok", false)) {
      const auto& e = got["error"];
      auto o = failed(cfg.kind, "model failed to predict: " + e.value("ename", "") + ": " + e.value("message", ""));
      o.error = ExecError{error_kind_from_name(e.value("kind", "other")), e.value("ename", ""), e.value("message", ""),
                          e.value("traceback", "")};
      return o;
    }
    double want = expected["score"].get<double>();
    double have = got["score"].get<double>();
    bool lower = expected.value("lower_is_better", false);
    bool ok = lower ? have <= want + tolerance : have >= want - tolerance;
    if (threshold) ok = ok || (lower ? have <= *threshold : have >= *threshold);
    if (!ok) {
      return failed(cfg.kind, metric + " " + std::to_string(have) + " vs reference " + std::to_string(want));
    }
  }
  return passed(cfg.kind);
}

void collect_blocking(const NodeOutcome& n, std::vector<const NodeOutcome*>& out) {
  if (n.pass || !n.evaluated) return;
  if (n.children.empty() && n.kind != ValidatorKind::And && n.kind != ValidatorKind::Or) {
    out.push_back(&n);
    return;
  }
  for (const auto& c : n.children) collect_blocking(c, out);
}

}  // namespace

const Namespace& ValidationContext::submission_values() const {
  if (!submission_values_) {
    submission_values_ = submission_session ? submission_session->export_values() : Namespace{};
  }
  return *submission_values_;
}

std::vector<const NodeOutcome*> NodeOutcome::blocking_leaves() const {
  std::vector<const NodeOutcome*> out;
  collect_blocking(*this, out);
  return out;
}

ValidatorConfig expand_template(const ValidatorConfig& cfg) {
  if (cfg.kind != ValidatorKind::Template) {
    ValidatorConfig out = cfg;
    for (auto& c : out.children) c = expand_template(c);
    return out;
  }
  auto name = cfg.options.value("template", std::string());
  if (name != "basic") throw ConfigError("unknown validator template '" + name + "'");

  ValidatorConfig intact = ValidatorConfig::leaf(ValidatorKind::NamespaceIntact);
  ValidatorConfig answer = ValidatorConfig::leaf(ValidatorKind::AnswerInSource);
  std::vector<ValidatorConfig> checks;
  std::vector<ValidatorConfig> results;
  for (const auto& raw : cfg.children) {
    auto c = expand_template(raw);
    switch (c.kind) {
      case ValidatorKind::Crash: break;
      case ValidatorKind::NamespaceIntact:
        for (const auto& [k, v] : c.options.items()) intact.options[k] = v;
        break;
      case ValidatorKind::AnswerInSource: answer = c; break;
      case ValidatorKind::ExecuteResult:
      case ValidatorKind::StreamOutput: results.push_back(c); break;
      case ValidatorKind::Or:
        for (auto& g : c.children) results.push_back(g);
        break;
      default: checks.push_back(c); break;
    }
  }
  if (results.empty()) results.push_back(ValidatorConfig::leaf(ValidatorKind::ExecuteResult));
  results.push_back(answer);
  std::vector<ValidatorConfig> all{ValidatorConfig::leaf(ValidatorKind::Crash), intact};
  for (auto& c : checks) all.push_back(std::move(c));
  all.push_back(ValidatorConfig::any_of(std::move(results)));
  return ValidatorConfig::all_of(std::move(all));
}

static NodeOutcome run_leaf(const ValidatorConfig& cfg, const ValidationContext& ctx) {
  switch (cfg.kind) {
    case ValidatorKind::Crash: return run_crash(ctx);
    case ValidatorKind::ExecuteResult: return run_execute_result(cfg, ctx);
    case ValidatorKind::StreamOutput: return run_stream_output(cfg, ctx);
    case ValidatorKind::AnswerInSource: return run_answer_in_source(cfg, ctx);
    case ValidatorKind::NamespaceIntact: return run_namespace_intact(cfg, ctx);
    case ValidatorKind::NamespaceCheck: return run_namespace_check(cfg, ctx);
    case ValidatorKind::TableTest: return run_table_test(cfg, ctx);
    case ValidatorKind::Model: return run_model(cfg, ctx);
    default: throw ConfigError("not a leaf validator");
  }
}

NodeOutcome run_validator(const ValidatorConfig& cfg, const ValidationContext& ctx, bool short_circuit) {
  switch (cfg.kind) {
    case ValidatorKind::Template: return run_validator(expand_template(cfg), ctx, short_circuit);
    case ValidatorKind::And:
    case ValidatorKind::Or: {
      const bool is_and = cfg.kind == ValidatorKind::And;
      if (cfg.children.empty()) throw ConfigError(key_of(cfg.kind) + " validator needs at least one child");
      NodeOutcome node;
      node.kind = cfg.kind;
      node.pass = is_and;
      bool decided = false;
      for (const auto& child : cfg.children) {
        if (decided) {
          NodeOutcome skipped;
          skipped.kind = child.kind;
          skipped.evaluated = false;
          node.children.push_back(std::move(skipped));
          continue;
        }
        auto r = run_validator(child, ctx, short_circuit);
        if (is_and && !r.pass) {
          if (node.pass) {
            node.detail = r.detail;
            node.mismatch = r.mismatch;
          }
          node.pass = false;
          decided = short_circuit;
        } else if (!is_and && r.pass) {
          node.pass = true;
          decided = short_circuit;
        } else if (!is_and) {
          node.detail = r.detail;  // last failing child
          node.mismatch = r.mismatch;
        }
        node.children.push_back(std::move(r));
      }
      if (node.pass) {
        node.detail.clear();
        node.mismatch.reset();
      }
      return node;
    }
    default: {
      auto o = run_leaf(cfg, ctx);
      o.options = cfg.options;
      return o;
    }
  }
}

std::string cell_output_text(const ExecutionResult& r) {
  std::string out = r.stream_output;
  if (r.execute_result) {
    const auto& v = *r.execute_result;
    if (const auto* s = v.get_if<StrValue>(); s && v.repr.empty()) {
      out += "'" + s->text + "'";
    } else {
      out += v.repr.empty() ? cell_text(v) : v.repr;
    }
  }
  return out;
}

std::string answer_text(const Value& v) {
  switch (v.kind()) {
    case ValueKind::Bool: return *v.get_if<bool>() ? "True" : "False";
    case ValueKind::Int: return std::to_string(*v.get_if<std::int64_t>());
    case ValueKind::Float: {
      double d = *v.get_if<double>();
      if (!std::isfinite(d)) return "";
      return v.repr.empty() ? cell_text(v) : v.repr;
    }
    case ValueKind::Str: return v.get_if<StrValue>()->text;
    default: return "";
  }
}

bool contains_answer(const std::string& haystack, const std::string& needle) {
  auto h = strip_whitespace(haystack);
  auto n = strip_whitespace(needle);
  if (n.empty()) return false;
  auto word = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; };
  const bool numeric_start = std::isdigit(static_cast<unsigned char>(n.front())) || n.front() == '-';
  for (auto pos = h.find(n); pos != std::string::npos; pos = h.find(n, pos + 1)) {
    auto end = pos + n.size();
    bool left_ok = pos == 0 || !word(n.front()) || !word(h[pos - 1]);
    if (numeric_start && pos > 0 && h[pos - 1] == '.') left_ok = false;
    bool right_ok = end == h.size() || !word(n.back()) || !word(h[end]);
    if (numeric_start && end + 1 < h.size() && h[end] == '.' &&
        std::isdigit(static_cast<unsigned char>(h[end + 1]))) {
      right_ok = false;
    }
    if (left_ok && right_ok) return true;
  }
  return false;
}

}  // namespace dseval
