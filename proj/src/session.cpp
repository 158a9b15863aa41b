#include "dseval/session.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

#include "dseval/errors.hpp"
#include "dseval/syntax.hpp"

namespace dseval {

using nlohmann::json;
using ojson = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

namespace {

struct KindName {
  ErrorKind kind;
  const char* name;
};

constexpr KindName kKindNames[] = {
    {ErrorKind::ModuleNotFound, "module-not-found"},
    {ErrorKind::Attribute, "attribute"},
    {ErrorKind::Key, "key"},
    {ErrorKind::Name, "name"},
    {ErrorKind::Type, "type"},
    {ErrorKind::Value, "value"},
    {ErrorKind::Syntax, "syntax"},
    {ErrorKind::Timeout, "timeout"},
    {ErrorKind::ForbiddenName, "forbidden-name"},
    {ErrorKind::Other, "other"},
};

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

ExecError error_from_json(const json& j) {
  ExecError e;
  e.kind = error_kind_from_name(j.value("kind", "other"));
  e.ename = j.value("ename", "");
  e.message = j.value("message", "");
  e.traceback = j.value("traceback", "");
  return e;
}

void check_ok(const json& resp, const char* op) {
  if (!resp.value("ok", false)) {
    std::string msg = resp.contains("error") ? resp["error"].value("message", "") : std::string();
    throw KernelError(std::string("kernel op '") + op + "' failed: " + msg);
  }
}

std::string clip(std::string s, std::size_t n) {
  if (s.size() > n) {
    s.resize(n);
    s += "...";
  }
  return s;
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

std::string quoted_list(const std::vector<std::string>& names) {
  std::string out = "[";
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i) out += ", ";
    out += "'" + names[i] + "'";
  }
  return out + "]";
}

std::string shape_text(const std::vector<std::size_t>& dims) {
  std::string out = "(";
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(dims[i]);
  }
  if (dims.size() == 1) out += ",";
  return out + ")";
}

/// Aligned text grid; the first row is the header.
void render_grid(std::ostringstream& out, const std::vector<std::vector<std::string>>& rows) {
  if (rows.empty()) return;
  std::vector<std::size_t> width(rows.front().size(), 0);
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size() && c < width.size(); ++c) width[c] = std::max(width[c], r[c].size());
  }
  for (const auto& r : rows) {
    out << "   ";
    for (std::size_t c = 0; c < r.size() && c < width.size(); ++c) {
      out << ' ' << std::setw(static_cast<int>(width[c])) << r[c];
    }
    out << '\n';
  }
}

std::string label_text(const RowIndex& idx, std::size_t i) {
  return i < idx.labels.size() ? clip(cell_text(idx.labels[i]), 30) : std::to_string(i);
}

void describe_one(std::ostringstream& out, const std::string& name, const Value& v, DescribeStyle style,
                  std::size_t head_rows) {
  const std::string type = v.type_name.empty() ? kind_name(v.kind()) : v.type_name;
  if (const auto* t = v.get_if<TableValue>()) {
    out << name << ": " << type << ", shape " << shape_text({t->rows, t->columns.size()}) << ", columns "
        << quoted_list(t->columns) << '\n';
    if (style == DescribeStyle::Verbose) {
      for (std::size_t c = 0; c < t->columns.size(); ++c) {
        out << "    " << t->columns[c] << ": " << (c < t->dtypes.size() ? t->dtypes[c] : "?");
        if (c < t->nunique.size() && t->nunique[c] >= 0) out << ", " << t->nunique[c] << " unique";
        out << '\n';
      }
    }
    std::vector<std::vector<std::string>> grid;
    std::vector<std::string> header{""};
    for (const auto& c : t->columns) header.push_back(clip(c, 30));
    grid.push_back(header);
    std::size_t n = std::min(head_rows, t->data.empty() ? t->index.labels.size() : t->data.front().size());
    for (std::size_t r = 0; r < n; ++r) {
      std::vector<std::string> row{label_text(t->index, r)};
      for (const auto& col : t->data) row.push_back(r < col.size() ? clip(one_line(cell_text(col[r])), 30) : "");
      grid.push_back(row);
    }
    if (n > 0) render_grid(out, grid);
    return;
  }
  if (const auto* s = v.get_if<SeriesValue>()) {
    out << name << ": " << type << ", shape " << shape_text({s->rows});
    if (s->name) out << ", name '" << *s->name << "'";
    out << ", dtype " << s->dtype;
    if (style == DescribeStyle::Verbose && s->nunique >= 0) out << ", " << s->nunique << " unique";
    out << '\n';
    std::vector<std::vector<std::string>> grid{{"", s->name.value_or("")}};
    std::size_t n = std::min(head_rows, s->cells.size());
    for (std::size_t r = 0; r < n; ++r) {
      grid.push_back({label_text(s->index, r), clip(one_line(cell_text(s->cells[r])), 30)});
    }
    if (n > 0) render_grid(out, grid);
    return;
  }
  if (const auto* a = v.get_if<ArrayValue>()) {
    out << name << ": " << type << ", shape " << shape_text(a->shape) << ", dtype " << a->dtype;
    std::size_t n = std::min(head_rows, a->cells.size());
    if (n > 0) {
      out << ", first values [";
      for (std::size_t i = 0; i < n; ++i) out << (i ? ", " : "") << clip(cell_text(a->cells[i]), 30);
      out << "]";
    }
    out << '\n';
    return;
  }
  if (const auto* seq = v.get_if<SeqValue>()) {
    out << name << ": " << type << ", length " << seq->items.size() << " = " << clip(one_line(v.repr), 120) << '\n';
    return;
  }
  if (const auto* d = v.get_if<DictValue>()) {
    out << name << ": " << type << ", " << d->keys.size() << " keys = " << clip(one_line(v.repr), 120) << '\n';
    return;
  }
  if (v.get_if<ObjectValue>() != nullptr) {
    out << name << ": " << type << " = " << clip(one_line(v.repr.empty() ? cell_text(v) : v.repr), 120) << '\n';
    return;
  }
  std::string text = v.kind() == ValueKind::Str ? "'" + cell_text(v) + "'" : cell_text(v);
  out << name << ": " << type << " = " << clip(one_line(text), 120) << '\n';
}

}  // namespace

std::string error_kind_name(ErrorKind k) {
  for (const auto& kn : kKindNames) {
    if (kn.kind == k) return kn.name;
  }
  return "other";
}

ErrorKind error_kind_from_name(const std::string& s) {
  for (const auto& kn : kKindNames) {
    if (s == kn.name) return kn.kind;
  }
  return ErrorKind::Other;
}

ojson execution_result_to_json(const ExecutionResult& r) {
  ojson j;
  j["execute_result"] = r.execute_result ? ojson(value_to_json(*r.execute_result)) : ojson(nullptr);
  j["stream_output"] = r.stream_output;
  if (r.error) {
    j["error"] = ojson{{"kind", error_kind_name(r.error->kind)},
                       {"ename", r.error->ename},
                       {"message", r.error->message},
                       {"traceback", r.error->traceback}};
  } else {
    j["error"] = nullptr;
  }
  j["duration"] = r.duration;
  return j;
}

ExecutionResult execution_result_from_json(const json& j) {
  ExecutionResult r;
  if (auto it = j.find("execute_result"); it != j.end() && !it->is_null()) r.execute_result = value_from_json(*it);
  r.stream_output = j.value("stream_output", "");
  if (auto it = j.find("error"); it != j.end() && !it->is_null()) r.error = error_from_json(*it);
  r.duration = j.value("duration", 0.0);
  return r;
}

Session::Session(Options opts) : opts_(std::move(opts)), kernel_(Kernel::Options{opts_.workdir, opts_.python}) {
  std::filesystem::create_directories(inputs_dir());
}

void Session::ensure_ready() {
  if (!stale_) return;
  stale_ = false;
  kernel_.restart();
  replay(history_);
}

void Session::replay(const std::vector<std::string>& history) {
  for (const auto& code : history) {
    kernel_.call(json{{"op", "execute"}, {"code", code}, {"timeout", nullptr}});
  }
}

json Session::kernel_call(const json& request, std::chrono::duration<double> timeout) {
  ensure_ready();
  try {
    return kernel_.call(request, timeout);
  } catch (const KernelError&) {
    stale_ = true;
    throw;
  }
}

ExecutionResult Session::execute(const std::string& code, const ExecutionConfig& restrictions,
                                 bool enforce_forbidden) {
  ensure_ready();
  auto started = Clock::now();
  ExecutionResult result;

  if (enforce_forbidden && !restrictions.forbid_names.empty()) {
    auto parsed = ojson::parse(kernel_.call_text(json{{"op", "parse"}, {"code", code}}));
    if (parsed.value("ok", false)) {
      auto names = mentioned_names(parsed["tree"]);
      for (const auto& f : restrictions.forbid_names) {
        if (names.count(f)) {
          result.error = ExecError{ErrorKind::ForbiddenName, "ForbiddenName", "use of forbidden name '" + f + "'", ""};
          result.duration = seconds_since(started);
          return result;
        }
      }
    }
  }

  const double limit = restrictions.max_time.value_or(opts_.default_max_time);
  json resp;
  try {
    kernel_.send(json{{"op", "execute"}, {"code", code}, {"timeout", limit}});
    auto line = json::parse(kernel_.receive("execute", Clock::now() + std::chrono::hours(1)));
    if (line.value("armed", false)) {
      auto deadline = Clock::now() + std::chrono::duration_cast<Clock::duration>(
                                         std::chrono::duration<double>(limit + opts_.kill_margin));
      line = json::parse(kernel_.receive("execute", deadline));
    }
    resp = std::move(line);
  } catch (const KernelHang&) {
    stale_ = true;
    result.error = ExecError{ErrorKind::Timeout, "TimeoutError", "execution exceeded the time limit and was killed", ""};
    result.duration = seconds_since(started);
    return result;
  } catch (const KernelError& e) {
    stale_ = true;
    result.error = ExecError{ErrorKind::Other, "KernelDied", e.what(), ""};
    result.duration = seconds_since(started);
    return result;
  }
  check_ok(resp, "execute");
  if (!resp["error"].is_null()) {
    result.error = error_from_json(resp["error"]);
  } else if (!resp["result"].is_null()) {
    result.execute_result = value_from_json(resp["result"]);
  }
  result.stream_output = resp.value("stream", "");
  result.duration = resp.value("duration", seconds_since(started));
  if (!result.error || result.error->kind != ErrorKind::Timeout) {
    history_.push_back(code);
    console_ += result.stream_output;
  }
  return result;
}

SnapshotPtr Session::snapshot(bool allow_replay) {
  auto resp = kernel_call(json{{"op", "snapshot"}});
  check_ok(resp, "snapshot");
  auto snap = std::make_shared<Snapshot>();
  snap->blob = resp["blob"].get<std::string>();
  snap->replayed = resp.value("unpicklable", std::vector<std::string>{});
  if (!allow_replay && !snap->replayed.empty()) throw SnapshotUnsupported(snap->replayed.front());
  snap->code_history = history_;
  snap->console_log = console_;
  snap->execution_count = static_cast<int>(history_.size());
  return snap;
}

void Session::restore(const Snapshot& snap) {
  if (stale_) {
    stale_ = false;
    kernel_.restart();
  }
  if (snap.needs_replay()) {
    check_ok(kernel_call(json{{"op", "reset"}}), "reset");
    replay(snap.code_history);
    auto present = variable_names();
    for (const auto& name : snap.replayed) {
      if (!std::binary_search(present.begin(), present.end(), name)) throw SnapshotUnsupported(name);
    }
  } else {
    check_ok(kernel_call(json{{"op", "restore"}, {"blob", snap.blob}}), "restore");
  }
  history_ = snap.code_history;
  console_ = snap.console_log;
}

void Session::reset() {
  if (stale_) {
    stale_ = false;
    kernel_.restart();
  } else {
    check_ok(kernel_call(json{{"op", "reset"}}), "reset");
  }
  history_.clear();
  console_.clear();
}

std::vector<std::string> Session::variable_names() {
  auto resp = kernel_call(json{{"op", "names"}});
  check_ok(resp, "names");
  auto names = resp["names"].get<std::vector<std::string>>();
  std::sort(names.begin(), names.end());
  return names;
}

Namespace Session::export_values(const std::optional<std::vector<std::string>>& names,
                                 std::optional<std::size_t> limit) {
  json req{{"op", "export"}};
  req["names"] = names ? json(*names) : json(nullptr);
  req["limit"] = limit ? json(*limit) : json(nullptr);
  auto resp = kernel_call(req);
  check_ok(resp, "export");
  Namespace ns;
  for (const auto& [name, enc] : resp["values"].items()) ns.emplace(name, value_from_json(enc));
  return ns;
}

std::string Session::describe_variables(DescribeStyle style, std::size_t head_rows) {
  return describe_namespace(export_values(std::nullopt, head_rows), style, head_rows);
}

std::string describe_namespace(const Namespace& ns, DescribeStyle style, std::size_t head_rows) {
  std::ostringstream out;
  for (const auto& [name, value] : ns) describe_one(out, name, value, style, head_rows);
  return out.str();
}

std::set<std::string> changed_names(const Namespace& before, const Namespace& after) {
  std::set<std::string> out;
  for (const auto& [name, v] : after) {
    auto it = before.find(name);
    if (it == before.end() || !(it->second == v)) out.insert(name);
  }
  for (const auto& [name, v] : before) {
    if (!after.count(name)) out.insert(name);
  }
  return out;
}

GroundTruth build_ground_truth(const Problemset& ps, Session& session) {
  session.reset();
  ExecutionConfig setup;
  setup.max_time = session.options().default_max_time;
  auto r = session.execute(ps.preamble, setup, false);
  if (r.error) {
    throw IntegrityError(-1, "setup code failed: " + r.error->ename + ": " + r.error->message);
  }
  GroundTruth gt;
  SnapshotPtr pre = session.snapshot();
  Namespace pre_values = session.export_values();
  for (const auto& p : ps.problems) {
    ExecutionConfig ex;
    ex.max_time = std::max(p.execution.max_time.value_or(0.0), session.options().default_max_time);
    auto res = session.execute(p.reference_code, ex, false);
    if (res.error) {
      throw IntegrityError(p.index, "reference failed: " + error_kind_name(res.error->kind) + ": " +
                                        res.error->ename + ": " + res.error->message);
    }
    GroundTruthStep step;
    step.pre = pre;
    step.post = session.snapshot();
    step.reference_result = std::move(res);
    step.pre_values = pre_values;
    step.post_values = session.export_values();
    step.changed = changed_names(step.pre_values, step.post_values);
    pre = step.post;
    pre_values = step.post_values;
    gt.steps.push_back(std::move(step));
  }
  return gt;
}

}  // namespace dseval
