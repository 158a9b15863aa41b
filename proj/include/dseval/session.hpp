#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "dseval/dseal.hpp"
#include "dseval/kernel.hpp"
#include "dseval/value.hpp"

namespace dseval {

enum class ErrorKind { ModuleNotFound, Attribute, Key, Name, Type, Value, Syntax, Timeout, ForbiddenName, Other };

/// Wire names: "module-not-found", "attribute", ..., "forbidden-name", "other".
std::string error_kind_name(ErrorKind k);
ErrorKind error_kind_from_name(const std::string& s);

struct ExecError {
  ErrorKind kind = ErrorKind::Other;
  std::string ename;  // host exception class
  std::string message;
  std::string traceback;

  bool operator==(const ExecError&) const = default;
};

struct ExecutionResult {
  std::optional<Value> execute_result;
  std::string stream_output;
  std::optional<ExecError> error;
  double duration = 0;  // seconds

  bool ok() const { return !error.has_value(); }
};

nlohmann::ordered_json execution_result_to_json(const ExecutionResult& r);
ExecutionResult execution_result_from_json(const nlohmann::json& j);

/// Immutable copy of a session's state. Values that could not be serialized are
/// listed in `replayed`; restoring such a snapshot re-executes `code_history`.
struct Snapshot {
  std::string blob;  // serialized namespace
  std::vector<std::string> replayed;
  std::vector<std::string> code_history;
  std::string console_log;
  int execution_count = 0;

  int created_at_execution_count() const { return execution_count; }
  bool needs_replay() const { return !replayed.empty(); }
};

using SnapshotPtr = std::shared_ptr<const Snapshot>;

enum class DescribeStyle { Compact, Verbose };

/// A stateful execution session: namespace, executed-code history and console
/// transcript, hosted in its own kernel process. Not thread-safe.
class Session {
 public:
  struct Options {
    std::filesystem::path workdir;  // created if missing; data lives under workdir/inputs
    std::string python = default_python();
    double default_max_time = 30.0;
    /// Hard-kill margin beyond max_time when the kernel fails to interrupt itself.
    double kill_margin = 0.4;
  };

  explicit Session(Options opts);

  /// Runs `code`. With `enforce_forbidden`, code that mentions any of
  /// `restrictions.forbid_names` is refused before running. Timed-out code
  /// leaves the namespace as it was and is not added to the history.
  ExecutionResult execute(const std::string& code, const ExecutionConfig& restrictions = {},
                          bool enforce_forbidden = true);

  /// Throws SnapshotUnsupported when `allow_replay` is false and a value cannot be serialized.
  SnapshotPtr snapshot(bool allow_replay = true);
  void restore(const Snapshot& snap);
  /// Fresh, empty session (same workdir).
  void reset();

  std::vector<std::string> variable_names();
  /// Materialized values. `names` absent means every user variable; `limit`
  /// truncates sequences and tables to their first rows.
  Namespace export_values(const std::optional<std::vector<std::string>>& names = std::nullopt,
                          std::optional<std::size_t> limit = std::nullopt);

  std::string describe_variables(DescribeStyle style, std::size_t head_rows = 5);

  /// Raw kernel request for operations the session does not wrap.
  nlohmann::json kernel_call(const nlohmann::json& request,
                             std::chrono::duration<double> timeout = std::chrono::seconds(600));

  const std::vector<std::string>& code_history() const { return history_; }
  const std::string& console_log() const { return console_; }
  int execution_count() const { return static_cast<int>(history_.size()); }
  const std::filesystem::path& workdir() const { return opts_.workdir; }
  std::filesystem::path inputs_dir() const { return opts_.workdir / "inputs"; }
  const Options& options() const { return opts_; }

 private:
  void ensure_ready();
  void replay(const std::vector<std::string>& history);

  Options opts_;
  Kernel kernel_;
  std::vector<std::string> history_;
  std::string console_;
  bool stale_ = false;  // kernel was killed; rebuild from history before the next request
};

/// Renders a namespace the way describe_variables does (used for exported snapshots).
std::string describe_namespace(const Namespace& ns, DescribeStyle style, std::size_t head_rows = 5);

/// Reference execution of one problem.
struct GroundTruthStep {
  SnapshotPtr pre;
  SnapshotPtr post;
  ExecutionResult reference_result;
  Namespace pre_values;
  Namespace post_values;
  /// Names the reference created, modified or deleted.
  std::set<std::string> changed;
};

struct GroundTruth {
  std::vector<GroundTruthStep> steps;
};

/// Executes the preamble then every reference in order on `session` (which is
/// reset first). Any crash or timeout throws IntegrityError naming the problem
/// (-1 for the preamble). References run without name restrictions and with at
/// least the session's default time limit.
GroundTruth build_ground_truth(const Problemset& ps, Session& session);

/// Names whose values differ between two exported namespaces, including added and removed ones.
std::set<std::string> changed_names(const Namespace& before, const Namespace& after);

}  // namespace dseval
