#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dseval/session.hpp"
#include "dseval/validators.hpp"

namespace dseval {

/// Declared from lowest to highest priority.
enum class VerdictCategory {
  Correct,
  IntactViolation,
  PresentationError,
  WrongOutput,
  WrongVariables,
  UnitTestFailure,
  Timeout,
  Crash,
  SyntaxError,
};

enum class Subverdict {
  None,
  IndexMismatch,
  MissingReturn,
  PartialMatch,
  NonCode,
  ShapeMismatch,
  DtypeMismatch,
  ColumnsMismatch,
  ValueMismatch,
  UnexpectedType,
  Others,
  ModuleNotFound,
  AttributeError,
  KeyError,
  NameError,
  TypeError,
  ValueError,
};

std::string category_name(VerdictCategory c);     // "Presentation Error"
std::string subverdict_name(Subverdict s);        // "Missing Return"; empty for None
std::optional<VerdictCategory> category_from_name(const std::string& s);
std::optional<Subverdict> subverdict_from_name(const std::string& s);

/// Subverdicts allowed under a category (empty for leaf categories).
std::vector<Subverdict> subverdicts_of(VerdictCategory c);

/// All 32 failure leaves in catalog order, plus nothing for Correct.
std::vector<std::pair<VerdictCategory, Subverdict>> verdict_leaves();

struct Verdict {
  VerdictCategory category = VerdictCategory::Correct;
  Subverdict subverdict = Subverdict::None;
  std::string detail;

  /// "Category / Subcategory", or just the category for leaf categories.
  std::string name() const;
  static Verdict from_name(const std::string& name, std::string detail = {});

  bool passed() const { return category == VerdictCategory::Correct; }
  bool passed_wo_intact() const { return passed() || category == VerdictCategory::IntactViolation; }
  bool passed_wo_pe() const { return passed() || category == VerdictCategory::PresentationError; }
  bool operator==(const Verdict& o) const { return category == o.category && subverdict == o.subverdict; }
};

Subverdict subverdict_for_mismatch(std::optional<MismatchKind> k);
Subverdict subverdict_for_error(ErrorKind k);

/// Maps a fully evaluated (not short-circuited) outcome tree to one verdict.
/// Presentation errors are found by relaxed re-checks against the reference result.
Verdict classify_verdict(const ValidationContext& ctx, const NodeOutcome& outcome);

/// Validates with the full tree and classifies.
Verdict evaluate_submission(const ValidatorConfig& cfg, const ValidationContext& ctx);

/// Compact, serializable view of an execution.
struct ExecutionSummary {
  std::optional<std::string> execute_result;  // repr, truncated
  std::string stream_output;
  std::optional<ExecError> error;
  double duration = 0;

  static ExecutionSummary of(const ExecutionResult& r);
  bool operator==(const ExecutionSummary&) const = default;
};

enum class RunMode { Reset, Propagate };
std::string mode_name(RunMode m);
RunMode mode_from_name(const std::string& s);

struct EvaluationRecord {
  std::string benchmark;
  std::string problemset;
  int problem_index = 0;
  std::string agent;
  RunMode mode = RunMode::Reset;
  std::string query;
  std::string submission_code;
  std::string reference_code;
  ExecutionSummary execution;
  Verdict verdict;
  int attempts = 1;
  double duration = 0;
  std::string timestamp;

  bool operator==(const EvaluationRecord& o) const;
};

nlohmann::ordered_json record_to_json(const EvaluationRecord& r);
EvaluationRecord record_from_json(const nlohmann::json& j);

struct Metrics {
  bool empty = true;
  std::size_t total = 0;
  double pass_rate = 0;
  double pass_rate_error_prop = 0;
  double pass_rate_wo_intact = 0;
  double pass_rate_wo_pe = 0;
  /// False when no propagate-mode records were given; the error-prop rate then repeats pass_rate.
  bool error_prop_measured = false;
  std::map<std::string, int> category_counts;
  std::map<std::string, int> verdict_counts;  // by full verdict name
};

/// Rates over reset-mode records (all records when none are reset-mode);
/// the error-prop rate over propagate-mode records.
Metrics aggregate_metrics(const std::vector<EvaluationRecord>& records);

nlohmann::ordered_json metrics_to_json(const Metrics& m);

}  // namespace dseval
