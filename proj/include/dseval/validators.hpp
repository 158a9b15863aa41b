#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dseval/compare.hpp"
#include "dseval/dseal.hpp"
#include "dseval/session.hpp"

namespace dseval {

/// Everything a validator may look at for one attempt.
struct ValidationContext {
  const Problem* problem = nullptr;
  std::string submission_code;
  ExecutionResult submission_result;
  Session* submission_session = nullptr;  // state after the submission ran
  const GroundTruthStep* reference = nullptr;
  /// State the submission started from, when it differs from the reference
  /// pre-state (error-propagation runs). Intactness is judged against it.
  std::optional<Namespace> submission_pre;
  /// A session holding the reference post-state; needed by table_test and model.
  std::function<Session&()> reference_session;

  /// Every user variable of the submission session, exported once.
  const Namespace& submission_values() const;

 private:
  mutable std::optional<Namespace> submission_values_;
};

/// Outcome of one validator node.
struct NodeOutcome {
  ValidatorKind kind = ValidatorKind::Crash;
  bool pass = true;
  bool evaluated = true;  // false when skipped by short-circuiting
  std::string detail;
  std::optional<MismatchKind> mismatch;  // comparison leaves
  std::string variable;                  // namespace_check: offending variable
  std::optional<ExecError> error;        // table_test/model: failure raised by the candidate
  nlohmann::ordered_json options;        // leaf configuration as given
  std::vector<NodeOutcome> children;

  /// Leaves that make the tree fail: failing leaves reached through failing nodes.
  std::vector<const NodeOutcome*> blocking_leaves() const;
};

/// Expands `template` nodes (recursively); other nodes are returned unchanged.
/// `basic` becomes and[crash, namespace_intact, <user checks>, or[<user result validators> or execute_result,
/// answer_in_source]]. Throws ConfigError for unknown template names.
ValidatorConfig expand_template(const ValidatorConfig& cfg);

/// Evaluates an expanded tree. With `short_circuit`, `and` stops at the first
/// failing child and `or` at the first passing one. Throws ConfigError for
/// misconfiguration (unknown variable, missing reference function, ...).
NodeOutcome run_validator(const ValidatorConfig& cfg, const ValidationContext& ctx, bool short_circuit = true);

/// Text a notebook would show for a cell: console stream then the result's repr.
std::string cell_output_text(const ExecutionResult& r);

/// Canonical text of a reference answer for source matching; empty when the
/// answer has no compact literal rendering.
std::string answer_text(const Value& v);

/// Word-bounded occurrence of `needle` in `haystack` after both are whitespace-stripped.
bool contains_answer(const std::string& haystack, const std::string& needle);

}  // namespace dseval
