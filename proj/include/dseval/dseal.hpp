#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

namespace dseval {

enum class ValidatorKind {
  Crash,
  ExecuteResult,
  NamespaceCheck,
  TableTest,
  Model,
  StreamOutput,
  AnswerInSource,
  NamespaceIntact,
  And,
  Or,
  Template,
};

/// Canonical configuration key for a validator kind, e.g. "namespace_intact".
std::string_view validator_key(ValidatorKind kind);
/// Accepts canonical keys and aliases ("result", "output", "error", "intact").
std::optional<ValidatorKind> validator_kind_from_key(std::string_view key);

/// Node of a validator configuration tree.
struct ValidatorConfig {
  ValidatorKind kind = ValidatorKind::Template;
  nlohmann::ordered_json options = nlohmann::ordered_json::object();
  std::vector<ValidatorConfig> children;

  bool is_compound() const { return kind == ValidatorKind::And || kind == ValidatorKind::Or; }
  bool operator==(const ValidatorConfig&) const = default;

  static ValidatorConfig leaf(ValidatorKind k, nlohmann::ordered_json opts = nlohmann::ordered_json::object());
  static ValidatorConfig all_of(std::vector<ValidatorConfig> children);
  static ValidatorConfig any_of(std::vector<ValidatorConfig> children);
  /// `template: basic` with no user keys.
  static ValidatorConfig basic_template();
};

/// Throws ConfigError when the tree violates its structural invariants.
void check_validator_config(const ValidatorConfig& cfg);

struct ExecutionConfig {
  std::vector<std::string> forbid_names;
  std::optional<double> max_time;  // seconds

  bool empty() const { return forbid_names.empty() && !max_time; }
  bool operator==(const ExecutionConfig&) const = default;
};

/// Ordered filename -> URL pairs.
using DataManifest = std::vector<std::pair<std::string, std::string>>;

struct Problem {
  int index = 0;
  std::string query;
  ValidatorConfig validator = ValidatorConfig::basic_template();
  ExecutionConfig execution;
  DataManifest data;
  std::string reference_code;

  bool operator==(const Problem&) const = default;
};

struct Problemset {
  std::string id;
  std::string preamble;
  std::vector<Problem> problems;
  std::filesystem::path source_path;

  /// Structural equality; the source path is not part of the structure.
  bool operator==(const Problemset& o) const {
    return id == o.id && preamble == o.preamble && problems == o.problems;
  }
};

/// Parses problemset text. `id` names the result; cells are separated by lines
/// starting with `# %%`. Throws ParseError.
Problemset parse_problemset_text(std::string_view text, std::string id);

/// Reads and parses a problemset file; the id is the file stem.
Problemset parse_problemset(const std::filesystem::path& path);

std::string serialize_problemset(const Problemset& ps);

/// The configuration block of one problem as YAML text (no quotes).
std::string serialize_problem_config(const Problem& p);

/// Problemset files (*.py) directly under `dir`, sorted by name.
std::vector<std::filesystem::path> list_problemset_files(const std::filesystem::path& dir);

}  // namespace dseval
