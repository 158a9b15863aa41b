#pragma once

#include <set>
#include <string>
#include <vector>

#include <json.hpp>

namespace dseval {

/// Host-language syntax tree as produced by the kernel's `parse` op: every node
/// is an object with "_type" (node class) and "_base" (expr, stmt, ...).
struct ParsedCode {
  bool ok = false;
  nlohmann::ordered_json tree;  // Module node when ok; fields in grammar order
  std::string error_message;  // syntax error text otherwise
  int error_line = 0;
};

/// Parses `code` with a process-wide parser kernel. Thread-safe.
/// With `receivers`, Attribute/Subscript nodes carry "_recv", the source text of their operand.
ParsedCode parse_code(const std::string& code, bool receivers = false);

struct DifficultyScore {
  int calls = 0;
  int expressions = 0;
  int conditions = 0;
  int loops = 0;

  int total() const { return calls + expressions + conditions + loops; }
  bool operator==(const DifficultyScore&) const = default;
};

/// Counts over a parsed tree: Call nodes; all other expression nodes except
/// inline conditionals; if-statements, inline conditionals and comprehension
/// filters; for/while loops and comprehension clauses.
DifficultyScore count_difficulty(const nlohmann::ordered_json& tree);

/// Parses then counts. Throws ParseError (cell 0) when the code does not parse.
DifficultyScore score_difficulty(const std::string& code);

/// Every identifier-like token the code mentions: variable names in any
/// context, attribute names, imported names and string constants.
std::set<std::string> mentioned_names(const nlohmann::ordered_json& tree);

struct NameUse {
  std::set<std::string> reads;   // module-level names read before this code binds them
  std::set<std::string> writes;  // module-level names this code binds
};

/// Scope-aware read/write sets of a module. Names local to functions, lambdas
/// and comprehensions are excluded.
NameUse name_uses(const nlohmann::ordered_json& tree);

/// Number of top-level statements in a module tree.
std::size_t statement_count(const nlohmann::ordered_json& tree);

/// True when the text reads as natural-language prose rather than source code.
/// Only meaningful for text that fails to parse.
bool looks_like_prose(const std::string& text);

/// One attribute access, subscript or call site inside a tree.
struct AccessSite {
  enum class Kind { Attribute, Subscript, NameCall };
  Kind kind = Kind::Attribute;
  std::string receiver;  // operand source text (Attribute/Subscript) or the called name
  std::string member;    // attribute name; "[]" for subscripts; empty for NameCall
  bool simple = false;   // receiver is a plain name/attribute/constant-subscript chain
};

/// Requires a tree parsed with `receivers`.
std::vector<AccessSite> access_sites(const nlohmann::ordered_json& tree);

}  // namespace dseval
