#include "dseval/dseal.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "dseval/errors.hpp"

namespace dseval {

using ojson = nlohmann::ordered_json;

namespace {

struct KeyAlias {
  std::string_view key;
  ValidatorKind kind;
};

constexpr KeyAlias kValidatorKeys[] = {
    {"crash", ValidatorKind::Crash},
    {"error", ValidatorKind::Crash},
    {"execute_result", ValidatorKind::ExecuteResult},
    {"result", ValidatorKind::ExecuteResult},
    {"namespace_check", ValidatorKind::NamespaceCheck},
    {"table_test", ValidatorKind::TableTest},
    {"model", ValidatorKind::Model},
    {"stream_output", ValidatorKind::StreamOutput},
    {"output", ValidatorKind::StreamOutput},
    {"answer_in_source", ValidatorKind::AnswerInSource},
    {"namespace_intact", ValidatorKind::NamespaceIntact},
    {"intact", ValidatorKind::NamespaceIntact},
    {"and", ValidatorKind::And},
    {"or", ValidatorKind::Or},
    {"template", ValidatorKind::Template},
};

const std::set<std::string> kKnownTemplates = {"basic"};

}  // namespace

std::string_view validator_key(ValidatorKind kind) {
  switch (kind) {
    case ValidatorKind::Crash: return "crash";
    case ValidatorKind::ExecuteResult: return "execute_result";
    case ValidatorKind::NamespaceCheck: return "namespace_check";
    case ValidatorKind::TableTest: return "table_test";
    case ValidatorKind::Model: return "model";
    case ValidatorKind::StreamOutput: return "stream_output";
    case ValidatorKind::AnswerInSource: return "answer_in_source";
    case ValidatorKind::NamespaceIntact: return "namespace_intact";
    case ValidatorKind::And: return "and";
    case ValidatorKind::Or: return "or";
    case ValidatorKind::Template: return "template";
  }
  return "?";
}

std::optional<ValidatorKind> validator_kind_from_key(std::string_view key) {
  for (const auto& a : kValidatorKeys) {
    if (a.key == key) return a.kind;
  }
  return std::nullopt;
}

ValidatorConfig ValidatorConfig::leaf(ValidatorKind k, ojson opts) {
  ValidatorConfig c;
  c.kind = k;
  c.options = opts.is_null() ? ojson::object() : std::move(opts);
  return c;
}

ValidatorConfig ValidatorConfig::all_of(std::vector<ValidatorConfig> children) {
  ValidatorConfig c;
  c.kind = ValidatorKind::And;
  c.children = std::move(children);
  return c;
}

ValidatorConfig ValidatorConfig::any_of(std::vector<ValidatorConfig> children) {
  ValidatorConfig c;
  c.kind = ValidatorKind::Or;
  c.children = std::move(children);
  return c;
}

ValidatorConfig ValidatorConfig::basic_template() {
  ValidatorConfig c;
  c.kind = ValidatorKind::Template;
  c.options = ojson{{"template", "basic"}};
  return c;
}

void check_validator_config(const ValidatorConfig& cfg) {
  if (cfg.is_compound()) {
    if (cfg.children.empty()) {
      throw ConfigError(std::string(validator_key(cfg.kind)) + " validator needs at least one child");
    }
  } else if (cfg.kind == ValidatorKind::Template) {
    auto name = cfg.options.value("template", std::string{});
    if (!kKnownTemplates.count(name)) throw ConfigError("unknown validator template '" + name + "'");
    for (const auto& c : cfg.children) {
      if (c.kind == ValidatorKind::Template) throw ConfigError("nested template");
    }
  } else if (!cfg.children.empty()) {
    throw ConfigError(std::string(validator_key(cfg.kind)) + " validator cannot have children");
  }
  if (!cfg.options.is_object()) {
    throw ConfigError(std::string(validator_key(cfg.kind)) + " options must be a mapping");
  }
  for (const auto& c : cfg.children) check_validator_config(c);
}

// ------------------------------------------------------------------ YAML <-> JSON

namespace {

bool looks_null(const std::string& s) { return s.empty() || s == "~" || s == "null" || s == "Null" || s == "NULL"; }

std::optional<bool> looks_bool(const std::string& s) {
  if (s == "true" || s == "True" || s == "TRUE") return true;
  if (s == "false" || s == "False" || s == "FALSE") return false;
  return std::nullopt;
}

const std::regex& int_re() {
  static const std::regex re(R"([-+]?[0-9]+)");
  return re;
}

const std::regex& float_re() {
  static const std::regex re(R"([-+]?(\.[0-9]+|[0-9]+(\.[0-9]*)?)([eE][-+]?[0-9]+)?|[-+]?\.(inf|Inf|INF)|\.(nan|NaN|NAN))");
  return re;
}

ojson yaml_to_json(const YAML::Node& node) {
  switch (node.Type()) {
    case YAML::NodeType::Undefined:
    case YAML::NodeType::Null: return nullptr;
    case YAML::NodeType::Sequence: {
      ojson arr = ojson::array();
      for (const auto& item : node) arr.push_back(yaml_to_json(item));
      return arr;
    }
    case YAML::NodeType::Map: {
      ojson obj = ojson::object();
      for (const auto& kv : node) obj[kv.first.as<std::string>()] = yaml_to_json(kv.second);
      return obj;
    }
    case YAML::NodeType::Scalar: {
      const std::string s = node.Scalar();
      if (node.Tag() == "!") return s;  // quoted
      if (looks_null(s)) return nullptr;
      if (auto b = looks_bool(s)) return *b;
      if (std::regex_match(s, int_re())) {
        long long v = 0;
        auto [p, ec] = std::from_chars(s.data() + (s[0] == '+'), s.data() + s.size(), v);
        if (ec == std::errc{} && p == s.data() + s.size()) return v;
      }
      if (std::regex_match(s, float_re())) return node.as<double>();
      return s;
    }
  }
  return nullptr;
}

/// Literal blocks with clip chomping reproduce exactly one trailing newline and
/// no trailing blanks; everything else multi-line goes double-quoted.
bool literal_safe(const std::string& s) {
  if (s.size() < 2 || s.back() != '\n' || s[s.size() - 2] == '\n') return false;
  if (s.front() == ' ' || s.front() == '\n' || s.find_first_of("\r\t") != std::string::npos) return false;
  return s.find(" \n") == std::string::npos;
}

bool needs_quotes(const std::string& s) {
  if (looks_null(s) || looks_bool(s)) return true;
  if (std::regex_match(s, int_re()) || std::regex_match(s, float_re())) return true;
  static const std::set<std::string> yaml11 = {"yes", "no", "on", "off", "Yes", "No", "On", "Off", "y", "n"};
  return yaml11.count(s) > 0;
}

std::string format_double(double d) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, d);
  std::string s(buf, p);
  if (s == "inf") return ".inf";
  if (s == "-inf") return "-.inf";
  if (s == "nan" || s == "-nan") return ".nan";
  if (s.find_first_of(".e") == std::string::npos) s += ".0";
  return s;
}

void emit_json(YAML::Emitter& out, const ojson& j) {
  if (j.is_null()) {
    out << YAML::Null;
  } else if (j.is_boolean()) {
    out << (j.get<bool>() ? "true" : "false");
  } else if (j.is_number_integer() || j.is_number_unsigned()) {
    out << j.dump();
  } else if (j.is_number_float()) {
    out << format_double(j.get<double>());
  } else if (j.is_string()) {
    const auto& s = j.get_ref<const std::string&>();
    if (literal_safe(s)) {
      out << YAML::Literal << s;
    } else if (s.find('\n') != std::string::npos) {
      out << YAML::DoubleQuoted << s;
    } else if (needs_quotes(s)) {
      out << YAML::DoubleQuoted << s;
    } else {
      out << s;
    }
  } else if (j.is_array()) {
    out << YAML::BeginSeq;
    for (const auto& item : j) emit_json(out, item);
    out << YAML::EndSeq;
  } else if (j.is_object()) {
    out << YAML::BeginMap;
    for (const auto& [k, v] : j.items()) {
      out << YAML::Key << k << YAML::Value;
      emit_json(out, v);
    }
    out << YAML::EndMap;
  }
}

// ------------------------------------------------------------------ validator trees

ValidatorConfig validator_entry(const std::string& key, const YAML::Node& value, int cell);

std::vector<ValidatorConfig> validator_children(const YAML::Node& node, int cell, const std::string& parent) {
  std::vector<ValidatorConfig> out;
  if (node.IsMap()) {
    for (const auto& kv : node) out.push_back(validator_entry(kv.first.as<std::string>(), kv.second, cell));
  } else if (node.IsSequence()) {
    for (const auto& item : node) {
      if (!item.IsMap()) throw ParseError(cell, parent + ": list items must be validator mappings");
      for (const auto& kv : item) out.push_back(validator_entry(kv.first.as<std::string>(), kv.second, cell));
    }
  } else if (!node.IsNull()) {
    throw ParseError(cell, parent + ": expected a mapping or list of validators");
  }
  return out;
}

ValidatorConfig validator_entry(const std::string& key, const YAML::Node& value, int cell) {
  auto kind = validator_kind_from_key(key);
  if (!kind) throw ParseError(cell, "unknown validator '" + key + "'");
  if (*kind == ValidatorKind::Template) throw ParseError(cell, "template is only allowed at the top of a validator block");
  ValidatorConfig cfg;
  cfg.kind = *kind;
  if (cfg.is_compound()) {
    cfg.children = validator_children(value, cell, key);
    if (cfg.children.empty()) throw ParseError(cell, key + " validator needs at least one child");
    return cfg;
  }
  if (!value.IsDefined() || value.IsNull()) return cfg;
  if (!value.IsMap()) throw ParseError(cell, key + ": options must be a mapping");
  cfg.options = yaml_to_json(value);
  return cfg;
}

ValidatorConfig parse_validator_block(const YAML::Node& node, int cell) {
  if (node.IsNull()) return ValidatorConfig::basic_template();
  if (!node.IsMap()) throw ParseError(cell, "validator must be a mapping");
  if (node["template"]) {
    ValidatorConfig cfg;
    cfg.kind = ValidatorKind::Template;
    std::string name = node["template"].as<std::string>();
    if (!kKnownTemplates.count(name)) throw ParseError(cell, "unknown validator template '" + name + "'");
    cfg.options = ojson{{"template", name}};
    for (const auto& kv : node) {
      auto key = kv.first.as<std::string>();
      if (key == "template") continue;
      cfg.children.push_back(validator_entry(key, kv.second, cell));
    }
    return cfg;
  }
  if (node.size() == 1) {
    auto key = node.begin()->first.as<std::string>();
    if (key == "and" || key == "or") return validator_entry(key, node.begin()->second, cell);
  }
  ValidatorConfig cfg = ValidatorConfig::basic_template();
  for (const auto& kv : node) cfg.children.push_back(validator_entry(kv.first.as<std::string>(), kv.second, cell));
  return cfg;
}

void emit_validator_children(YAML::Emitter& out, const std::vector<ValidatorConfig>& children) {
  std::set<ValidatorKind> seen;
  bool unique = true;
  for (const auto& c : children) unique = unique && seen.insert(c.kind).second;
  auto emit_body = [&](const ValidatorConfig& c) {
    if (c.is_compound()) {
      emit_validator_children(out, c.children);
    } else if (c.options.empty()) {
      out << YAML::Null;
    } else {
      emit_json(out, c.options);
    }
  };
  if (unique) {
    out << YAML::BeginMap;
    for (const auto& c : children) {
      out << YAML::Key << std::string(validator_key(c.kind)) << YAML::Value;
      emit_body(c);
    }
    out << YAML::EndMap;
  } else {
    out << YAML::BeginSeq;
    for (const auto& c : children) {
      out << YAML::BeginMap << YAML::Key << std::string(validator_key(c.kind)) << YAML::Value;
      emit_body(c);
      out << YAML::EndMap;
    }
    out << YAML::EndSeq;
  }
}

void emit_validator_block(YAML::Emitter& out, const ValidatorConfig& cfg) {
  if (cfg.kind == ValidatorKind::Template) {
    std::set<ValidatorKind> seen;
    for (const auto& c : cfg.children) {
      if (!seen.insert(c.kind).second) throw ConfigError("template with duplicate validator kinds cannot be serialized");
    }
    out << YAML::BeginMap;
    out << YAML::Key << "template" << YAML::Value << cfg.options.value("template", std::string("basic"));
    {
      for (const auto& c : cfg.children) {
        out << YAML::Key << std::string(validator_key(c.kind)) << YAML::Value;
        if (c.is_compound()) {
          emit_validator_children(out, c.children);
        } else if (c.options.empty()) {
          out << YAML::Null;
        } else {
          emit_json(out, c.options);
        }
      }
    }
    out << YAML::EndMap;
    return;
  }
  std::vector<ValidatorConfig> single{cfg};
  emit_validator_children(out, single);
}

// ------------------------------------------------------------------ cells

bool is_separator(std::string_view line) {
  auto first = line.find_first_not_of(" \t");
  if (first == std::string_view::npos) return false;
  return line.substr(first).rfind("# %%", 0) == 0;
}

std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) {
      if (start < text.size()) lines.emplace_back(text.substr(start));
      break;
    }
    std::string line(text.substr(start, nl - start));
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    start = nl + 1;
  }
  return lines;
}

bool blank(std::string_view s) { return s.find_first_not_of(" \t\r") == std::string_view::npos; }

/// Drops leading/trailing blank lines and trailing whitespace of the block.
std::string trim_block(std::string_view text) {
  auto lines = split_lines(text);
  std::size_t b = 0;
  std::size_t e = lines.size();
  while (b < e && blank(lines[b])) ++b;
  while (e > b && blank(lines[e - 1])) --e;
  std::string out;
  for (std::size_t i = b; i < e; ++i) {
    std::string line = lines[i];
    while (!line.empty() && (line.back() == ' ' || line.back() == '\t')) line.pop_back();
    out += line;
    if (i + 1 < e) out += '\n';
  }
  return out;
}

std::string decode_escapes(std::string_view body) {
  std::string out;
  out.reserve(body.size());
  for (std::size_t i = 0; i < body.size(); ++i) {
    char c = body[i];
    if (c != '\\' || i + 1 >= body.size()) {
      out += c;
      continue;
    }
    char n = body[i + 1];
    switch (n) {
      case '\\': out += '\\'; ++i; break;
      case '\'': out += '\''; ++i; break;
      case '"': out += '"'; ++i; break;
      case 'n': out += '\n'; ++i; break;
      case 't': out += '\t'; ++i; break;
      case 'r': out += '\r'; ++i; break;
      case '\n': ++i; break;
      default: out += c; break;  // unknown escapes are kept verbatim
    }
  }
  return out;
}

struct ConfigSplit {
  std::string config;
  std::string code;
};

/// Position of the first statement in `text`: skips blank and comment lines.
std::size_t first_statement(std::string_view text) {
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    auto first = line.find_first_not_of(" \t\r");
    if (first != std::string_view::npos && line[first] != '#') return pos + first;
    if (nl == std::string_view::npos) return text.size();
    pos = nl + 1;
  }
  return text.size();
}

/// Triple-quoted string literal starting at `pos`, prefix included.
struct Literal {
  bool raw = false;
  std::size_t body_begin = 0;
  std::size_t body_end = 0;
  std::size_t end = 0;
};

std::optional<Literal> triple_quoted_at(std::string_view text, std::size_t pos) {
  Literal lit;
  std::size_t p = pos;
  while (p < text.size() && p < pos + 2 && std::string_view("rRuU").find(text[p]) != std::string_view::npos) {
    if (text[p] == 'r' || text[p] == 'R') lit.raw = true;
    ++p;
  }
  if (text.substr(p, 3) != "\"\"\"" && text.substr(p, 3) != "'''") return std::nullopt;
  std::string_view quote = text.substr(p, 3);
  lit.body_begin = p + 3;
  for (std::size_t i = lit.body_begin; i < text.size(); ++i) {
    if (text[i] == '\\') {
      ++i;
      continue;
    }
    if (text.substr(i, 3) == quote) {
      lit.body_end = i;
      lit.end = i + 3;
      return lit;
    }
  }
  return std::nullopt;
}

ConfigSplit split_config(std::string_view cell, int index) {
  std::size_t start = first_statement(cell);
  if (start >= cell.size()) throw ParseError(index, "cell is missing its configuration string");
  auto lit = triple_quoted_at(cell, start);
  if (!lit) {
    if (cell.substr(start, 1) == "\"" || cell.substr(start, 1) == "'") {
      auto q = cell.substr(start, 3);
      if (q == "\"\"\"" || q == "'''") throw ParseError(index, "unterminated configuration string");
    }
    throw ParseError(index, "first statement of the cell is not a configuration string");
  }
  auto rest_of_line_end = cell.find('\n', lit->end);
  std::string_view tail = cell.substr(lit->end, rest_of_line_end == std::string_view::npos ? std::string_view::npos
                                                                                        : rest_of_line_end - lit->end);
  auto t = tail.find_first_not_of(" \t\r");
  if (t != std::string_view::npos && tail[t] != '#') {
    throw ParseError(index, "unexpected text after the configuration string");
  }
  std::string_view body = cell.substr(lit->body_begin, lit->body_end - lit->body_begin);
  ConfigSplit out;
  out.config = lit->raw ? std::string(body) : decode_escapes(body);
  out.code = rest_of_line_end == std::string_view::npos ? std::string() : trim_block(cell.substr(rest_of_line_end + 1));
  std::size_t next = first_statement(out.code);
  if (next < out.code.size() && triple_quoted_at(out.code, next)) {
    throw ParseError(index, "multiple configuration strings in one cell");
  }
  return out;
}

ExecutionConfig parse_execution(const YAML::Node& node, int cell) {
  ExecutionConfig ex;
  if (node.IsNull()) return ex;
  if (!node.IsMap()) throw ParseError(cell, "execution must be a mapping");
  for (const auto& kv : node) {
    auto key = kv.first.as<std::string>();
    if (key == "forbid_names") {
      if (kv.second.IsSequence()) {
        for (const auto& n : kv.second) ex.forbid_names.push_back(n.as<std::string>());
      } else if (kv.second.IsScalar()) {
        ex.forbid_names.push_back(kv.second.as<std::string>());
      } else if (!kv.second.IsNull()) {
        throw ParseError(cell, "forbid_names must be a list of names");
      }
    } else if (key == "max_time") {
      if (kv.second.IsNull()) continue;
      double t = 0;
      try {
        t = kv.second.as<double>();
      } catch (const YAML::Exception&) {
        throw ParseError(cell, "max_time must be a number");
      }
      if (!(t > 0)) throw ParseError(cell, "max_time must be positive");
      ex.max_time = t;
    } else {
      throw ParseError(cell, "unknown execution key '" + key + "'");
    }
  }
  return ex;
}

DataManifest parse_data(const YAML::Node& node, int cell) {
  DataManifest data;
  if (node.IsNull()) return data;
  if (!node.IsMap()) throw ParseError(cell, "data must be a mapping of filename to URL");
  std::set<std::string> seen;
  for (const auto& kv : node) {
    auto name = kv.first.as<std::string>();
    if (!seen.insert(name).second) throw ParseError(cell, "duplicate data file '" + name + "'");
    if (!kv.second.IsScalar()) throw ParseError(cell, "data URL for '" + name + "' must be a string");
    data.emplace_back(name, kv.second.as<std::string>());
  }
  return data;
}

/// yaml-cpp keeps duplicate mapping keys; the top-level `data` block is checked
/// for them by re-scanning the raw text, since some emitters collapse them.
void check_duplicate_data_lines(const std::string& config, int cell) {
  auto lines = split_lines(config);
  bool in_data = false;
  std::size_t indent = 0;
  std::set<std::string> names;
  for (const auto& line : lines) {
    if (blank(line)) continue;
    auto first = line.find_first_not_of(' ');
    if (first == 0) {
      in_data = line.rfind("data:", 0) == 0;
      indent = 0;
      continue;
    }
    if (!in_data) continue;
    if (indent == 0) indent = first;
    if (first != indent) continue;
    auto colon = line.find(": ", first);
    if (colon == std::string::npos) colon = line.find(':', first);
    if (colon == std::string::npos) continue;
    std::string key = line.substr(first, colon - first);
    if (key.size() >= 2 && (key.front() == '"' || key.front() == '\'')) key = key.substr(1, key.size() - 2);
    if (!names.insert(key).second) throw ParseError(cell, "duplicate data file '" + key + "'");
  }
}

Problem parse_problem_cell(std::string_view cell, int cell_index, int problem_index) {
  auto split = split_config(cell, cell_index);
  YAML::Node root;
  try {
    root = YAML::Load(split.config);
  } catch (const YAML::Exception& e) {
    throw ParseError(cell_index, std::string("malformed YAML: ") + e.what());
  }
  if (!root.IsMap()) throw ParseError(cell_index, "configuration must be a YAML mapping");
  check_duplicate_data_lines(split.config, cell_index);

  Problem p;
  p.index = problem_index;
  bool has_query = false;
  for (const auto& kv : root) {
    auto key = kv.first.as<std::string>();
    try {
      if (key == "query") {
        if (!kv.second.IsScalar()) throw ParseError(cell_index, "query must be text");
        p.query = kv.second.as<std::string>();
        has_query = true;
      } else if (key == "validator") {
        p.validator = parse_validator_block(kv.second, cell_index);
      } else if (key == "execution") {
        p.execution = parse_execution(kv.second, cell_index);
      } else if (key == "data") {
        p.data = parse_data(kv.second, cell_index);
      } else {
        throw ParseError(cell_index, "unknown configuration key '" + key + "'");
      }
    } catch (const YAML::Exception& e) {
      throw ParseError(cell_index, "bad '" + key + "' block: " + e.what());
    }
  }
  if (!has_query || blank(p.query)) throw ParseError(cell_index, "query is required and must be non-empty");
  p.reference_code = std::move(split.code);
  return p;
}

bool looks_like_config(std::string_view cell) {
  std::size_t start = first_statement(cell);
  auto lit = triple_quoted_at(cell, start);
  if (!lit) return false;
  try {
    auto node = YAML::Load(std::string(cell.substr(lit->body_begin, lit->body_end - lit->body_begin)));
    return node.IsMap() && node["query"];
  } catch (const YAML::Exception&) {
    return false;
  }
}

}  // namespace

Problemset parse_problemset_text(std::string_view text, std::string id) {
  if (id.empty()) throw ParseError(0, "problemset id must be non-empty");
  std::vector<std::string> cells(1);
  for (const auto& line : split_lines(text)) {
    if (is_separator(line)) {
      cells.emplace_back();
      continue;
    }
    cells.back() += line;
    cells.back() += '\n';
  }
  // A file may open with a separator before its setup cell.
  if (cells.size() > 1 && blank(cells.front()) && !looks_like_config(cells[1])) cells.erase(cells.begin());

  Problemset ps;
  ps.id = std::move(id);
  ps.preamble = trim_block(cells.front());
  if (looks_like_config(cells.front())) {
    throw ParseError(0, "the first cell is setup code and must not carry a configuration string");
  }
  for (std::size_t i = 1; i < cells.size(); ++i) {
    ps.problems.push_back(parse_problem_cell(cells[i], static_cast<int>(i), static_cast<int>(i - 1)));
  }
  return ps;
}

Problemset parse_problemset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(0, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  auto ps = parse_problemset_text(buf.str(), path.stem().string());
  ps.source_path = path;
  return ps;
}

std::string serialize_problem_config(const Problem& p) {
  YAML::Emitter out;
  out.SetIndent(2);
  out << YAML::BeginMap;
  out << YAML::Key << "query" << YAML::Value;
  if (literal_safe(p.query)) {
    out << YAML::Literal << p.query;
  } else if (needs_quotes(p.query) || p.query.find('\n') != std::string::npos) {
    out << YAML::DoubleQuoted << p.query;
  } else {
    out << p.query;
  }
  bool default_validator = p.validator == ValidatorConfig::basic_template();
  if (!default_validator) {
    out << YAML::Key << "validator" << YAML::Value;
    emit_validator_block(out, p.validator);
  }
  if (!p.execution.empty()) {
    out << YAML::Key << "execution" << YAML::Value << YAML::BeginMap;
    if (!p.execution.forbid_names.empty()) {
      out << YAML::Key << "forbid_names" << YAML::Value << YAML::BeginSeq;
      for (const auto& n : p.execution.forbid_names) out << n;
      out << YAML::EndSeq;
    }
    if (p.execution.max_time) out << YAML::Key << "max_time" << YAML::Value << format_double(*p.execution.max_time);
    out << YAML::EndMap;
  }
  if (!p.data.empty()) {
    out << YAML::Key << "data" << YAML::Value << YAML::BeginMap;
    for (const auto& [name, url] : p.data) out << YAML::Key << name << YAML::Value << url;
    out << YAML::EndMap;
  }
  out << YAML::EndMap;
  if (!out.good()) throw ConfigError(std::string("cannot serialize configuration: ") + out.GetLastError());
  return out.c_str();
}

std::string serialize_problemset(const Problemset& ps) {
  std::string out = ps.preamble;
  if (!out.empty()) out += "\n";
  for (const auto& p : ps.problems) {
    check_validator_config(p.validator);
    std::string config = serialize_problem_config(p);
    std::string quote = "\"\"\"";
    bool raw = config.find('\\') != std::string::npos;
    if (config.find("\"\"\"") != std::string::npos) quote = "'''";
    if (!out.empty()) out += "\n";
    out += "# %%\n";
    out += raw ? "r" : "";
    out += quote + "\n" + config + "\n" + quote + "\n";
    if (!p.reference_code.empty()) out += "\n" + p.reference_code + "\n";
  }
  return out;
}

std::vector<std::filesystem::path> list_problemset_files(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  if (!std::filesystem::is_directory(dir)) return files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".py") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace dseval
