#include "dseval/syntax.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <mutex>
#include <sstream>

#include "dseval/errors.hpp"
#include "dseval/kernel.hpp"

namespace dseval {

using ojson = nlohmann::ordered_json;

namespace {

std::mutex parser_mutex;

Kernel& parser_kernel() {
  static Kernel kernel(Kernel::Options{std::filesystem::temp_directory_path(), default_python()});
  return kernel;
}

const std::string& node_type(const ojson& n) {
  static const std::string empty;
  auto it = n.find("_type");
  return it == n.end() ? empty : it->get_ref<const std::string&>();
}

bool is_base(const ojson& n, const char* base) {
  auto it = n.find("_base");
  return it != n.end() && *it == base;
}

template <class F>
void for_each_child(const ojson& n, F&& f) {
  if (n.is_array()) {
    for (const auto& c : n) f(c);
  } else if (n.is_object()) {
    for (const auto& [k, v] : n.items()) {
      if (!k.empty() && k[0] == '_') continue;
      if (v.is_object() || v.is_array()) f(v);
    }
  }
}

void count(const ojson& n, DifficultyScore& s) {
  if (n.is_object()) {
    const auto& t = node_type(n);
    if (t == "Call") {
      ++s.calls;
    } else if (t == "IfExp" || t == "If") {
      ++s.conditions;
    } else if (t == "For" || t == "AsyncFor" || t == "While") {
      ++s.loops;
    } else if (t == "comprehension") {
      ++s.loops;
      if (auto it = n.find("ifs"); it != n.end()) s.conditions += static_cast<int>(it->size());
    } else if (is_base(n, "expr")) {
      ++s.expressions;
    }
  }
  for_each_child(n, [&](const ojson& c) { count(c, s); });
}

void mentioned(const ojson& n, std::set<std::string>& out) {
  if (n.is_object()) {
    const auto& t = node_type(n);
    if (t == "Name") {
      out.insert(n["id"].get<std::string>());
    } else if (t == "Attribute") {
      out.insert(n["attr"].get<std::string>());
    } else if (t == "Constant" && n["value"].is_string()) {
      out.insert(n["value"].get<std::string>());
    } else if (t == "alias") {
      out.insert(n["name"].get<std::string>());
      if (n["asname"].is_string()) out.insert(n["asname"].get<std::string>());
    } else if (t == "keyword" && n["arg"].is_string()) {
      out.insert(n["arg"].get<std::string>());
    } else if (t == "ImportFrom" && n["module"].is_string()) {
      out.insert(n["module"].get<std::string>());
    }
  }
  for_each_child(n, [&](const ojson& c) { mentioned(c, out); });
}

/// Names bound by Store-context Name nodes anywhere under `n`, not descending
/// into nested function, lambda or class bodies.
void stored_names(const ojson& n, std::set<std::string>& out) {
  if (n.is_object()) {
    const auto& t = node_type(n);
    if (t == "Name" && n["ctx"] != "Load") out.insert(n["id"].get<std::string>());
    if (t == "FunctionDef" || t == "AsyncFunctionDef" || t == "ClassDef") {
      out.insert(n["name"].get<std::string>());
      return;
    }
    if (t == "Lambda") return;
    if (t == "alias") {
      auto name = n["asname"].is_string() ? n["asname"].get<std::string>() : n["name"].get<std::string>();
      out.insert(name.substr(0, name.find('.')));
    }
    if (t == "ExceptHandler" && n["name"].is_string()) out.insert(n["name"].get<std::string>());
  }
  for_each_child(n, [&](const ojson& c) { stored_names(c, out); });
}

void arg_names(const ojson& args, std::set<std::string>& out) {
  for (const char* field : {"posonlyargs", "args", "kwonlyargs"}) {
    if (auto it = args.find(field); it != args.end()) {
      for (const auto& a : *it) out.insert(a["arg"].get<std::string>());
    }
  }
  for (const char* field : {"vararg", "kwarg"}) {
    if (auto it = args.find(field); it != args.end() && it->is_object()) out.insert((*it)["arg"].get<std::string>());
  }
}

class UseWalker {
 public:
  NameUse result;

  void visit(const ojson& n, const std::set<std::string>* locals) {
    if (n.is_array()) {
      for (const auto& c : n) visit(c, locals);
      return;
    }
    if (!n.is_object()) return;
    const auto& t = node_type(n);
    if (t == "Name") {
      name(n["id"].get<std::string>(), n["ctx"] == "Load", locals);
    } else if (t == "Assign") {
      visit(n["value"], locals);
      visit(n["targets"], locals);
    } else if (t == "AugAssign") {
      visit(n["value"], locals);
      if (node_type(n["target"]) == "Name") name(n["target"]["id"].get<std::string>(), true, locals);
      visit(n["target"], locals);
    } else if (t == "AnnAssign") {
      visit(n["value"], locals);
      visit(n["target"], locals);
    } else if (t == "NamedExpr") {
      visit(n["value"], locals);
      visit(n["target"], locals);
    } else if (t == "For" || t == "AsyncFor") {
      visit(n["iter"], locals);
      visit(n["target"], locals);
      visit(n["body"], locals);
      visit(n["orelse"], locals);
    } else if (t == "FunctionDef" || t == "AsyncFunctionDef") {
      visit(n["decorator_list"], locals);
      visit_defaults(n["args"], locals);
      std::set<std::string> inner = locals ? *locals : std::set<std::string>{};
      arg_names(n["args"], inner);
      stored_names(n["body"], inner);
      visit(n["body"], &inner);
      bind(n["name"].get<std::string>(), locals);
    } else if (t == "Lambda") {
      visit_defaults(n["args"], locals);
      std::set<std::string> inner = locals ? *locals : std::set<std::string>{};
      arg_names(n["args"], inner);
      visit(n["body"], &inner);
    } else if (t == "ClassDef") {
      visit(n["decorator_list"], locals);
      visit(n["bases"], locals);
      visit(n["keywords"], locals);
      std::set<std::string> inner = locals ? *locals : std::set<std::string>{};
      stored_names(n["body"], inner);
      visit(n["body"], &inner);
      bind(n["name"].get<std::string>(), locals);
    } else if (t == "ListComp" || t == "SetComp" || t == "GeneratorExp" || t == "DictComp") {
      std::set<std::string> inner = locals ? *locals : std::set<std::string>{};
      bool first = true;
      for (const auto& gen : n["generators"]) {
        visit(gen["iter"], first ? locals : &inner);
        first = false;
        stored_names(gen["target"], inner);
        visit(gen["ifs"], &inner);
      }
      if (t == "DictComp") {
        visit(n["key"], &inner);
        visit(n["value"], &inner);
      } else {
        visit(n["elt"], &inner);
      }
    } else if (t == "alias") {
      auto bound = n["asname"].is_string() ? n["asname"].get<std::string>() : n["name"].get<std::string>();
      if (bound != "*") bind(bound.substr(0, bound.find('.')), locals);
    } else if (t == "ExceptHandler") {
      visit(n["type"], locals);
      if (n["name"].is_string()) bind(n["name"].get<std::string>(), locals);
      visit(n["body"], locals);
    } else if (t == "Global" || t == "Nonlocal") {
      // declarations only
    } else {
      for_each_child(n, [&](const ojson& c) { visit(c, locals); });
    }
  }

 private:
  std::set<std::string> bound_;

  void visit_defaults(const ojson& args, const std::set<std::string>* locals) {
    visit(args["defaults"], locals);
    visit(args["kw_defaults"], locals);
  }

  void name(const std::string& id, bool load, const std::set<std::string>* locals) {
    if (locals && locals->count(id)) return;
    if (load) {
      if (!bound_.count(id)) result.reads.insert(id);
    } else {
      bind(id, locals);
    }
  }

  void bind(const std::string& id, const std::set<std::string>* locals) {
    if (locals) return;
    bound_.insert(id);
    result.writes.insert(id);
  }
};

bool simple_chain(const ojson& n) {
  const auto& t = node_type(n);
  if (t == "Name") return true;
  if (t == "Attribute") return simple_chain(n["value"]);
  if (t == "Subscript") return node_type(n["slice"]) == "Constant" && simple_chain(n["value"]);
  return false;
}

void sites(const ojson& n, std::vector<AccessSite>& out) {
  if (n.is_object()) {
    const auto& t = node_type(n);
    if (t == "Attribute" || t == "Subscript") {
      AccessSite s;
      s.kind = t == "Attribute" ? AccessSite::Kind::Attribute : AccessSite::Kind::Subscript;
      s.receiver = n.value("_recv", ojson()).is_string() ? n["_recv"].get<std::string>() : std::string();
      s.member = t == "Attribute" ? n["attr"].get<std::string>() : std::string("[]");
      s.simple = simple_chain(n["value"]);
      out.push_back(std::move(s));
    } else if (t == "Call" && node_type(n["func"]) == "Name") {
      AccessSite s;
      s.kind = AccessSite::Kind::NameCall;
      s.receiver = n["func"]["id"].get<std::string>();
      s.simple = true;
      out.push_back(std::move(s));
    }
  }
  for_each_child(n, [&](const ojson& c) { sites(c, out); });
}

const std::set<std::string>& python_keywords() {
  static const std::set<std::string> kw = {
      "False", "None",   "True",  "and",    "as",   "assert", "async",  "await",    "break", "class",
      "continue", "def", "del",   "elif",   "else", "except", "finally", "for",     "from",  "global",
      "if",    "import", "in",    "is",     "lambda", "nonlocal", "not", "or",       "pass",  "raise",
      "return", "try",   "while", "with",   "yield", "print"};
  return kw;
}

bool prose_line(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> tokens;
  for (std::string tok; in >> tok;) tokens.push_back(tok);
  if (tokens.size() < 3) return false;
  if (python_keywords().count(tokens[0])) return false;
  if (line.find('=') != std::string::npos || line.find('[') != std::string::npos) return false;
  for (std::size_t i = 1; i < line.size(); ++i) {
    unsigned char prev = static_cast<unsigned char>(line[i - 1]);
    if (line[i] == '(' && (std::isalnum(prev) || prev == '_' || prev == '.')) return false;
  }
  int wordy = 0;
  for (const auto& tok : tokens) {
    std::size_t letters = std::count_if(tok.begin(), tok.end(), [](unsigned char c) { return std::isalpha(c); });
    auto dot = tok.find('.');
    bool dotted = dot != std::string::npos && dot + 1 != tok.size();
    if (letters * 2 >= tok.size() && tok.find('_') == std::string::npos && !dotted) ++wordy;
  }
  return wordy * 10 >= static_cast<int>(tokens.size()) * 6;
}

}  // namespace

ParsedCode parse_code(const std::string& code, bool receivers) {
  std::string line;
  {
    std::lock_guard lock(parser_mutex);
    nlohmann::json req = {{"op", "parse"}, {"code", code}, {"receivers", receivers}};
    try {
      line = parser_kernel().call_text(req, std::chrono::seconds(60));
    } catch (const KernelError&) {
      parser_kernel().restart();
      line = parser_kernel().call_text(req, std::chrono::seconds(60));
    }
  }
  auto resp = ojson::parse(line);
  ParsedCode out;
  out.ok = resp.value("ok", false);
  if (out.ok) {
    out.tree = std::move(resp["tree"]);
  } else {
    const auto& err = resp["error"];
    out.error_message = err.value("message", std::string("syntax error"));
    out.error_line = err.value("line", 0);
  }
  return out;
}

DifficultyScore count_difficulty(const ojson& tree) {
  DifficultyScore s;
  count(tree, s);
  return s;
}

DifficultyScore score_difficulty(const std::string& code) {
  auto parsed = parse_code(code);
  if (!parsed.ok) throw ParseError(0, "code does not parse: " + parsed.error_message);
  return count_difficulty(parsed.tree);
}

std::set<std::string> mentioned_names(const ojson& tree) {
  std::set<std::string> out;
  mentioned(tree, out);
  return out;
}

NameUse name_uses(const ojson& tree) {
  UseWalker w;
  w.visit(tree, nullptr);
  return std::move(w.result);
}

std::size_t statement_count(const ojson& tree) {
  auto it = tree.find("body");
  return it == tree.end() ? 0 : it->size();
}

bool looks_like_prose(const std::string& text) {
  std::istringstream in(text);
  int lines = 0;
  int prose = 0;
  for (std::string line; std::getline(in, line);) {
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    ++lines;
    if (prose_line(line.substr(first))) ++prose;
  }
  return lines > 0 && prose * 2 >= lines;
}

std::vector<AccessSite> access_sites(const ojson& tree) {
  std::vector<AccessSite> out;
  sites(tree, out);
  return out;
}

}  // namespace dseval
