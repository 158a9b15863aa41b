#include "dseval/analysis.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "dseval/errors.hpp"
#include "dseval/util.hpp"

namespace dseval {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

int DependencyGraph::max_chain_length() const {
  if (nodes.empty()) return 0;
  // Edges point forward, so node order is a topological order.
  std::map<int, int> longest;
  for (int n : nodes) longest[n] = 1;
  std::vector<DependencyEdge> sorted = edges;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.to < b.to; });
  for (int n : nodes) {
    for (const auto& e : sorted) {
      if (e.to == n) longest[n] = std::max(longest[n], longest[e.from] + 1);
    }
  }
  int best = 0;
  for (const auto& [_, l] : longest) best = std::max(best, l);
  return best;
}

std::vector<int> DependencyGraph::in_degrees() const {
  std::vector<int> out;
  for (int n : nodes) {
    std::set<int> from;
    for (const auto& e : edges) {
      if (e.to == n) from.insert(e.from);
    }
    out.push_back(static_cast<int>(from.size()));
  }
  return out;
}

double DependencyGraph::mean_in_degree() const {
  auto d = in_degrees();
  if (d.empty()) return 0;
  return std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
}

std::string DependencyGraph::to_dot(const std::string& name) const {
  std::ostringstream out;
  out << "digraph \"" << name << "\" {\n";
  for (int n : nodes) out << "  p" << n << " [label=\"" << n << "\"];\n";
  for (const auto& e : edges) {
    out << "  p" << e.from << " -> p" << e.to;
    if (e.kind == DependencyKind::Semantic) {
      out << " [style=dashed]";
    } else if (!e.names.empty()) {
      std::string label;
      for (const auto& n : e.names) label += (label.empty() ? "" : ",") + n;
      out << " [label=\"" << label << "\"]";
    }
    out << ";\n";
  }
  out << "}\n";
  return out.str();
}

SemanticClassifier llm_semantic_classifier(std::shared_ptr<ChatClient> client) {
  return [client](const Problem& earlier, const Problem& later) {
    std::vector<ChatMessage> msgs{
        {"system", "Answer with yes or no only."},
        {"user", "Question A:\n" + earlier.query + "\n\nQuestion B:\n" + later.query +
                     "\n\nCan question B be understood only after reading question A?"}};
    auto reply = trim(client->complete(msgs).text);
    std::transform(reply.begin(), reply.end(), reply.begin(), [](unsigned char c) { return std::tolower(c); });
    return reply.rfind("yes", 0) == 0;
  };
}

DependencyGraph extract_dependencies(const Problemset& ps, const GroundTruth& gt, const SemanticClassifier& semantic) {
  DependencyGraph g;
  std::map<std::string, int> last_writer;  // name -> problem; the preamble writes are not tracked
  for (std::size_t j = 0; j < ps.problems.size(); ++j) {
    const int to = static_cast<int>(j);
    g.nodes.push_back(to);
    auto parsed = parse_code(ps.problems[j].reference_code);
    std::set<std::string> reads, writes;
    if (parsed.ok) {
      auto uses = name_uses(parsed.tree);
      reads = uses.reads;
      writes = uses.writes;
    }
    if (j < gt.steps.size()) writes.insert(gt.steps[j].changed.begin(), gt.steps[j].changed.end());
    std::map<int, std::vector<std::string>> by_source;
    for (const auto& name : reads) {
      auto it = last_writer.find(name);
      if (it != last_writer.end()) by_source[it->second].push_back(name);
    }
    for (auto& [from, names] : by_source) g.edges.push_back(DependencyEdge{from, to, DependencyKind::Session, names});
    for (const auto& name : writes) last_writer[name] = to;
  }
  if (semantic) {
    g.semantic_analyzed = true;
    for (std::size_t j = 1; j < ps.problems.size(); ++j) {
      for (std::size_t i = 0; i < j; ++i) {
        if (semantic(ps.problems[i], ps.problems[j]))
          g.edges.push_back(DependencyEdge{static_cast<int>(i), static_cast<int>(j), DependencyKind::Semantic, {}});
      }
    }
  }
  return g;
}

void ApiCoverage::merge(const ApiCoverage& o) {
  for (const auto& [k, v] : o.apis) apis[k] += v;
  for (const auto& [k, v] : o.unresolved) unresolved[k] += v;
  for (const auto& [k, v] : o.user) user[k] += v;
}

int ApiCoverage::total() const {
  int n = 0;
  for (const auto& [_, v] : apis) n += v;
  return n;
}

namespace {

/// typeof of an expression in the probe session, memoized per state.
struct Resolver {
  Session& probe;
  std::map<std::string, nlohmann::json> cache;

  std::optional<nlohmann::json> type_of(const std::string& expr) {
    if (auto it = cache.find(expr); it != cache.end()) {
      if (it->second.is_null()) return std::nullopt;
      return it->second;
    }
    nlohmann::json r;
    try {
      r = probe.kernel_call(nlohmann::json{{"op", "typeof"}, {"expr", expr}}, std::chrono::seconds(30));
    } catch (const KernelError&) {
      r = nlohmann::json{{"ok", false}};
    }
    cache[expr] = r.value("ok", false) ? r : nlohmann::json();
    if (!r.value("ok", false)) return std::nullopt;
    return r;
  }
};

/// Qualified name of `receiver.member` (member "[]" for indexing), or nullopt.
std::optional<std::string> qualify(const nlohmann::json& t, const std::string& member) {
  std::string base;
  if (t.contains("module")) base = t["module"].get<std::string>();
  else if (t.contains("callable")) base = t["callable"].get<std::string>();
  else if (t.contains("type")) base = t["type"].get<std::string>();
  else return std::nullopt;
  return base + "." + member;
}

}  // namespace

ApiCoverage extract_api_coverage(const Problemset& ps, const GroundTruth& gt, Session& probe) {
  ApiCoverage cov;
  for (std::size_t i = 0; i < ps.problems.size() && i < gt.steps.size(); ++i) {
    auto parsed = parse_code(ps.problems[i].reference_code, true);
    if (!parsed.ok) continue;
    auto sites = access_sites(parsed.tree);
    if (sites.empty()) continue;
    probe.restore(*gt.steps[i].post);
    Resolver post{probe, {}};
    std::vector<std::pair<const AccessSite*, nlohmann::json>> resolved;
    std::vector<const AccessSite*> retry;
    for (const auto& s : sites) {
      if (s.receiver.empty()) {
        cov.unresolved["?." + s.member] += 1;
        continue;
      }
      auto t = post.type_of(s.receiver);
      if (t) resolved.emplace_back(&s, *t);
      else retry.push_back(&s);
    }
    if (!retry.empty()) {
      probe.restore(*gt.steps[i].pre);
      Resolver pre{probe, {}};
      for (const auto* s : retry) {
        auto t = pre.type_of(s->receiver);
        if (t) resolved.emplace_back(s, *t);
        else cov.unresolved[s->kind == AccessSite::Kind::NameCall ? s->receiver + "()" : s->receiver + "." + s->member] += 1;
      }
    }
    for (const auto& [s, t] : resolved) {
      if (s->kind == AccessSite::Kind::NameCall) {
        if (t.contains("callable")) {
          if (t.value("user", false)) cov.user[t["callable"].get<std::string>()] += 1;
          else cov.apis[t["callable"].get<std::string>()] += 1;
        } else if (t.contains("type")) {
          // calling an instance: its __call__
          cov.apis[t["type"].get<std::string>() + ".__call__"] += 1;
        } else {
          cov.unresolved[s->receiver + "()"] += 1;
        }
        continue;
      }
      if (t.value("user", false)) {
        cov.user[t["callable"].get<std::string>() + "." + s->member] += 1;
        continue;
      }
      auto q = qualify(t, s->member);
      if (q) cov.apis[*q] += 1;
      else cov.unresolved[s->receiver + "." + s->member] += 1;
    }
  }
  return cov;
}

std::vector<ContextSample> context_samples(const GroundTruth& gt) {
  std::vector<ContextSample> out;
  for (const auto& s : gt.steps) out.push_back(ContextSample{s.pre_values.size(), s.pre ? s.pre->blob.size() : 0});
  return out;
}

ContextSummary summarize_contexts(const std::vector<ContextSample>& samples) {
  ContextSummary c;
  if (samples.empty()) return c;
  c.empty = false;
  c.problems = samples.size();
  std::vector<std::size_t> bytes;
  double vars = 0;
  for (const auto& s : samples) {
    vars += static_cast<double>(s.variables);
    c.max_variables = std::max(c.max_variables, s.variables);
    c.max_bytes = std::max(c.max_bytes, s.bytes);
    bytes.push_back(s.bytes);
  }
  c.mean_variables = vars / static_cast<double>(samples.size());
  std::sort(bytes.begin(), bytes.end());
  const auto n = bytes.size();
  c.median_bytes = n % 2 ? static_cast<double>(bytes[n / 2]) : (bytes[n / 2 - 1] + bytes[n / 2]) / 2.0;
  return c;
}

namespace {

ojson difficulty_json(const std::string& ps, int index, const DifficultyScore& d) {
  return ojson{{"kind", "difficulty"}, {"problemset", ps},          {"problem", index},
               {"calls", d.calls},     {"expressions", d.expressions}, {"conditions", d.conditions},
               {"loops", d.loops},     {"total", d.total()}};
}

ojson contexts_json(const std::string& scope, const ContextSummary& c) {
  return ojson{{"kind", "contexts"},
               {"problemset", scope},
               {"empty", c.empty},
               {"problems", c.problems},
               {"mean_variables", c.mean_variables},
               {"max_variables", c.max_variables},
               {"median_bytes", c.median_bytes},
               {"max_bytes", c.max_bytes}};
}

}  // namespace

AnalysisOutput analyze_benchmark(const fs::path& benchmark, const AnalyzeOptions& opts) {
  if (!fs::exists(benchmark)) throw ConfigError("benchmark " + benchmark.string() + " does not exist");
  auto files = fs::is_directory(benchmark) ? list_problemset_files(benchmark) : std::vector<fs::path>{benchmark};
  AnalysisOutput out;
  const bool need_gt = opts.dependencies || opts.api_coverage || opts.contexts;

  std::vector<double> difficulty_totals;
  std::vector<ContextSample> all_contexts;
  std::vector<int> all_in_degrees;
  int longest_chain = 0;
  ApiCoverage coverage;

  for (const auto& file : files) {
    Problemset ps;
    try {
      ps = parse_problemset(file);
    } catch (const ParseError& e) {
      out.integrity.push_back(IntegrityReport{file.stem().string(), false, -1, std::string("parse error: ") + e.what()});
      continue;
    }
    if (opts.difficulty) {
      for (const auto& p : ps.problems) {
        try {
          auto d = score_difficulty(p.reference_code);
          difficulty_totals.push_back(d.total());
          out.records.push_back(difficulty_json(ps.id, p.index, d));
        } catch (const ParseError& e) {
          out.records.push_back(ojson{{"kind", "difficulty"}, {"problemset", ps.id}, {"problem", p.index},
                                      {"error", e.what()}});
        }
      }
    }
    if (!need_gt) {
      out.integrity.push_back(IntegrityReport{ps.id, true, -1, ""});
      continue;
    }

    ScopedDir guard;
    try {
      auto w = prepare_workspace(ps, opts.session.workdir, opts.session.python, opts.session.default_max_time, opts.data);
      if (opts.session.workdir.empty()) guard.path = w.root;
      Session session(w.session);
      auto gt = build_ground_truth(ps, session);
      out.integrity.push_back(IntegrityReport{ps.id, true, -1, ""});
      if (opts.dependencies) {
        auto g = extract_dependencies(ps, gt, opts.semantic);
        ojson edges = ojson::array();
        for (const auto& e : g.edges) {
          edges.push_back(ojson{{"from", e.from},
                                {"to", e.to},
                                {"kind", e.kind == DependencyKind::Session ? "session" : "semantic"},
                                {"names", e.names}});
        }
        out.records.push_back(ojson{{"kind", "dependencies"},
                                    {"problemset", ps.id},
                                    {"nodes", g.nodes},
                                    {"edges", edges},
                                    {"semantic", g.semantic_analyzed ? "analyzed" : "omitted"},
                                    {"max_chain_length", g.max_chain_length()},
                                    {"mean_in_degree", g.mean_in_degree()}});
        out.graphs[ps.id] = g.to_dot(ps.id);
        auto d = g.in_degrees();
        all_in_degrees.insert(all_in_degrees.end(), d.begin(), d.end());
        longest_chain = std::max(longest_chain, g.max_chain_length());
      }
      if (opts.api_coverage) {
        Session probe(w.reference);
        coverage.merge(extract_api_coverage(ps, gt, probe));
      }
      if (opts.contexts) {
        auto samples = context_samples(gt);
        out.records.push_back(contexts_json(ps.id, summarize_contexts(samples)));
        all_contexts.insert(all_contexts.end(), samples.begin(), samples.end());
      }
    } catch (const IntegrityError& e) {
      out.integrity.push_back(IntegrityReport{ps.id, false, e.problem(), e.what()});
    } catch (const Error& e) {
      out.integrity.push_back(IntegrityReport{ps.id, false, -1, e.what()});
    }
  }

  if (opts.difficulty) {
    double mean = difficulty_totals.empty()
                      ? 0.0
                      : std::accumulate(difficulty_totals.begin(), difficulty_totals.end(), 0.0) /
                            static_cast<double>(difficulty_totals.size());
    out.records.push_back(ojson{{"kind", "difficulty_summary"},
                                {"problems", difficulty_totals.size()},
                                {"mean_total", mean}});
  }
  if (opts.dependencies) {
    double mean = all_in_degrees.empty() ? 0.0
                                         : std::accumulate(all_in_degrees.begin(), all_in_degrees.end(), 0.0) /
                                               static_cast<double>(all_in_degrees.size());
    out.records.push_back(ojson{{"kind", "dependencies_summary"},
                                {"problems", all_in_degrees.size()},
                                {"mean_in_degree", mean},
                                {"max_chain_length", longest_chain},
                                {"semantic", opts.semantic ? "analyzed" : "omitted"}});
  }
  if (opts.api_coverage) {
    std::vector<std::pair<std::string, int>> sorted(coverage.apis.begin(), coverage.apis.end());
    std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    ojson apis = ojson::array();
    for (const auto& [k, v] : sorted) apis.push_back(ojson{{"api", k}, {"count", v}});
    out.records.push_back(ojson{{"kind", "api_coverage"},
                                {"calls", coverage.total()},
                                {"distinct", coverage.apis.size()},
                                {"apis", apis},
                                {"unresolved", coverage.unresolved},
                                {"user", coverage.user}});
  }
  if (opts.contexts) out.records.push_back(contexts_json("*", summarize_contexts(all_contexts)));
  return out;
}

}  // namespace dseval
