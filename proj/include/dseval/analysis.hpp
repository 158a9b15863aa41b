#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "dseval/llm.hpp"
#include "dseval/runner.hpp"
#include "dseval/syntax.hpp"

namespace dseval {

enum class DependencyKind { Session, Semantic };

struct DependencyEdge {
  int from = 0;
  int to = 0;
  DependencyKind kind = DependencyKind::Session;
  std::vector<std::string> names;  // variables carried along a session edge
  bool operator==(const DependencyEdge&) const = default;
};

struct DependencyGraph {
  std::vector<int> nodes;
  std::vector<DependencyEdge> edges;
  bool semantic_analyzed = false;  // false: semantic edges were not looked for

  /// Nodes on the longest path (1 for a graph without edges, 0 when empty).
  int max_chain_length() const;
  double mean_in_degree() const;
  std::vector<int> in_degrees() const;
  /// Graphviz text.
  std::string to_dot(const std::string& name) const;
};

/// Decides whether `later`'s query needs `earlier`'s query to be understood.
using SemanticClassifier = std::function<bool(const Problem& earlier, const Problem& later)>;

/// Asks a chat model for a yes/no answer per pair.
SemanticClassifier llm_semantic_classifier(std::shared_ptr<ChatClient> client);

/// Session edges: j reads a name whose nearest preceding writer is problem i.
/// Writers are names a reference binds or changes; the preamble is not a node.
/// Semantic edges are added only with a classifier.
DependencyGraph extract_dependencies(const Problemset& ps, const GroundTruth& gt,
                                     const SemanticClassifier& semantic = nullptr);

struct ApiCoverage {
  std::map<std::string, int> apis;        // qualified name -> count
  std::map<std::string, int> unresolved;  // "receiver.member" -> count
  std::map<std::string, int> user;        // calls into functions defined by the problemset
  void merge(const ApiCoverage& o);
  int total() const;
};

/// Resolves every attribute access, subscript and call by name in the reference
/// code against a session at the problem's post-state (pre-state as fallback).
/// `probe` must be a spare session in the same working directory layout.
ApiCoverage extract_api_coverage(const Problemset& ps, const GroundTruth& gt, Session& probe);

struct ContextSummary {
  bool empty = true;
  std::size_t problems = 0;
  double mean_variables = 0;
  std::size_t max_variables = 0;
  double median_bytes = 0;
  std::size_t max_bytes = 0;
};

struct ContextSample {
  std::size_t variables = 0;
  std::size_t bytes = 0;
};

/// Per problem: variables in the namespace the agent sees (pre-state) and the
/// serialized size of that namespace.
std::vector<ContextSample> context_samples(const GroundTruth& gt);
ContextSummary summarize_contexts(const std::vector<ContextSample>& samples);

struct AnalyzeOptions {
  bool difficulty = false;
  bool dependencies = false;
  bool api_coverage = false;
  bool contexts = false;
  SemanticClassifier semantic;
  Session::Options session;  // workdir: root for session directories (temp when empty)
  ProvisionOptions data;
};

struct AnalysisOutput {
  std::vector<nlohmann::ordered_json> records;  // JSON lines
  std::map<std::string, std::string> graphs;    // problemset id -> DOT text
  std::vector<IntegrityReport> integrity;
};

/// Runs the selected analyses over every problemset of a benchmark directory
/// (or one file). Problemsets whose ground truth fails are reported and left
/// out of the statistics that need it; difficulty only needs parsing.
AnalysisOutput analyze_benchmark(const std::filesystem::path& benchmark, const AnalyzeOptions& opts);

}  // namespace dseval
