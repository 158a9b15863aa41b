#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dseval/llm.hpp"
#include "dseval/runner.hpp"

namespace dseval {

struct IdeaSeed {
  std::string id;
  std::string dataset_description;
  std::string notebook_description;
  std::filesystem::path data_dir;  // base for relative data paths in drafts; may be empty
};

/// Reads *.json / *.yaml / *.yml seeds ({id?, dataset, notebook, data_dir?}); the id
/// defaults to the file stem. Throws ConfigError when both descriptions are empty.
std::vector<IdeaSeed> load_seeds(const std::filesystem::path& dir);

enum class SeedStage { Unstarted, Sketched, Drafted, DraftedWithErrors, Revised, Accepted };
std::string seed_stage_name(SeedStage s);
SeedStage seed_stage_from_name(const std::string& s);

struct PoolEntry {
  std::string seed_id;
  std::filesystem::path path;  // accepted problemset file, relative to the workspace
  std::string sketch;          // sketch it came from; empty for imported examples
};

struct TokenLogEntry {
  std::string seed_id;
  std::string stage;
  long prompt = 0;
  long completion = 0;
};

struct AnnotationState {
  std::vector<PoolEntry> accepted_pool;  // acceptance order
  std::vector<std::string> guide_amendments;
  std::map<std::string, SeedStage> pending;
  std::map<std::string, std::string> sketches;
  std::map<std::string, std::vector<std::string>> draft_issues;  // per seed, for human revision
  std::map<std::string, int> draft_attempts;
  std::string revision_notes;
  std::vector<TokenLogEntry> token_log;

  SeedStage stage_of(const std::string& seed) const;
  nlohmann::ordered_json to_json() const;
  static AnnotationState from_json(const nlohmann::json& j);
};

struct PromptTemplates {
  std::string sketch;      // placeholders: {{guide}} {{dataset_description}} {{notebook_description}} {{examples}}
  std::string problemset;  // placeholders: {{guide}} {{examples}} {{sketch}} {{dataset_description}}
  static PromptTemplates builtin();
  /// sketch.txt and problemset.txt from `dir`; built-in text for missing files.
  static PromptTemplates load(const std::filesystem::path& dir);
};

constexpr std::size_t kMaxFewShot = 5;

struct DraftResult {
  SeedStage stage = SeedStage::Drafted;
  int attempts = 0;
  std::filesystem::path draft_path;
  std::vector<std::string> issues;  // parse errors or integrity failures to fix by hand
};

struct AcceptResult {
  bool accepted = false;
  int failing_problem = -1;
  std::string message;
};

/// LLM-drafting, human-revision loop over a workspace directory:
/// state.json, sketches/<seed>.md, drafts/<seed>.py, accepted/<seed>.py.
class Annotator {
 public:
  struct Options {
    std::uint64_t random_seed = 0;
    int max_draft_attempts = 3;
    Session::Options session;  // for integrity checks; workdir = root for session dirs (temp when empty)
  };

  Annotator(std::filesystem::path workspace, std::shared_ptr<ChatClient> llm, PromptTemplates prompts, Options opts);

  AnnotationState& state() { return state_; }
  const AnnotationState& state() const { return state_; }
  void save() const;

  /// At most kMaxFewShot pool entries; a seeded random choice when the pool is larger.
  std::vector<const PoolEntry*> select_few_shot(const std::string& seed_id, const std::string& stage) const;

  std::vector<ChatMessage> sketch_prompt(const IdeaSeed& seed) const;
  std::vector<ChatMessage> problemset_prompt(const IdeaSeed& seed, const std::string& sketch) const;

  /// Stores the sketch and advances the seed to Sketched. Throws TransportError or Error on empty replies.
  std::string generate_sketch(const IdeaSeed& seed);
  /// Needs a sketch. Retries unparseable drafts up to max_draft_attempts, then runs the integrity check.
  DraftResult generate_problemset(const IdeaSeed& seed);
  /// Adds a revised file to the pool once it parses and passes the integrity check.
  AcceptResult accept_revision(const IdeaSeed& seed, const std::filesystem::path& revised, const std::string& notes,
                               const std::string& guide_amendment = "");

  const std::filesystem::path& workspace() const { return workspace_; }

 private:
  std::string guide_text() const;
  std::string examples_text(const std::vector<const PoolEntry*>& picks, bool sketches) const;
  void log_usage(const std::string& seed, const std::string& stage, const ChatCompletion& c);

  std::filesystem::path workspace_;
  std::shared_ptr<ChatClient> llm_;
  PromptTemplates prompts_;
  Options opts_;
  AnnotationState state_;
};

enum class AnnotationStage { Sketch, Draft, Accept };
AnnotationStage annotation_stage_from_name(const std::string& s);

struct AnnotateConfig {
  std::filesystem::path seeds_dir;
  std::filesystem::path workspace;
  std::string llm_spec;
  AnnotationStage stage = AnnotationStage::Sketch;
  std::filesystem::path prompts_dir;  // built-in templates when empty
  std::uint64_t random_seed = 0;
  int max_draft_attempts = 3;
  std::string notes;
};

/// One CLI stage over every seed that is ready for it; returns a summary.
nlohmann::ordered_json run_annotation(const AnnotateConfig& cfg);

}  // namespace dseval
