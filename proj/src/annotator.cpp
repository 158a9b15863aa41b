#include "dseval/annotator.hpp"

#include <algorithm>
#include <random>

#include <yaml-cpp/yaml.h>

#include "dseval/errors.hpp"
#include "dseval/util.hpp"

namespace dseval {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

std::string yaml_string(const YAML::Node& n, const char* key) {
  return n[key] && n[key].IsScalar() ? n[key].as<std::string>() : std::string();
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string substitute(std::string text, const std::map<std::string, std::string>& values) {
  for (const auto& [key, value] : values) {
    const std::string mark = "{{" + key + "}}";
    for (auto pos = text.find(mark); pos != std::string::npos; pos = text.find(mark, pos + value.size())) {
      text.replace(pos, mark.size(), value);
    }
  }
  return text;
}

const std::vector<std::pair<SeedStage, std::string>> kStageNames = {
    {SeedStage::Unstarted, "unstarted"}, {SeedStage::Sketched, "sketched"},
    {SeedStage::Drafted, "drafted"},     {SeedStage::DraftedWithErrors, "drafted-with-errors"},
    {SeedStage::Revised, "revised"},     {SeedStage::Accepted, "accepted"}};

}  // namespace

std::vector<IdeaSeed> load_seeds(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ConfigError("seed directory " + dir.string() + " does not exist");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    auto ext = e.path().extension().string();
    if (e.is_regular_file() && (ext == ".json" || ext == ".yaml" || ext == ".yml")) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<IdeaSeed> seeds;
  for (const auto& f : files) {
    // JSON is a subset of YAML, so one reader covers both.
    YAML::Node n = YAML::LoadFile(f.string());
    IdeaSeed s;
    s.id = yaml_string(n, "id");
    if (s.id.empty()) s.id = f.stem().string();
    s.dataset_description = yaml_string(n, "dataset");
    s.notebook_description = yaml_string(n, "notebook");
    auto data_dir = yaml_string(n, "data_dir");
    s.data_dir = data_dir.empty() ? dir : (fs::path(data_dir).is_absolute() ? fs::path(data_dir) : dir / data_dir);
    if (trim(s.dataset_description).empty() && trim(s.notebook_description).empty()) {
      throw ConfigError("seed " + f.string() + " has neither a dataset nor a notebook description");
    }
    seeds.push_back(std::move(s));
  }
  return seeds;
}

std::string seed_stage_name(SeedStage s) {
  for (const auto& [k, v] : kStageNames) {
    if (k == s) return v;
  }
  return "unstarted";
}

SeedStage seed_stage_from_name(const std::string& s) {
  for (const auto& [k, v] : kStageNames) {
    if (v == s) return k;
  }
  throw ConfigError("unknown seed stage '" + s + "'");
}

SeedStage AnnotationState::stage_of(const std::string& seed) const {
  auto it = pending.find(seed);
  return it == pending.end() ? SeedStage::Unstarted : it->second;
}

ojson AnnotationState::to_json() const {
  ojson pool = ojson::array();
  for (const auto& e : accepted_pool) pool.push_back(ojson{{"seed", e.seed_id}, {"path", e.path.string()}, {"sketch", e.sketch}});
  ojson stages = ojson::object();
  for (const auto& [k, v] : pending) stages[k] = seed_stage_name(v);
  ojson tokens = ojson::array();
  for (const auto& t : token_log) {
    tokens.push_back(ojson{{"seed", t.seed_id}, {"stage", t.stage}, {"prompt", t.prompt}, {"completion", t.completion}});
  }
  return ojson{{"accepted_pool", pool},         {"guide_amendments", guide_amendments},
               {"pending", stages},             {"sketches", sketches},
               {"draft_issues", draft_issues},  {"draft_attempts", draft_attempts},
               {"revision_notes", revision_notes}, {"token_log", tokens}};
}

AnnotationState AnnotationState::from_json(const nlohmann::json& j) {
  AnnotationState s;
  for (const auto& e : j.value("accepted_pool", nlohmann::json::array())) {
    s.accepted_pool.push_back(PoolEntry{e.value("seed", ""), e.value("path", ""), e.value("sketch", "")});
  }
  s.guide_amendments = j.value("guide_amendments", std::vector<std::string>{});
  const auto pending = j.value("pending", nlohmann::json::object());
  for (const auto& [k, v] : pending.items()) {
    s.pending[k] = seed_stage_from_name(v.get<std::string>());
  }
  s.sketches = j.value("sketches", std::map<std::string, std::string>{});
  s.draft_issues = j.value("draft_issues", std::map<std::string, std::vector<std::string>>{});
  s.draft_attempts = j.value("draft_attempts", std::map<std::string, int>{});
  s.revision_notes = j.value("revision_notes", "");
  for (const auto& t : j.value("token_log", nlohmann::json::array())) {
    s.token_log.push_back(TokenLogEntry{t.value("seed", ""), t.value("stage", ""), t.value("prompt", 0L), t.value("completion", 0L)});
  }
  return s;
}

PromptTemplates PromptTemplates::load(const fs::path& dir) {
  auto t = builtin();
  if (dir.empty()) return t;
  if (fs::exists(dir / "sketch.txt")) t.sketch = read_file(dir / "sketch.txt");
  if (fs::exists(dir / "problemset.txt")) t.problemset = read_file(dir / "problemset.txt");
  return t;
}

Annotator::Annotator(fs::path workspace, std::shared_ptr<ChatClient> llm, PromptTemplates prompts, Options opts)
    : workspace_(std::move(workspace)), llm_(std::move(llm)), prompts_(std::move(prompts)), opts_(std::move(opts)) {
  if (opts_.max_draft_attempts < 1) throw ConfigError("max_draft_attempts must be at least 1");
  fs::create_directories(workspace_);
  auto state_file = workspace_ / "state.json";
  if (fs::exists(state_file)) state_ = AnnotationState::from_json(nlohmann::json::parse(read_file(state_file)));
}

void Annotator::save() const { write_file(workspace_ / "state.json", state_.to_json().dump(2)); }

std::vector<const PoolEntry*> Annotator::select_few_shot(const std::string& seed_id, const std::string& stage) const {
  std::vector<const PoolEntry*> all;
  for (const auto& e : state_.accepted_pool) all.push_back(&e);
  if (all.size() <= kMaxFewShot) return all;
  std::mt19937_64 rng(opts_.random_seed ^ fnv1a(seed_id + "/" + stage));
  std::vector<const PoolEntry*> picked;
  std::sample(all.begin(), all.end(), std::back_inserter(picked), kMaxFewShot, rng);
  return picked;
}

std::string Annotator::guide_text() const {
  if (state_.guide_amendments.empty()) return "";
  std::string g = "Lessons from earlier reviews:\n";
  for (const auto& a : state_.guide_amendments) g += "- " + a + "\n";
  return g + "\n";
}

std::string Annotator::examples_text(const std::vector<const PoolEntry*>& picks, bool sketches) const {
  if (picks.empty()) return "";
  std::string out;
  int k = 0;
  for (const auto* e : picks) {
    out += "\n### Example " + std::to_string(++k) + "\n";
    if (sketches && !e->sketch.empty()) {
      out += e->sketch;
    } else {
      out += "```python\n" + read_file(workspace_ / e->path) + "```";
    }
    out += "\n";
  }
  return out;
}

std::vector<ChatMessage> Annotator::sketch_prompt(const IdeaSeed& seed) const {
  auto text = substitute(prompts_.sketch, {{"guide", guide_text()},
                                           {"dataset_description", seed.dataset_description},
                                           {"notebook_description", seed.notebook_description},
                                           {"examples", examples_text(select_few_shot(seed.id, "sketch"), true)}});
  return {{"user", text}};
}

std::vector<ChatMessage> Annotator::problemset_prompt(const IdeaSeed& seed, const std::string& sketch) const {
  auto text = substitute(prompts_.problemset, {{"guide", guide_text()},
                                               {"examples", examples_text(select_few_shot(seed.id, "draft"), false)},
                                               {"sketch", sketch},
                                               {"dataset_description", seed.dataset_description}});
  return {{"user", text}};
}

void Annotator::log_usage(const std::string& seed, const std::string& stage, const ChatCompletion& c) {
  TokenLogEntry t{seed, stage, 0, 0};
  if (c.usage) {
    t.prompt = c.usage->prompt;
    t.completion = c.usage->completion;
  }
  state_.token_log.push_back(t);
}

std::string Annotator::generate_sketch(const IdeaSeed& seed) {
  auto c = llm_->complete(sketch_prompt(seed));
  log_usage(seed.id, "sketch", c);
  if (trim(c.text).empty()) {
    save();
    throw Error("llm returned an empty sketch for seed " + seed.id);
  }
  state_.sketches[seed.id] = c.text;
  state_.pending[seed.id] = SeedStage::Sketched;
  fs::create_directories(workspace_ / "sketches");
  write_file(workspace_ / "sketches" / (seed.id + ".md"), c.text);
  save();
  return c.text;
}

DraftResult Annotator::generate_problemset(const IdeaSeed& seed) {
  auto sk = state_.sketches.find(seed.id);
  if (sk == state_.sketches.end()) throw ConfigError("seed " + seed.id + " has no sketch yet");
  DraftResult res;
  std::string text;
  bool parsed = false;
  Problemset ps;
  for (int k = 1; k <= opts_.max_draft_attempts && !parsed; ++k) {
    auto c = llm_->complete(problemset_prompt(seed, sk->second));
    log_usage(seed.id, "draft", c);
    res.attempts = k;
    text = extract_code_block(c.text);
    if (!text.empty() && text.back() != '\n') text += '\n';
    try {
      ps = parse_problemset_text(text, seed.id);
      if (ps.problems.empty()) throw ParseError(0, "no problems");
      parsed = true;
    } catch (const ParseError& e) {
      res.issues.push_back("attempt " + std::to_string(k) + ": " + e.what());
    }
  }
  fs::create_directories(workspace_ / "drafts");
  res.draft_path = workspace_ / "drafts" / (seed.id + ".py");
  write_file(res.draft_path, text);
  if (!parsed) {
    res.stage = SeedStage::DraftedWithErrors;
  } else {
    res.issues.clear();
    ps.source_path = res.draft_path;
    ProvisionOptions data;
    data.base_dir = seed.data_dir;
    auto rep = check_integrity(ps, opts_.session, data);
    if (!rep.ok) res.issues.push_back(rep.message);
    res.stage = SeedStage::Drafted;
  }
  state_.pending[seed.id] = res.stage;
  state_.draft_issues[seed.id] = res.issues;
  state_.draft_attempts[seed.id] = res.attempts;
  save();
  return res;
}

AcceptResult Annotator::accept_revision(const IdeaSeed& seed, const fs::path& revised, const std::string& notes,
                                        const std::string& guide_amendment) {
  if (state_.stage_of(seed.id) == SeedStage::Accepted) return AcceptResult{false, -1, "seed " + seed.id + " is already accepted"};
  Problemset ps;
  try {
    ps = parse_problemset(revised);
  } catch (const ParseError& e) {
    return AcceptResult{false, -1, std::string("parse error: ") + e.what()};
  }
  ps.id = seed.id;
  ProvisionOptions data;
  data.base_dir = seed.data_dir;
  auto rep = check_integrity(ps, opts_.session, data);
  if (!rep.ok) return AcceptResult{false, rep.problem, rep.message};

  const auto draft = workspace_ / "drafts" / (seed.id + ".py");
  const bool edited = !fs::exists(draft) || read_file(draft) != read_file(revised);
  fs::create_directories(workspace_ / "accepted");
  const fs::path rel = fs::path("accepted") / (seed.id + ".py");
  write_file(workspace_ / rel, read_file(revised));
  auto sk = state_.sketches.find(seed.id);
  state_.accepted_pool.push_back(PoolEntry{seed.id, rel, sk == state_.sketches.end() ? "" : sk->second});
  state_.pending[seed.id] = SeedStage::Accepted;
  state_.draft_issues.erase(seed.id);
  state_.revision_notes += "[" + seed.id + (edited ? ", revised" : ", unchanged") + "] " + notes + "\n";
  if (!trim(guide_amendment).empty()) state_.guide_amendments.push_back(trim(guide_amendment));
  save();
  return AcceptResult{true, -1, edited ? "accepted after revision" : "accepted"};
}

AnnotationStage annotation_stage_from_name(const std::string& s) {
  if (s == "sketch") return AnnotationStage::Sketch;
  if (s == "draft") return AnnotationStage::Draft;
  if (s == "accept") return AnnotationStage::Accept;
  throw ConfigError("unknown annotation stage '" + s + "'");
}

ojson run_annotation(const AnnotateConfig& cfg) {
  auto seeds = load_seeds(cfg.seeds_dir);
  Annotator::Options opts;
  opts.random_seed = cfg.random_seed;
  opts.max_draft_attempts = cfg.max_draft_attempts;
  Annotator ann(cfg.workspace, make_chat_client(cfg.llm_spec), PromptTemplates::load(cfg.prompts_dir), opts);
  ojson out = ojson::array();
  for (const auto& seed : seeds) {
    const auto stage = ann.state().stage_of(seed.id);
    ojson item{{"seed", seed.id}};
    switch (cfg.stage) {
      case AnnotationStage::Sketch:
        if (stage != SeedStage::Unstarted) continue;
        ann.generate_sketch(seed);
        break;
      case AnnotationStage::Draft: {
        if (stage != SeedStage::Sketched && stage != SeedStage::DraftedWithErrors) continue;
        auto r = ann.generate_problemset(seed);
        item["attempts"] = r.attempts;
        item["draft"] = r.draft_path.string();
        item["issues"] = r.issues;
        break;
      }
      case AnnotationStage::Accept: {
        if (stage != SeedStage::Drafted && stage != SeedStage::DraftedWithErrors && stage != SeedStage::Revised) continue;
        auto r = ann.accept_revision(seed, cfg.workspace / "drafts" / (seed.id + ".py"), cfg.notes);
        item["accepted"] = r.accepted;
        item["message"] = r.message;
        if (!r.accepted && r.failing_problem >= 0) item["failing_problem"] = r.failing_problem;
        break;
      }
    }
    item["stage"] = seed_stage_name(ann.state().stage_of(seed.id));
    out.push_back(item);
  }
  long prompt = 0, completion = 0;
  for (const auto& t : ann.state().token_log) {
    prompt += t.prompt;
    completion += t.completion;
  }
  return ojson{{"seeds", out},
               {"pool_size", ann.state().accepted_pool.size()},
               {"tokens", ojson{{"prompt", prompt}, {"completion", completion}}}};
}

}  // namespace dseval
