#include "dseval/runner.hpp"

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <set>
#include <thread>

#include <curl/curl.h>

#include "dseval/util.hpp"

namespace dseval {

namespace fs = std::filesystem;

namespace {

std::mutex g_cache_mu;

void check_relative(const std::string& name) {
  fs::path p(name);
  if (name.empty() || p.is_absolute() || p.has_root_name()) throw ProvisionError("data file '" + name + "' must be a relative path");
  for (const auto& part : p) {
    if (part == "..") throw ProvisionError("data file '" + name + "' escapes the inputs directory");
  }
}

fs::path default_cache() {
  const char* xdg = std::getenv("XDG_CACHE_HOME");
  if (xdg && *xdg) return fs::path(xdg) / "dseval";
  const char* home = std::getenv("HOME");
  return fs::path(home && *home ? home : "/tmp") / ".cache" / "dseval";
}

size_t collect(char* data, size_t size, size_t nmemb, void* out) {
  static_cast<std::string*>(out)->append(data, size * nmemb);
  return size * nmemb;
}

std::string download(const std::string& url, const std::string& file) {
  CURL* curl = curl_easy_init();
  if (!curl) throw ProvisionError("cannot fetch '" + file + "': curl init failed");
  std::string body;
  curl_easy_setopt(curl, CURLOPT_URL, url.c_str());
  curl_easy_setopt(curl, CURLOPT_FOLLOWLOCATION, 1L);
  curl_easy_setopt(curl, CURLOPT_FAILONERROR, 1L);
  curl_easy_setopt(curl, CURLOPT_WRITEFUNCTION, collect);
  curl_easy_setopt(curl, CURLOPT_WRITEDATA, &body);
  curl_easy_setopt(curl, CURLOPT_CONNECTTIMEOUT, 20L);
  curl_easy_setopt(curl, CURLOPT_TIMEOUT, 600L);
  curl_easy_setopt(curl, CURLOPT_NOSIGNAL, 1L);
  CURLcode rc = curl_easy_perform(curl);
  curl_easy_cleanup(curl);
  if (rc != CURLE_OK) throw ProvisionError("cannot fetch '" + file + "' from " + url + ": " + curl_easy_strerror(rc));
  return body;
}

nlohmann::json load_index(const fs::path& cache) {
  auto p = cache / "index.json";
  if (!fs::exists(p)) return nlohmann::json::object();
  auto j = nlohmann::json::parse(read_file(p), nullptr, false);
  return j.is_object() ? j : nlohmann::json::object();
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

/// Bytes for one manifest entry, going through the cache for network URLs.
std::string fetch(const std::string& name, const std::string& spec, const ProvisionOptions& opts) {
  std::string url = spec;
  std::optional<std::string> pinned;
  if (auto h = url.find("#sha256="); h != std::string::npos) {
    pinned = lower(url.substr(h + 8));
    url = url.substr(0, h);
  }
  auto verify = [&](const std::string& bytes, const std::string& recorded, const char* what) {
    if (sha256_hex(bytes) != recorded)
      throw DataIntegrityError("data file '" + name + "': content does not match the " + std::string(what) + " digest");
  };

  const bool network = url.rfind("http://", 0) == 0 || url.rfind("https://", 0) == 0;
  if (!network) {
    fs::path local = url.rfind("file://", 0) == 0 ? fs::path(url.substr(7)) : fs::path(url);
    if (local.is_relative()) local = opts.base_dir / local;
    if (!fs::exists(local)) throw ProvisionError("data file '" + name + "': " + local.string() + " not found");
    auto bytes = read_file(local);
    if (pinned) verify(bytes, *pinned, "pinned");
    return bytes;
  }

  const fs::path cache = opts.cache_dir.empty() ? default_cache() : opts.cache_dir;
  {
    std::lock_guard lock(g_cache_mu);
    auto index = load_index(cache);
    if (index.contains(url)) {
      auto digest = index[url].get<std::string>();
      auto obj = cache / "objects" / digest;
      if (fs::exists(obj)) {
        auto bytes = read_file(obj);
        verify(bytes, digest, "recorded");
        if (pinned) verify(bytes, *pinned, "pinned");
        return bytes;
      }
    }
  }
  if (opts.offline) throw ProvisionError("data file '" + name + "' is not cached and the run is offline");
  auto bytes = download(url, name);
  const auto digest = sha256_hex(bytes);
  if (pinned && digest != *pinned) throw DataIntegrityError("data file '" + name + "': content does not match the pinned digest");
  std::lock_guard lock(g_cache_mu);
  fs::create_directories(cache / "objects");
  write_file(cache / "objects" / digest, bytes);
  auto index = load_index(cache);
  index[url] = digest;
  write_file(cache / "index.json", index.dump(2));
  return bytes;
}

}  // namespace

fs::path provision_data(const DataManifest& manifest, const fs::path& inputs_dir, const ProvisionOptions& opts) {
  fs::create_directories(inputs_dir);
  for (const auto& [name, url] : manifest) check_relative(name);
  for (const auto& [name, url] : manifest) {
    auto bytes = fetch(name, url, opts);
    auto target = inputs_dir / name;
    fs::create_directories(target.parent_path());
    write_file(target, bytes);
  }
  return inputs_dir;
}

DataManifest problemset_data(const Problemset& ps) {
  DataManifest out;
  std::set<std::string> seen;
  for (const auto& p : ps.problems) {
    for (const auto& entry : p.data) {
      if (seen.insert(entry.first).second) out.push_back(entry);
    }
  }
  return out;
}

RecordWriter::RecordWriter(const fs::path& path, bool append) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  out_.open(path, append ? std::ios::app : std::ios::trunc);
  if (!out_) throw Error("cannot open " + path.string() + " for writing");
}

void RecordWriter::write(const EvaluationRecord& r) {
  std::lock_guard lock(mu_);
  out_ << record_to_json(r).dump() << '\n';
  out_.flush();
  ++written_;
}

std::vector<EvaluationRecord> read_records(const fs::path& path) {
  std::vector<EvaluationRecord> out;
  std::istringstream in(read_file(path));
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    out.push_back(record_from_json(nlohmann::json::parse(line)));
  }
  return out;
}

namespace {

fs::path unique_dir(const fs::path& root, const std::string& name) {
  if (root.empty()) return make_temp_dir("dseval-" + name);
  for (int i = 0;; ++i) {
    auto p = root / (i ? name + "-" + std::to_string(i) : name);
    if (fs::create_directories(p)) return p;
  }
}

}  // namespace

ScopedDir::~ScopedDir() {
  std::error_code ec;
  if (!path.empty()) fs::remove_all(path, ec);
}

Workspace prepare_workspace(const Problemset& ps, const fs::path& work_root, const std::string& python,
                            double max_time, const ProvisionOptions& data) {
  Workspace w;
  w.root = unique_dir(work_root, ps.id);
  w.session.workdir = w.root / "session";
  w.reference.workdir = w.root / "reference";
  for (auto* o : {&w.session, &w.reference}) {
    o->python = python;
    o->default_max_time = max_time;
    fs::create_directories(o->workdir);
  }
  ProvisionOptions d = data;
  if (d.base_dir.empty()) d.base_dir = ps.source_path.parent_path();
  provision_data(problemset_data(ps), w.session.workdir / "inputs", d);
  fs::create_directory_symlink(fs::absolute(w.session.workdir / "inputs"), w.reference.workdir / "inputs");
  return w;
}

IntegrityReport check_integrity(const fs::path& path, const Session::Options& session_opts,
                                const ProvisionOptions& data) {
  try {
    return check_integrity(parse_problemset(path), session_opts, data);
  } catch (const ParseError& e) {
    return IntegrityReport{path.stem().string(), false, -1, std::string("parse error: ") + e.what()};
  }
}

IntegrityReport check_integrity(const Problemset& ps, const Session::Options& session_opts,
                                const ProvisionOptions& data) {
  IntegrityReport rep{ps.id, true, -1, ""};
  ScopedDir guard;
  try {
    auto w = prepare_workspace(ps, session_opts.workdir, session_opts.python, session_opts.default_max_time, data);
    if (session_opts.workdir.empty()) guard.path = w.root;
    Session session(w.session);
    auto gt = build_ground_truth(ps, session);
    ReferencePool refs(w.reference);
    for (std::size_t i = 0; i < ps.problems.size(); ++i) {
      session.restore(*gt.steps[i].pre);
      auto j = judge(ps.problems[i], gt.steps[i], ps.problems[i].reference_code, session, refs);
      if (!j.verdict.passed()) {
        return IntegrityReport{ps.id, false, static_cast<int>(i),
                               "reference fails its own validators: " + j.verdict.name() + " (" + j.verdict.detail + ")"};
      }
    }
  } catch (const IntegrityError& e) {
    return IntegrityReport{ps.id, false, e.problem(), e.what()};
  } catch (const Error& e) {
    return IntegrityReport{ps.id, false, -1, e.what()};
  }
  return rep;
}

namespace {

struct Shared {
  Shared(const RunConfig& c, Agent& a) : cfg(c), agent(a) {}
  const RunConfig& cfg;
  Agent& agent;
  std::unique_ptr<RecordWriter> writer;
  std::atomic<bool> abort{false};
  std::mutex mu;
  std::optional<std::string> abort_reason;

  void emit(const EvaluationRecord& r) {
    if (writer) writer->write(r);
    if (cfg.on_record) {
      std::lock_guard lock(mu);
      cfg.on_record(r);
    }
  }
  void fail(const std::string& why) {
    std::lock_guard lock(mu);
    if (!abort_reason) abort_reason = why;
    abort = true;
  }
};

std::string benchmark_id(const RunConfig& cfg) {
  if (!cfg.benchmark_id.empty()) return cfg.benchmark_id;
  auto p = fs::absolute(cfg.benchmark).lexically_normal();
  if (p.filename().empty()) p = p.parent_path();
  return fs::is_directory(p) ? p.filename().string() : p.stem().string();
}

void run_problemset(const Problemset& ps, Shared& sh, const std::string& bench, std::vector<EvaluationRecord>& out,
                    IntegrityReport& integrity) {
  const auto& cfg = sh.cfg;
  integrity = IntegrityReport{ps.id, true, -1, ""};
  ScopedDir guard;
  std::optional<Workspace> w;
  std::optional<Session> session;
  GroundTruth gt;
  try {
    w = prepare_workspace(ps, cfg.work_root, cfg.python, cfg.default_max_time, cfg.data);
    if (cfg.work_root.empty()) guard.path = w->root;
    session.emplace(w->session);
    gt = build_ground_truth(ps, *session);
  } catch (const IntegrityError& e) {
    integrity = IntegrityReport{ps.id, false, e.problem(), e.what()};
    return;
  } catch (const Error& e) {
    integrity = IntegrityReport{ps.id, false, -1, e.what()};
    return;
  }
  ReferencePool refs(w->reference);

  for (RunMode mode : cfg.modes) {
    if (mode == RunMode::Propagate && !ps.problems.empty()) session->restore(*gt.steps[0].pre);
    for (std::size_t i = 0; i < ps.problems.size(); ++i) {
      if (sh.abort) return;
      const auto& p = ps.problems[i];
      const auto& step = gt.steps[i];
      auto t0 = std::chrono::steady_clock::now();
      std::optional<Namespace> submission_pre;
      if (mode == RunMode::Reset) {
        session->restore(*step.pre);
      } else {
        submission_pre = session->export_values();
      }
      auto req = make_request(ps, p, *session, static_cast<int>(i));
      RepairOutcome res;
      try {
        res = run_with_repair(sh.agent, req, p, step, *session, refs, cfg.repair, cfg.max_attempts, submission_pre);
      } catch (const ConfigError& e) {
        sh.fail(ps.id + " problem " + std::to_string(i) + ": " + e.what());
        return;
      }
      if (res.attempts.empty()) {
        sh.fail(ps.id + " problem " + std::to_string(i) + ": " + res.transport_error.value_or("no response"));
        return;
      }
      const auto& last = res.final();
      EvaluationRecord r;
      r.benchmark = bench;
      r.problemset = ps.id;
      r.problem_index = p.index;
      r.agent = sh.agent.id();
      r.mode = mode;
      r.query = p.query;
      r.submission_code = last.response.code;
      r.reference_code = p.reference_code;
      r.execution = ExecutionSummary::of(last.result);
      r.verdict = last.verdict;
      r.attempts = static_cast<int>(res.attempts.size());
      r.duration = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      r.timestamp = utc_timestamp();
      sh.emit(r);
      out.push_back(std::move(r));
      if (res.aborted()) {
        sh.fail(ps.id + " problem " + std::to_string(i) + ": " + *res.transport_error);
        return;
      }
    }
  }
}

}  // namespace

RunResult run_benchmark(const RunConfig& cfg) {
  if (cfg.parallel < 1) throw ConfigError("parallelism must be at least 1");
  if (cfg.max_attempts < 1) throw ConfigError("max_attempts must be at least 1");
  if (cfg.modes.empty()) throw ConfigError("no run mode selected");
  if (!fs::exists(cfg.benchmark)) throw ConfigError("benchmark " + cfg.benchmark.string() + " does not exist");

  std::vector<fs::path> files =
      fs::is_directory(cfg.benchmark) ? list_problemset_files(cfg.benchmark) : std::vector<fs::path>{cfg.benchmark};
  if (files.empty()) throw ConfigError("benchmark " + cfg.benchmark.string() + " contains no problemsets");

  RunResult result;
  std::vector<std::optional<Problemset>> sets(files.size());
  result.integrity.resize(files.size());
  std::vector<Problemset> parsed;
  for (std::size_t i = 0; i < files.size(); ++i) {
    try {
      sets[i] = parse_problemset(files[i]);
      parsed.push_back(*sets[i]);
    } catch (const ParseError& e) {
      result.integrity[i] = IntegrityReport{files[i].stem().string(), false, -1, std::string("parse error: ") + e.what()};
    }
  }

  std::shared_ptr<Agent> agent =
      cfg.agent ? cfg.agent
                : make_agent(cfg.agent_spec, parsed, cfg.context_order,
                             std::chrono::duration<double>(cfg.agent_timeout));
  std::shared_ptr<Agent> guarded = agent->concurrent_safe() ? agent : std::make_shared<GuardedAgent>(agent);

  Shared sh(cfg, *guarded);
  if (!cfg.out.empty()) sh.writer = std::make_unique<RecordWriter>(cfg.out);
  const std::string bench = benchmark_id(cfg);

  std::vector<std::vector<EvaluationRecord>> per_set(files.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      std::size_t i = next++;
      if (i >= files.size() || sh.abort) return;
      if (!sets[i]) continue;
      run_problemset(*sets[i], sh, bench, per_set[i], result.integrity[i]);
    }
  };
  const int threads = std::min<int>(cfg.parallel, static_cast<int>(files.size()));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  for (auto& v : per_set) {
    for (auto& r : v) result.records.push_back(std::move(r));
  }
  result.metrics = aggregate_metrics(result.records);
  result.abort_reason = sh.abort_reason;
  for (const auto& path : cfg.reports) emit_report(result.records, result.metrics, report_format_for(path), path, result.integrity);
  return result;
}

}  // namespace dseval
