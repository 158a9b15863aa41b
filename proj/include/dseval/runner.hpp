#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "dseval/agent.hpp"
#include "dseval/errors.hpp"

namespace dseval {

/// Downloaded bytes differ from the digest recorded for them.
class DataIntegrityError : public ProvisionError {
 public:
  using ProvisionError::ProvisionError;
};

struct ProvisionOptions {
  std::filesystem::path cache_dir;  // empty: ~/.cache/dseval
  bool offline = false;             // never touch the network; cache misses fail
  std::filesystem::path base_dir;   // resolves relative local paths
};

/// Places every manifest file under `inputs_dir`. URLs may be http(s)://,
/// file:// or a local path; a `#sha256=HEX` suffix pins the content. Network
/// downloads are cached by content digest, with an index from URL to digest
/// in cache_dir/index.json. Returns `inputs_dir`.
std::filesystem::path provision_data(const DataManifest& manifest, const std::filesystem::path& inputs_dir,
                                     const ProvisionOptions& opts = {});

/// Union of the problems' data blocks, first occurrence of a filename wins.
DataManifest problemset_data(const Problemset& ps);

/// Append-only JSON-lines file; one record per line, flushed per record.
class RecordWriter {
 public:
  explicit RecordWriter(const std::filesystem::path& path, bool append = false);
  void write(const EvaluationRecord& r);
  std::size_t written() const { return written_; }

 private:
  std::ofstream out_;
  std::mutex mu_;
  std::size_t written_ = 0;
};

std::vector<EvaluationRecord> read_records(const std::filesystem::path& path);

/// Removes `path` recursively on destruction (when set).
struct ScopedDir {
  std::filesystem::path path;
  ScopedDir() = default;
  explicit ScopedDir(std::filesystem::path p) : path(std::move(p)) {}
  ScopedDir(const ScopedDir&) = delete;
  ScopedDir& operator=(const ScopedDir&) = delete;
  ~ScopedDir();
};

/// Working directories for one problemset: a primary session and a helper
/// session sharing one provisioned inputs/ directory.
struct Workspace {
  std::filesystem::path root;
  Session::Options session;
  Session::Options reference;
};

/// Creates the directories under `work_root` (a fresh temp dir when empty) and
/// provisions the problemset's data. Relative data paths resolve against the
/// problemset file's directory unless `data.base_dir` is set.
Workspace prepare_workspace(const Problemset& ps, const std::filesystem::path& work_root, const std::string& python,
                            double max_time, const ProvisionOptions& data);

struct IntegrityReport {
  std::string problemset;
  bool ok = true;
  int problem = -1;  // failing problem, -1 for the preamble or a parse failure
  std::string message;
};

/// Parses `path`, builds ground truth and checks that every reference passes
/// its own validators. Never throws for problemset defects; they are reported.
IntegrityReport check_integrity(const std::filesystem::path& path, const Session::Options& session_opts,
                                const ProvisionOptions& data = {});
IntegrityReport check_integrity(const Problemset& ps, const Session::Options& session_opts,
                                const ProvisionOptions& data = {});

struct RunConfig {
  std::filesystem::path benchmark;  // directory of problemset files, or one file
  std::string benchmark_id;         // default: benchmark directory name
  std::string agent_spec = "oracle";
  std::shared_ptr<Agent> agent;     // used instead of agent_spec when set
  std::vector<RunMode> modes{RunMode::Reset};
  RepairStrategy repair = RepairStrategy::None;
  int max_attempts = 1;
  int parallel = 1;
  std::filesystem::path out;                  // records (JSON lines); optional
  std::vector<std::filesystem::path> reports;  // format from extension
  ContextOrder context_order;
  double agent_timeout = 120.0;
  ProvisionOptions data;
  std::filesystem::path work_root;  // session directories; temp when empty
  std::string python = default_python();
  double default_max_time = 30.0;
  /// Called after each record is written (progress reporting).
  std::function<void(const EvaluationRecord&)> on_record;
};

struct RunResult {
  std::vector<EvaluationRecord> records;  // problemset order, then mode, then problem
  Metrics metrics;
  std::vector<IntegrityReport> integrity;  // one per problemset
  std::optional<std::string> abort_reason;  // adapter failure
  bool completed() const { return !abort_reason; }
};

/// Throws ConfigError for an unusable configuration or a benchmark without problemsets.
RunResult run_benchmark(const RunConfig& config);

enum class ReportFormat { Jsonl, Html, Markdown };
ReportFormat report_format_for(const std::filesystem::path& path);  // by extension

/// Report text; `integrity` lists skipped problemsets.
std::string render_report(const std::vector<EvaluationRecord>& records, const Metrics& metrics, ReportFormat format,
                          const std::vector<IntegrityReport>& integrity = {});
void emit_report(const std::vector<EvaluationRecord>& records, const Metrics& metrics, ReportFormat format,
                 const std::filesystem::path& path, const std::vector<IntegrityReport>& integrity = {});

}  // namespace dseval
