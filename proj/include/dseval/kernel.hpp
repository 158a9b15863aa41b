#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>

#include <json.hpp>

#include "dseval/errors.hpp"
#include "dseval/process.hpp"

namespace dseval {

/// Source of the Python execution kernel, embedded at build time.
std::string_view kernel_source();

/// Interpreter used for kernels: $DSEVAL_PYTHON or "python3".
std::string default_python();

/// The kernel did not answer before its hard deadline and was killed.
class KernelHang : public KernelError {
 public:
  using KernelError::KernelError;
};

/// One host-language interpreter process speaking the JSON-lines kernel protocol.
/// Spawned lazily; not thread-safe.
class Kernel {
 public:
  struct Options {
    std::filesystem::path workdir;
    std::string python = default_python();
  };

  explicit Kernel(Options opts);
  ~Kernel();

  Kernel(const Kernel&) = delete;
  Kernel& operator=(const Kernel&) = delete;

  /// Sends one request and waits for its response. Responses with "ok": false
  /// are returned as-is; protocol failures throw KernelError, deadline expiry
  /// kills the process and throws KernelHang.
  nlohmann::json call(const nlohmann::json& request,
                      std::chrono::duration<double> timeout = std::chrono::seconds(600));
  /// Same as call() but returns the raw response line, for callers that need key order.
  std::string call_text(const nlohmann::json& request,
                        std::chrono::duration<double> timeout = std::chrono::seconds(600));

  /// Split form of call_text for requests answered by more than one line.
  void send(const nlohmann::json& request);
  std::string receive(const std::string& op, std::chrono::steady_clock::time_point deadline);

  void restart();
  bool started() const { return proc_ != nullptr; }
  const std::filesystem::path& workdir() const { return opts_.workdir; }

 private:
  void spawn();

  Options opts_;
  std::unique_ptr<Subprocess> proc_;
};

}  // namespace dseval
