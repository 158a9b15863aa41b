#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <sys/types.h>

namespace dseval {

/// Child process with piped stdin/stdout, line-oriented reads with deadlines.
/// stderr is inherited unless `quiet_stderr` is set.
class Subprocess {
 public:
  struct Options {
    std::vector<std::string> argv;
    std::filesystem::path cwd;
    std::map<std::string, std::string> extra_env;
    bool quiet_stderr = false;
  };

  explicit Subprocess(const Options& opts);
  ~Subprocess();

  Subprocess(const Subprocess&) = delete;
  Subprocess& operator=(const Subprocess&) = delete;
  Subprocess(Subprocess&& other) noexcept;
  Subprocess& operator=(Subprocess&& other) noexcept;

  void write(std::string_view data);
  void close_stdin();

  /// Next '\n'-terminated line (without the newline), or nullopt on deadline expiry or EOF.
  /// `eof()` distinguishes the two.
  std::optional<std::string> read_line(std::chrono::steady_clock::time_point deadline);

  /// Everything until EOF or deadline.
  std::string read_all(std::chrono::steady_clock::time_point deadline);

  bool eof() const { return eof_; }
  bool running();
  void kill();
  /// Exit status after the child finished (waits), -1 if killed by a signal.
  int wait();
  pid_t pid() const { return pid_; }

 private:
  void reset() noexcept;

  pid_t pid_ = -1;
  int in_fd_ = -1;
  int out_fd_ = -1;
  std::string buffer_;
  bool eof_ = false;
  std::optional<int> status_;
};

}  // namespace dseval
