#include "dseval/kernel.hpp"

#include <cstdlib>

namespace dseval {

std::string default_python() {
  if (const char* p = std::getenv("DSEVAL_PYTHON"); p != nullptr && *p != '\0') return p;
  return "python3";
}

Kernel::Kernel(Options opts) : opts_(std::move(opts)) {}

Kernel::~Kernel() = default;

void Kernel::spawn() {
  Subprocess::Options po;
  po.argv = {opts_.python, "-u", "-c", std::string(kernel_source())};
  po.cwd = opts_.workdir;
  po.extra_env = {{"PYTHONHASHSEED", "0"}, {"PYTHONDONTWRITEBYTECODE", "1"}, {"MPLBACKEND", "Agg"}};
  po.quiet_stderr = std::getenv("DSEVAL_KERNEL_STDERR") == nullptr;
  proc_ = std::make_unique<Subprocess>(po);
}

void Kernel::restart() {
  proc_.reset();
  spawn();
}

void Kernel::send(const nlohmann::json& request) {
  if (!proc_) spawn();
  try {
    proc_->write(request.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) + "\n");
  } catch (const KernelError&) {
    proc_.reset();
    throw;
  }
}

std::string Kernel::receive(const std::string& op, std::chrono::steady_clock::time_point deadline) {
  if (!proc_) throw KernelError("kernel is not running");
  auto line = proc_->read_line(deadline);
  if (!line) {
    bool died = proc_->eof();
    proc_.reset();
    if (died) throw KernelError("kernel exited unexpectedly during '" + op + "'");
    throw KernelHang("kernel did not answer '" + op + "' in time");
  }
  return *line;
}

std::string Kernel::call_text(const nlohmann::json& request, std::chrono::duration<double> timeout) {
  send(request);
  auto deadline = std::chrono::steady_clock::now() +
                  std::chrono::duration_cast<std::chrono::steady_clock::duration>(timeout);
  return receive(request.value("op", "?"), deadline);
}

nlohmann::json Kernel::call(const nlohmann::json& request, std::chrono::duration<double> timeout) {
  auto line = call_text(request, timeout);
  try {
    return nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    proc_.reset();
    throw KernelError(std::string("malformed kernel response: ") + e.what());
  }
}

}  // namespace dseval
