#pragma once

#include <stdexcept>
#include <string>

namespace dseval {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed problemset text. `cell` is the 0-based cell index (preamble = 0).
class ParseError : public Error {
 public:
  ParseError(int cell, const std::string& msg)
      : Error("cell " + std::to_string(cell) + ": " + msg), cell_(cell) {}
  int cell() const { return cell_; }

 private:
  int cell_;
};

/// Validator misconfiguration; distinct from an agent failure.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Reference code of a problemset crashed or failed its own validators.
class IntegrityError : public Error {
 public:
  IntegrityError(int problem, const std::string& msg)
      : Error("problem " + std::to_string(problem) + ": " + msg), problem_(problem) {}
  int problem() const { return problem_; }

 private:
  int problem_;
};

class ProvisionError : public Error {
 public:
  using Error::Error;
};

class SnapshotUnsupported : public Error {
 public:
  explicit SnapshotUnsupported(const std::string& variable)
      : Error("variable '" + variable + "' cannot be snapshotted"), variable_(variable) {}
  const std::string& variable() const { return variable_; }

 private:
  std::string variable_;
};

/// Kernel process died or violated the wire protocol.
class KernelError : public Error {
 public:
  using Error::Error;
};

/// Agent adapter failed to deliver a response; aborts a run rather than producing a verdict.
class TransportError : public Error {
 public:
  using Error::Error;
};

}  // namespace dseval
