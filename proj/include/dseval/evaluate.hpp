#pragma once

#include <optional>
#include <string>

#include "dseval/session.hpp"
#include "dseval/verdict.hpp"

namespace dseval {

/// Helper session that is moved to the reference post-state of whichever
/// problem asks for it. Used by table_test and model validators.
class ReferencePool {
 public:
  explicit ReferencePool(Session::Options opts);
  Session& at(const GroundTruthStep& step);

 private:
  Session session_;
  const Snapshot* loaded_ = nullptr;
};

struct Judgement {
  ExecutionResult result;
  Verdict verdict;
};

/// Runs `code` on `session` (already at the state the agent saw) under the
/// problem's restrictions, then validates and classifies it. `submission_pre`
/// is the session's namespace before the run when it differs from the
/// reference pre-state.
Judgement judge(const Problem& problem, const GroundTruthStep& step, const std::string& code, Session& session,
                ReferencePool& refs, std::optional<Namespace> submission_pre = std::nullopt);

}  // namespace dseval
