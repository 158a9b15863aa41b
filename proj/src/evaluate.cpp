#include "dseval/evaluate.hpp"

namespace dseval {

ReferencePool::ReferencePool(Session::Options opts) : session_(std::move(opts)) {}

Session& ReferencePool::at(const GroundTruthStep& step) {
  if (loaded_ != step.post.get()) {
    session_.restore(*step.post);
    loaded_ = step.post.get();
  }
  return session_;
}

Judgement judge(const Problem& problem, const GroundTruthStep& step, const std::string& code, Session& session,
                ReferencePool& refs, std::optional<Namespace> submission_pre) {
  Judgement j;
  j.result = session.execute(code, problem.execution);
  ValidationContext ctx;
  ctx.problem = &problem;
  ctx.submission_code = code;
  ctx.submission_result = j.result;
  ctx.submission_session = &session;
  ctx.reference = &step;
  ctx.submission_pre = std::move(submission_pre);
  ctx.reference_session = [&refs, &step]() -> Session& { return refs.at(step); };
  j.verdict = evaluate_submission(problem.validator, ctx);
  return j;
}

}  // namespace dseval
