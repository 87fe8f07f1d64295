#include "sot/router.h"

#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "sot/tokens.h"

namespace sot {
namespace {

bool alnum(char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') ||
         (c >= 'A' && c <= 'Z');
}

bool arithmetic(std::string_view text) {
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (c == '+' || c == '*' || c == '/' || c == '=' || c == '^' || c == '%') {
      return true;
    }
    // A minus sign counts only next to a digit; hyphenated words do not.
    if (c == '-' && ((i > 0 && text[i - 1] >= '0' && text[i - 1] <= '9') ||
                     (i + 1 < text.size() && text[i + 1] >= '0' &&
                      text[i + 1] <= '9'))) {
      return true;
    }
  }
  return false;
}

}  // namespace

std::string_view to_string(RouterSource source) {
  switch (source) {
    case RouterSource::prompting: return "prompting";
    case RouterSource::trained: return "trained";
    case RouterSource::human_label: return "human-label";
    case RouterSource::heuristic: return "heuristic";
  }
  return "heuristic";
}

RouterSource parse_router_source(std::string_view name) {
  if (name == "prompting") return RouterSource::prompting;
  if (name == "trained") return RouterSource::trained;
  if (name == "human-label" || name == "human") return RouterSource::human_label;
  if (name == "heuristic") return RouterSource::heuristic;
  throw ConfigError(fmt::format("unknown router '{}'", name));
}

std::optional<char> scan_router_letter(std::string_view reply) {
  for (std::size_t i = 0; i < reply.size(); ++i) {
    char c = reply[i];
    if (c != 'A' && c != 'B' && c != 'C') continue;
    bool left_ok = i == 0 || !alnum(reply[i - 1]);
    bool right_ok = i + 1 == reply.size() || !alnum(reply[i + 1]);
    if (left_ok && right_ok) return c;
  }
  return std::nullopt;
}

PromptingRouter::PromptingRouter(const PromptLibrary& prompts, Backend& backend,
                                 GenerationParams generation)
    : prompts_(prompts), backend_(backend), generation_(generation) {}

RouterDecision PromptingRouter::route(const QuestionRecord& q) {
  RouterDecision d;
  d.question_id = q.id;
  d.source = RouterSource::prompting;
  RequestPayload req = assemble_router_prompt(prompts_, q.text);
  req.generation = generation_;
  try {
    CompletionResult r = backend_.complete(req);
    CallRecord c;
    c.stage = Stage::router;
    c.request = req;
    c.response = r.text;
    c.latency = r.wall_latency;
    c.prefill_tokens = r.prompt_tokens;
    c.decode_tokens = r.completion_tokens;
    c.usage_approximate = r.usage_approximate;
    c.finish_reason = r.finish_reason;
    c.attempts = r.attempts;
    last_call_ = std::move(c);
    d.router_latency = r.wall_latency;
    d.raw = r.text.empty() ? std::string("<empty>") : r.text;
    auto letter = scan_router_letter(r.text);
    d.use_sot = letter && *letter == 'A';
  } catch (const Error& e) {
    spdlog::warn("prompting router failed for {}: {}", q.id, e.what());
    CallRecord c;
    c.stage = Stage::router;
    c.request = req;
    c.finish_reason = FinishReason::error;
    c.error = e.what();
    if (auto* t = dynamic_cast<const TransportError*>(&e)) c.latency = t->elapsed();
    d.router_latency = c.latency;
    last_call_ = std::move(c);
    d.raw = "error";
    d.use_sot = false;
  }
  return d;
}

HumanLabelRouter::HumanLabelRouter(std::map<std::string, bool> labels)
    : labels_(std::move(labels)) {}

RouterDecision HumanLabelRouter::route(const QuestionRecord& q) {
  RouterDecision d;
  d.question_id = q.id;
  d.source = RouterSource::human_label;
  if (auto it = labels_.find(q.id); it != labels_.end()) {
    d.use_sot = it->second;
    d.raw = it->second ? "1" : "0";
  } else if (q.sot_suitable) {
    d.use_sot = *q.sot_suitable;
    d.raw = *q.sot_suitable ? "1" : "0";
  } else {
    d.raw = "unlabeled";
  }
  return d;
}

HeuristicRouter::HeuristicRouter(std::size_t min_tokens)
    : min_tokens_(min_tokens) {}

RouterDecision HeuristicRouter::route(const QuestionRecord& q) {
  RouterDecision d;
  d.question_id = q.id;
  d.source = RouterSource::heuristic;
  std::size_t n = approximate_token_count(q.text);
  bool ops = arithmetic(q.text);
  d.use_sot = n >= min_tokens_ && !ops;
  d.raw = fmt::format("tokens={} arithmetic={}", n, ops);
  return d;
}

RouterDecision route_prompting(const QuestionRecord& q,
                               const PromptLibrary& prompts, Backend& backend) {
  PromptingRouter router(prompts, backend);
  return router.route(q);
}

RouterDecision route_trained(const QuestionRecord& q,
                             const std::string& service_url) {
  TrainedRouter router(service_url);
  return router.route(q);
}

SotRResult run_sot_r(const QuestionRecord& q, const Pipeline& pipeline,
                     Router& router) {
  SotRResult out{router.route(q), NormalAnswer{}, {}, {}};
  if (auto* pr = dynamic_cast<PromptingRouter*>(&router)) {
    if (auto call = pr->last_call()) out.overhead_calls.push_back(*call);
  }
  out.total_latency = out.decision.router_latency;
  if (out.decision.use_sot) {
    try {
      SotAnswer a = pipeline.run_sot(q);
      out.total_latency += a.sot_latency;
      out.answer = std::move(a);
      return out;
    } catch (const SotFallback& fb) {
      spdlog::warn("question {}: {}", q.id, fb.what());
      out.decision.fallback = true;
      out.overhead_calls.push_back(fb.skeleton_call());
      out.total_latency += fb.skeleton_call().latency;
    }
  }
  NormalAnswer n = pipeline.run_normal(q);
  out.total_latency += n.latency;
  out.answer = std::move(n);
  return out;
}

ConfusionMatrix confusion(std::span<const RouterDecision> reference,
                          std::span<const RouterDecision> candidate) {
  std::map<std::string, bool> ref;
  for (const auto& d : reference) {
    if (!ref.emplace(d.question_id, d.use_sot).second) {
      throw IntegrityError(fmt::format("reference repeats id {}", d.question_id));
    }
  }
  if (candidate.size() != ref.size()) {
    throw IntegrityError(fmt::format("{} reference vs {} candidate decisions",
                                     ref.size(), candidate.size()));
  }
  ConfusionMatrix m;
  std::set<std::string> seen;
  for (const auto& d : candidate) {
    auto it = ref.find(d.question_id);
    if (it == ref.end()) {
      throw IntegrityError(fmt::format("id {} missing from reference", d.question_id));
    }
    if (!seen.insert(d.question_id).second) {
      throw IntegrityError(fmt::format("candidate repeats id {}", d.question_id));
    }
    if (it->second && d.use_sot) ++m.tp;
    if (!it->second && d.use_sot) ++m.fp;
    if (it->second && !d.use_sot) ++m.fn;
    if (!it->second && !d.use_sot) ++m.tn;
  }
  return m;
}

}  // namespace sot
