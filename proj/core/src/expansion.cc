#include "sot/expansion.h"

#include <algorithm>
#include <atomic>
#include <exception>
#include <map>
#include <mutex>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "sot/tokens.h"

namespace sot {
namespace {

CallRecord record_call(Stage stage, int point_index, const RequestPayload& req,
                       const CompletionResult& r) {
  CallRecord c;
  c.stage = stage;
  c.point_index = point_index;
  c.request = req;
  c.response = r.text;
  c.latency = r.wall_latency;
  c.prefill_tokens = r.prompt_tokens;
  c.decode_tokens = r.completion_tokens;
  c.usage_approximate = r.usage_approximate;
  c.finish_reason = r.finish_reason;
  c.attempts = r.attempts;
  return c;
}

std::size_t common_prefix_length(std::string_view a, std::string_view b) {
  auto [ia, ib] = std::mismatch(a.begin(), a.end(), b.begin(), b.end());
  return static_cast<std::size_t>(ia - a.begin());
}

void require_question(const QuestionRecord& q) {
  if (q.text.empty()) {
    throw ConfigError(fmt::format("question '{}' is empty", q.id));
  }
}

std::string_view trim_leading(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\n' ||
                        s.front() == '\t' || s.front() == '\r')) {
    s.remove_prefix(1);
  }
  return s;
}

}  // namespace

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::normal: return "normal";
    case Stage::skeleton: return "skeleton";
    case Stage::point: return "point";
    case Stage::router: return "router";
    case Stage::judge: return "judge";
  }
  return "normal";
}

Stage parse_stage(std::string_view name) {
  if (name == "normal") return Stage::normal;
  if (name == "skeleton") return Stage::skeleton;
  if (name == "point") return Stage::point;
  if (name == "router") return Stage::router;
  if (name == "judge") return Stage::judge;
  throw DataError(fmt::format("unknown stage '{}'", name));
}

std::string aggregate(const Skeleton& skeleton,
                      std::span<const ExpansionResult> expansions,
                      const AggregateOptions& options) {
  std::map<int, const ExpansionResult*> by_index;
  for (const auto& e : expansions) {
    if (!by_index.emplace(e.index, &e).second) {
      throw IntegrityError(fmt::format("point {} expanded twice", e.index));
    }
  }
  if (by_index.size() != skeleton.points.size()) {
    throw IntegrityError(fmt::format("{} expansions for {} skeleton points",
                                     by_index.size(), skeleton.points.size()));
  }
  std::string out;
  for (std::size_t i = 0; i < skeleton.points.size(); ++i) {
    const auto& p = skeleton.points[i];
    auto it = by_index.find(p.index);
    if (it == by_index.end()) {
      throw IntegrityError(fmt::format("no expansion for point {}", p.index));
    }
    if (i) out += options.joiner;
    const ExpansionResult& e = *it->second;
    if (options.strip_scaffold) {
      auto body = trim_leading(e.text);
      out += body.empty() ? std::string_view(p.text) : body;
    } else {
      out += std::to_string(p.index);
      out += ". ";
      out += p.text;
      out += e.text;
    }
  }
  return out;
}

Pipeline::Pipeline(const PromptLibrary& prompts, const ModelProfile& profile,
                   Backend& backend, SotOptions options)
    : prompts_(prompts),
      profile_(profile),
      backend_(backend),
      options_(std::move(options)) {
  validate(profile_);
}

GenerationParams Pipeline::generation() const {
  GenerationParams g = profile_.generation();
  g.seed = options_.seed;
  return g;
}

NormalAnswer Pipeline::run_normal(const QuestionRecord& q) const {
  require_question(q);
  RequestPayload req = assemble_normal_request(q.text, profile_);
  req.generation = generation();
  CompletionResult r = backend_.complete(req);
  NormalAnswer a;
  a.question_id = q.id;
  a.text = r.text;
  a.latency = r.wall_latency;
  a.prefill_tokens = r.prompt_tokens;
  a.decode_tokens = r.completion_tokens;
  a.usage_approximate = r.usage_approximate;
  a.calls.push_back(record_call(Stage::normal, 0, req, r));
  return a;
}

SotAnswer Pipeline::run_sot(const QuestionRecord& q) const {
  require_question(q);
  SotAnswer a;
  a.question_id = q.id;

  RequestPayload skel_req = assemble_skeleton_request(prompts_, q.text, profile_);
  skel_req.generation = generation();
  CompletionResult skel = backend_.complete(skel_req);
  CallRecord skel_call = record_call(Stage::skeleton, 0, skel_req, skel);

  // The backend strips the echoed "1."; parsing needs it back.
  std::string raw = skel_req.partial_answer + skel.text;
  try {
    a.skeleton = parse_skeleton(raw, options_.cap);
  } catch (const EmptySkeleton&) {
    throw SotFallback(std::move(raw), std::move(skel_call));
  }
  if (a.skeleton.truncated) {
    spdlog::warn("question {}: skeleton capped at {} points", q.id,
                 a.skeleton.points.size());
  }

  const auto& points = a.skeleton.points;
  const std::size_t b = points.size();
  std::vector<RequestPayload> requests;
  requests.reserve(b);
  for (const auto& p : points) {
    RequestPayload req = assemble_point_request(prompts_, q.text, a.skeleton.raw,
                                                p.index, p.text, profile_);
    req.generation = generation();
    requests.push_back(std::move(req));
  }

  std::vector<ExpansionResult> expansions(b);
  std::vector<CallRecord> point_calls(b);
  std::size_t workers = options_.max_concurrency ? options_.max_concurrency : b;
  workers = std::min({workers, b, backend_.max_concurrency()});
  std::atomic<std::size_t> next{0};
  std::exception_ptr fatal;
  std::mutex fatal_mu;
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < b; i = next++) {
          const auto& p = points[i];
          ExpansionResult& e = expansions[i];
          e.index = p.index;
          e.point_skeleton = p.text;
          auto degrade = [&](const std::exception& err, Duration spent) {
            spdlog::warn("question {}: point {} degraded: {}", q.id, p.index,
                         err.what());
            e.degraded = true;
            e.latency = spent;
            CallRecord& c = point_calls[i];
            c.stage = Stage::point;
            c.point_index = p.index;
            c.request = requests[i];
            c.latency = spent;
            c.finish_reason = FinishReason::error;
            c.error = err.what();
          };
          try {
            CompletionResult r = backend_.complete(requests[i]);
            e.text = r.text;
            e.latency = r.wall_latency;
            e.prefill_tokens = r.prompt_tokens;
            e.decode_tokens = r.completion_tokens;
            point_calls[i] = record_call(Stage::point, p.index, requests[i], r);
          } catch (const TransportError& err) {
            degrade(err, err.elapsed());
          } catch (const Error& err) {
            degrade(err, Duration::zero());
          } catch (...) {
            std::lock_guard lock(fatal_mu);
            if (!fatal) fatal = std::current_exception();
          }
        }
      });
    }
  }
  if (fatal) std::rethrow_exception(fatal);

  a.expansions = std::move(expansions);
  a.final_text = aggregate(a.skeleton, a.expansions, options_.aggregate);

  a.skeleton_latency = skel.wall_latency;
  for (const auto& e : a.expansions) {
    a.max_point_latency = std::max(a.max_point_latency, e.latency);
  }
  a.sot_latency = a.skeleton_latency + a.max_point_latency;

  a.tokens.stage1_prefill = skel.prompt_tokens;
  a.tokens.stage1_decode = skel.completion_tokens;
  a.usage_approximate = skel.usage_approximate;
  for (std::size_t i = 0; i < b; ++i) {
    a.tokens.stage2_prefill += a.expansions[i].prefill_tokens;
    a.tokens.stage2_decode += a.expansions[i].decode_tokens;
    a.usage_approximate = a.usage_approximate || point_calls[i].usage_approximate;
  }

  std::string prefix = requests.front().rendered_prompt();
  for (const auto& req : requests) {
    prefix.resize(common_prefix_length(prefix, req.rendered_prompt()));
  }
  a.point_prompt_prefix_tokens = approximate_token_count(prefix);

  a.calls.reserve(b + 1);
  a.calls.push_back(std::move(skel_call));
  for (auto& c : point_calls) a.calls.push_back(std::move(c));
  return a;
}

}  // namespace sot
