#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "sot/backend.h"
#include "sot/datasets.h"
#include "sot/expansion.h"
#include "sot/prompt_kit.h"

namespace sot {

enum class RouterSource { prompting, trained, human_label, heuristic };

std::string_view to_string(RouterSource source);
RouterSource parse_router_source(std::string_view name);

struct RouterDecision {
  std::string question_id;
  bool use_sot = false;
  RouterSource source = RouterSource::heuristic;
  std::string raw;  // router reply, service score, or label provenance
  Duration router_latency{};
  // SoT was chosen but the skeleton was unusable; normal answered instead.
  bool fallback = false;
};

// First standalone 'A', 'B' or 'C' (case-sensitive, neither neighbour an
// ASCII letter or digit), or nullopt.
std::optional<char> scan_router_letter(std::string_view reply);

class Router {
 public:
  virtual ~Router() = default;
  virtual RouterDecision route(const QuestionRecord& q) = 0;
};

// Asks an LLM to pick A/B/C; only A triggers SoT. Any failure means normal.
class PromptingRouter final : public Router {
 public:
  PromptingRouter(const PromptLibrary& prompts, Backend& backend,
                  GenerationParams generation = {});
  RouterDecision route(const QuestionRecord& q) override;

  // The router call of the last route(), for transcripts.
  std::optional<CallRecord> last_call() const { return last_call_; }

 private:
  const PromptLibrary& prompts_;
  Backend& backend_;
  GenerationParams generation_;
  std::optional<CallRecord> last_call_;
};

// Client for the trained-router service:
//   POST {base_url}/route {"question": str} -> {"use_sot": bool, "score": num}
// The service's use_sot is authoritative; an unreachable or misbehaving
// service yields use_sot=false with raw="unavailable".
class TrainedRouter final : public Router {
 public:
  explicit TrainedRouter(std::string base_url,
                         Duration timeout = std::chrono::seconds(10));
  RouterDecision route(const QuestionRecord& q) override;

 private:
  std::string base_url_;
  Duration timeout_;
};

// Static annotations; unlabeled ids route to normal.
class HumanLabelRouter final : public Router {
 public:
  explicit HumanLabelRouter(std::map<std::string, bool> labels);
  RouterDecision route(const QuestionRecord& q) override;

 private:
  std::map<std::string, bool> labels_;
};

// Offline stand-in, not a learned or prompted router: SoT when the question
// has at least `min_tokens` approximate tokens and no arithmetic operators.
class HeuristicRouter final : public Router {
 public:
  explicit HeuristicRouter(std::size_t min_tokens = 8);
  RouterDecision route(const QuestionRecord& q) override;

 private:
  std::size_t min_tokens_;
};

RouterDecision route_prompting(const QuestionRecord& q,
                               const PromptLibrary& prompts, Backend& backend);
RouterDecision route_trained(const QuestionRecord& q,
                             const std::string& service_url);

struct SotRResult {
  RouterDecision decision;
  std::variant<NormalAnswer, SotAnswer> answer;
  // Router reply plus a skeleton call wasted on fallback, when present.
  std::vector<CallRecord> overhead_calls;
  // router + (wasted skeleton) + chosen pipeline
  Duration total_latency{};

  bool used_sot() const { return std::holds_alternative<SotAnswer>(answer); }
};

// Routes, then runs exactly one of run_sot / run_normal.
SotRResult run_sot_r(const QuestionRecord& q, const Pipeline& pipeline,
                     Router& router);

struct ConfusionMatrix {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;

  std::size_t total() const { return tp + fp + fn + tn; }
  friend bool operator==(const ConfusionMatrix&,
                         const ConfusionMatrix&) = default;
};

// Rows are the reference, columns the candidate; pairs by question id.
// Throws IntegrityError when the id sets differ or repeat.
ConfusionMatrix confusion(std::span<const RouterDecision> reference,
                          std::span<const RouterDecision> candidate);

}  // namespace sot
