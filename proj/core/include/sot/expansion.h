#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sot/backend.h"
#include "sot/datasets.h"
#include "sot/error.h"
#include "sot/prompt_kit.h"
#include "sot/skeleton.h"

namespace sot {

enum class Stage { normal, skeleton, point, router, judge };

std::string_view to_string(Stage stage);
Stage parse_stage(std::string_view name);

// One request/response pair as it went over the wire.
struct CallRecord {
  Stage stage = Stage::normal;
  int point_index = 0;  // point stage only
  RequestPayload request;
  std::string response;
  Duration latency{};
  std::size_t prefill_tokens = 0;
  std::size_t decode_tokens = 0;
  bool usage_approximate = false;
  FinishReason finish_reason = FinishReason::stop;
  int attempts = 1;
  std::string error;  // non-empty when the call failed
};

struct ExpansionResult {
  int index = 0;
  std::string point_skeleton;
  std::string text;  // continuation after "{index}. {point_skeleton}"
  Duration latency{};
  std::size_t prefill_tokens = 0;
  std::size_t decode_tokens = 0;
  // The call failed; text is empty and the point keeps only its skeleton.
  bool degraded = false;
};

struct StageTokenTotals {
  std::size_t stage1_prefill = 0;
  std::size_t stage1_decode = 0;
  std::size_t stage2_prefill = 0;
  std::size_t stage2_decode = 0;
};

struct SotAnswer {
  std::string question_id;
  Skeleton skeleton;
  std::vector<ExpansionResult> expansions;  // skeleton order
  std::string final_text;
  Duration skeleton_latency{};
  Duration max_point_latency{};
  Duration sot_latency{};  // skeleton_latency + max_point_latency
  StageTokenTotals tokens;
  // Approximate token count of the prefix shared by every point request.
  std::size_t point_prompt_prefix_tokens = 0;
  bool usage_approximate = false;
  std::vector<CallRecord> calls;  // skeleton first, then points by index
};

struct NormalAnswer {
  std::string question_id;
  std::string text;
  Duration latency{};
  std::size_t prefill_tokens = 0;
  std::size_t decode_tokens = 0;
  bool usage_approximate = false;
  std::vector<CallRecord> calls;
};

// The skeleton stage produced no usable points.
class SotFallback : public Error {
 public:
  SotFallback(std::string raw_skeleton, CallRecord skeleton_call)
      : Error(ErrorFamily::parse, "skeleton had no points; fall back to normal"),
        raw_skeleton_(std::move(raw_skeleton)),
        skeleton_call_(std::move(skeleton_call)) {}

  const std::string& raw_skeleton() const noexcept { return raw_skeleton_; }
  const CallRecord& skeleton_call() const noexcept { return skeleton_call_; }

 private:
  std::string raw_skeleton_;
  CallRecord skeleton_call_;
};

struct AggregateOptions {
  std::string joiner = "\n\n";
  // Emit only the expansions, without the "{index}. {point_skeleton}" lead.
  bool strip_scaffold = false;
};

struct SotOptions {
  std::optional<std::size_t> cap = kDefaultPointCap;
  AggregateOptions aggregate;
  // Point requests in flight; 0 means one per point. Always clamped by the
  // backend's own limit.
  std::size_t max_concurrency = 0;
  std::optional<std::uint64_t> seed;
};

// Emits "{index}. {point_skeleton}{text}" per point in skeleton order.
// Throws IntegrityError when an index has no expansion, or two.
std::string aggregate(const Skeleton& skeleton,
                      std::span<const ExpansionResult> expansions,
                      const AggregateOptions& options = {});

// Runs normal and skeleton-first generation against one backend.
class Pipeline {
 public:
  Pipeline(const PromptLibrary& prompts, const ModelProfile& profile,
           Backend& backend, SotOptions options = {});

  NormalAnswer run_normal(const QuestionRecord& q) const;

  // Throws SotFallback on an unusable skeleton. Failed point calls degrade
  // to the bare point skeleton instead of failing the answer.
  SotAnswer run_sot(const QuestionRecord& q) const;

  const ModelProfile& profile() const { return profile_; }
  const PromptLibrary& prompts() const { return prompts_; }
  const SotOptions& options() const { return options_; }
  Backend& backend() const { return backend_; }

 private:
  GenerationParams generation() const;

  const PromptLibrary& prompts_;
  const ModelProfile& profile_;
  Backend& backend_;
  SotOptions options_;
};

}  // namespace sot
