#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

#include "sot/prompt_kit.h"

namespace sot {

using Duration = std::chrono::nanoseconds;

inline double to_seconds(Duration d) {
  return std::chrono::duration<double>(d).count();
}
// Rounds to the nearest nanosecond.
Duration from_seconds(double seconds);

enum class FinishReason { stop, length, error };

std::string_view to_string(FinishReason reason);
FinishReason parse_finish_reason(std::string_view name);

struct CompletionResult {
  std::string text;
  std::size_t prompt_tokens = 0;
  std::size_t completion_tokens = 0;
  // Set when the endpoint reported no usage and counts were estimated.
  bool usage_approximate = false;
  Duration wall_latency{};
  FinishReason finish_reason = FinishReason::stop;
  bool prefix_collapsed = false;
  int attempts = 1;
};

struct TokenUsage {
  std::size_t prefill = 0;
  std::size_t decode = 0;
  bool approximate = false;

  friend bool operator==(const TokenUsage&, const TokenUsage&) = default;
};

TokenUsage usage_tokens(const CompletionResult& result);

enum class BackendKind { http_chat, mock };

struct BackendConfig {
  BackendKind kind = BackendKind::mock;
  std::string base_url;     // e.g. http://localhost:8000/v1
  std::string api_key_env;  // name of the env var holding the bearer token
  std::string model;        // "model" field sent on the wire
  Duration request_timeout = std::chrono::seconds(120);
  int max_retries = 2;
  // Wait before retry n is retry_backoff[min(n, size-1)]; empty means none.
  std::vector<Duration> retry_backoff = {std::chrono::seconds(1),
                                         std::chrono::seconds(2)};
  std::size_t max_concurrency = 8;
  std::filesystem::path mock_script;
};

void validate(const BackendConfig& cfg);
// Relative mock_script paths resolve against the config file's directory.
BackendConfig load_backend_config(const std::filesystem::path& path);
BackendConfig parse_backend_config(std::string_view json_text,
                                   const std::filesystem::path& base_dir = {});

// Removes an echoed partial answer from the front of `text`. If the model
// repeated it a second time (after optional whitespace) that copy is removed
// too and `collapsed` is set.
std::string strip_partial_answer(std::string text, std::string_view partial,
                                 bool* collapsed = nullptr);

// Uniform completion interface. complete() bounds in-flight calls at
// max_concurrency, retries transport failures and 429s, and normalizes the
// partial-answer prefix so callers always see the continuation only.
class Backend {
 public:
  Backend(std::size_t max_concurrency, int max_retries,
          std::vector<Duration> retry_backoff);
  virtual ~Backend() = default;

  Backend(const Backend&) = delete;
  Backend& operator=(const Backend&) = delete;

  CompletionResult complete(const RequestPayload& payload);

  std::size_t max_concurrency() const { return max_concurrency_; }

 protected:
  // One attempt. wall_latency covers this attempt only.
  virtual CompletionResult attempt(const RequestPayload& payload) = 0;
  // Waits out a retry backoff; returns the time to charge to the call.
  virtual Duration pause(Duration backoff) = 0;

 private:
  std::size_t max_concurrency_;
  int max_retries_;
  std::vector<Duration> retry_backoff_;
  std::counting_semaphore<> slots_;
};

// OpenAI-style chat-completion client: POST {base_url}/chat/completions, or
// {base_url}/completions for raw prompts.
class HttpChatBackend final : public Backend {
 public:
  explicit HttpChatBackend(BackendConfig cfg);
  ~HttpChatBackend() override;

 protected:
  CompletionResult attempt(const RequestPayload& payload) override;
  Duration pause(Duration backoff) override;

 private:
  struct Endpoint;
  BackendConfig cfg_;
  std::unique_ptr<Endpoint> endpoint_;
};

enum class MockFailure { none, rate_limit, transport, malformed };

struct MockEntry {
  std::string name;
  // An exact matcher compares against the full rendered prompt. Otherwise
  // every string in `contains` must occur in it.
  std::optional<std::string> exact;
  std::vector<std::string> contains;
  std::string response;
  double prefill_seconds_per_token = 0.0;
  double decode_seconds_per_token = 0.0;
  // Override the approximate token counts.
  std::optional<std::size_t> prompt_tokens;
  std::optional<std::size_t> completion_tokens;
  FinishReason finish_reason = FinishReason::stop;
  // The first `fail_times` calls hitting this entry fail with `failure`.
  MockFailure failure = MockFailure::none;
  int fail_times = 0;
};

// Entries are tried in order: all exact matchers first, then the
// substring matchers in file order. The first hit answers.
struct MockScript {
  std::vector<MockEntry> entries;

  static MockScript parse(std::string_view json_text);
  static MockScript load(const std::filesystem::path& path);
  std::string dump() const;

  // Index into entries, or nullopt.
  std::optional<std::size_t> match(std::string_view rendered_prompt) const;
};

// Simulated time accumulated by a mock backend. Never sleeps.
class VirtualClock {
 public:
  void advance(Duration d);
  Duration now() const;

 private:
  mutable std::mutex mu_;
  Duration now_{};
};

// Scripted backend on a virtual clock:
//   latency = prefill_rate * prompt_tokens + decode_rate * completion_tokens
// where prompt_tokens defaults to the payload's rendered token estimate and
// completion_tokens to the approximate count of the response text.
class MockBackend final : public Backend {
 public:
  explicit MockBackend(MockScript script, std::size_t max_concurrency = 8,
                       int max_retries = 2,
                       std::vector<Duration> retry_backoff = {});
  MockBackend(MockScript script, const BackendConfig& cfg);

  std::size_t calls() const;
  std::vector<std::size_t> hits() const;  // per entry
  const VirtualClock& clock() const { return clock_; }

 protected:
  CompletionResult attempt(const RequestPayload& payload) override;
  Duration pause(Duration backoff) override;

 private:
  MockScript script_;
  VirtualClock clock_;
  mutable std::mutex mu_;
  std::size_t calls_ = 0;
  std::vector<std::size_t> hits_;
};

std::unique_ptr<Backend> make_backend(const BackendConfig& cfg);

}  // namespace sot
