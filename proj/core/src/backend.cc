#include "sot/backend.h"

#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "sot/error.h"
#include "sot/tokens.h"

namespace sot {
namespace {

using nlohmann::ordered_json;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r';
}

std::string_view to_string(MockFailure f) {
  switch (f) {
    case MockFailure::none: return "none";
    case MockFailure::rate_limit: return "rate_limit";
    case MockFailure::transport: return "transport";
    case MockFailure::malformed: return "malformed";
  }
  return "none";
}

MockFailure parse_mock_failure(std::string_view s) {
  if (s == "none") return MockFailure::none;
  if (s == "rate_limit") return MockFailure::rate_limit;
  if (s == "transport") return MockFailure::transport;
  if (s == "malformed") return MockFailure::malformed;
  throw DataError(fmt::format("unknown mock failure '{}'", s));
}

}  // namespace

Duration from_seconds(double seconds) {
  return Duration(std::llround(seconds * 1e9));
}

std::string_view to_string(FinishReason reason) {
  switch (reason) {
    case FinishReason::stop: return "stop";
    case FinishReason::length: return "length";
    case FinishReason::error: return "error";
  }
  return "stop";
}

FinishReason parse_finish_reason(std::string_view name) {
  if (name == "stop") return FinishReason::stop;
  if (name == "length") return FinishReason::length;
  if (name == "error") return FinishReason::error;
  throw DataError(fmt::format("unknown finish_reason '{}'", name));
}

TokenUsage usage_tokens(const CompletionResult& result) {
  return {result.prompt_tokens, result.completion_tokens,
          result.usage_approximate};
}

void validate(const BackendConfig& cfg) {
  if (cfg.max_concurrency < 1) throw ConfigError("max_concurrency must be >= 1");
  if (cfg.max_retries < 0) throw ConfigError("max_retries must be >= 0");
  for (auto d : cfg.retry_backoff) {
    if (d < Duration::zero()) throw ConfigError("negative retry backoff");
  }
  if (cfg.kind == BackendKind::http_chat && cfg.base_url.empty()) {
    throw ConfigError("http-chat backend needs base_url");
  }
  if (cfg.kind == BackendKind::mock && cfg.mock_script.empty()) {
    throw ConfigError("mock backend needs mock_script");
  }
}

BackendConfig parse_backend_config(std::string_view json_text,
                                   const std::filesystem::path& base_dir) {
  BackendConfig cfg;
  try {
    auto j = nlohmann::json::parse(json_text);
    auto kind = j.at("kind").get<std::string>();
    if (kind == "http-chat") {
      cfg.kind = BackendKind::http_chat;
    } else if (kind == "mock") {
      cfg.kind = BackendKind::mock;
    } else {
      throw ConfigError(fmt::format("unknown backend kind '{}'", kind));
    }
    cfg.base_url = j.value("base_url", std::string{});
    cfg.api_key_env = j.value("api_key_env", std::string{});
    cfg.model = j.value("model", std::string{});
    if (j.contains("request_timeout_s")) {
      cfg.request_timeout = from_seconds(j.at("request_timeout_s").get<double>());
    }
    cfg.max_retries = j.value("max_retries", cfg.max_retries);
    if (j.contains("retry_backoff_s")) {
      cfg.retry_backoff.clear();
      for (const auto& v : j.at("retry_backoff_s")) {
        cfg.retry_backoff.push_back(from_seconds(v.get<double>()));
      }
    }
    cfg.max_concurrency = j.value("max_concurrency", cfg.max_concurrency);
    if (j.contains("mock_script")) {
      std::filesystem::path script = j.at("mock_script").get<std::string>();
      cfg.mock_script = script.is_relative() && !base_dir.empty()
                            ? base_dir / script
                            : script;
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(fmt::format("bad backend config: {}", e.what()));
  }
  validate(cfg);
  return cfg;
}

BackendConfig load_backend_config(const std::filesystem::path& path) {
  return parse_backend_config(read_file(path), path.parent_path());
}

std::string strip_partial_answer(std::string text, std::string_view partial,
                                 bool* collapsed) {
  if (collapsed) *collapsed = false;
  if (partial.empty() || !text.starts_with(partial)) return text;
  text.erase(0, partial.size());
  std::size_t lead = 0;
  while (lead < text.size() && is_space(text[lead])) ++lead;
  if (std::string_view(text).substr(lead).starts_with(partial)) {
    text.erase(0, lead + partial.size());
    if (collapsed) *collapsed = true;
  }
  return text;
}

Backend::Backend(std::size_t max_concurrency, int max_retries,
                 std::vector<Duration> retry_backoff)
    : max_concurrency_(max_concurrency),
      max_retries_(max_retries),
      retry_backoff_(std::move(retry_backoff)),
      slots_(static_cast<std::ptrdiff_t>(max_concurrency)) {
  if (max_concurrency < 1) throw ConfigError("max_concurrency must be >= 1");
  if (max_retries < 0) throw ConfigError("max_retries must be >= 0");
}

CompletionResult Backend::complete(const RequestPayload& payload) {
  validate(payload);
  slots_.acquire();
  struct Release {
    std::counting_semaphore<>& s;
    ~Release() { s.release(); }
  } release{slots_};

  Duration spent{};
  for (int attempt_no = 0;; ++attempt_no) {
    try {
      CompletionResult r = attempt(payload);
      r.wall_latency += spent;
      r.attempts = attempt_no + 1;
      r.text = strip_partial_answer(std::move(r.text), payload.partial_answer,
                                    &r.prefix_collapsed);
      if (r.prefix_collapsed) {
        spdlog::warn("backend repeated the partial answer '{}'; collapsed",
                     payload.partial_answer);
      }
      return r;
    } catch (const TransportError& e) {
      spent += e.elapsed();
      if (attempt_no >= max_retries_) {
        if (dynamic_cast<const RateLimited*>(&e)) {
          throw RateLimited(
              fmt::format("rate limited after {} attempts: {}", attempt_no + 1,
                          e.what()),
              spent);
        }
        throw TransportError(fmt::format("failed after {} attempts: {}",
                                         attempt_no + 1, e.what()),
                             spent);
      }
      if (!retry_backoff_.empty()) {
        auto idx = std::min<std::size_t>(attempt_no, retry_backoff_.size() - 1);
        spent += pause(retry_backoff_[idx]);
      }
    }
  }
}

MockScript MockScript::parse(std::string_view json_text) {
  MockScript script;
  try {
    auto j = nlohmann::json::parse(json_text);
    const auto& entries = j.is_array() ? j : j.at("entries");
    for (const auto& e : entries) {
      MockEntry m;
      m.name = e.value("name", std::string{});
      if (e.contains("exact")) m.exact = e.at("exact").get<std::string>();
      if (e.contains("contains")) {
        const auto& c = e.at("contains");
        if (c.is_string()) {
          m.contains.push_back(c.get<std::string>());
        } else {
          m.contains = c.get<std::vector<std::string>>();
        }
      }
      if (!m.exact && m.contains.empty()) {
        throw DataError(fmt::format("mock entry '{}' has no matcher", m.name));
      }
      m.response = e.value("response", std::string{});
      m.prefill_seconds_per_token = e.value("prefill_s_per_token", 0.0);
      m.decode_seconds_per_token = e.value("decode_s_per_token", 0.0);
      if (m.prefill_seconds_per_token < 0 || m.decode_seconds_per_token < 0) {
        throw DataError(fmt::format("mock entry '{}' has a negative rate", m.name));
      }
      if (e.contains("prompt_tokens")) {
        m.prompt_tokens = e.at("prompt_tokens").get<std::size_t>();
      }
      if (e.contains("completion_tokens")) {
        m.completion_tokens = e.at("completion_tokens").get<std::size_t>();
      }
      if (e.contains("finish_reason")) {
        m.finish_reason = parse_finish_reason(e.at("finish_reason").get<std::string>());
      }
      if (e.contains("failure")) {
        m.failure = parse_mock_failure(e.at("failure").get<std::string>());
        m.fail_times = e.value("fail_times", 1);
      }
      script.entries.push_back(std::move(m));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(fmt::format("bad mock script: {}", e.what()));
  }
  for (std::size_t a = 0; a < script.entries.size(); ++a) {
    for (std::size_t b = a + 1; b < script.entries.size(); ++b) {
      const auto& x = script.entries[a];
      const auto& y = script.entries[b];
      if (x.exact == y.exact && x.contains == y.contains) {
        throw DataError(fmt::format("mock entries {} and {} share a matcher", a, b));
      }
    }
  }
  return script;
}

MockScript MockScript::load(const std::filesystem::path& path) {
  try {
    return parse(read_file(path));
  } catch (const DataError& e) {
    throw DataError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

std::string MockScript::dump() const {
  ordered_json arr = ordered_json::array();
  for (const auto& m : entries) {
    ordered_json e;
    if (!m.name.empty()) e["name"] = m.name;
    if (m.exact) e["exact"] = *m.exact;
    if (!m.contains.empty()) e["contains"] = m.contains;
    e["response"] = m.response;
    e["prefill_s_per_token"] = m.prefill_seconds_per_token;
    e["decode_s_per_token"] = m.decode_seconds_per_token;
    if (m.prompt_tokens) e["prompt_tokens"] = *m.prompt_tokens;
    if (m.completion_tokens) e["completion_tokens"] = *m.completion_tokens;
    if (m.finish_reason != FinishReason::stop) {
      e["finish_reason"] = to_string(m.finish_reason);
    }
    if (m.failure != MockFailure::none) {
      e["failure"] = to_string(m.failure);
      e["fail_times"] = m.fail_times;
    }
    arr.push_back(std::move(e));
  }
  return ordered_json{{"entries", std::move(arr)}}.dump(2) + "\n";
}

std::optional<std::size_t> MockScript::match(std::string_view prompt) const {
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].exact && *entries[i].exact == prompt) return i;
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    if (e.exact || e.contains.empty()) continue;
    bool all = true;
    for (const auto& needle : e.contains) {
      if (prompt.find(needle) == std::string_view::npos) {
        all = false;
        break;
      }
    }
    if (all) return i;
  }
  return std::nullopt;
}

void VirtualClock::advance(Duration d) {
  std::lock_guard lock(mu_);
  now_ += d;
}

Duration VirtualClock::now() const {
  std::lock_guard lock(mu_);
  return now_;
}

MockBackend::MockBackend(MockScript script, std::size_t max_concurrency,
                         int max_retries, std::vector<Duration> retry_backoff)
    : Backend(max_concurrency, max_retries, std::move(retry_backoff)),
      script_(std::move(script)),
      hits_(script_.entries.size(), 0) {}

MockBackend::MockBackend(MockScript script, const BackendConfig& cfg)
    : MockBackend(std::move(script), cfg.max_concurrency, cfg.max_retries,
                  cfg.retry_backoff) {}

std::size_t MockBackend::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

std::vector<std::size_t> MockBackend::hits() const {
  std::lock_guard lock(mu_);
  return hits_;
}

CompletionResult MockBackend::attempt(const RequestPayload& payload) {
  const std::string prompt = payload.rendered_prompt();
  auto idx = script_.match(prompt);
  std::size_t hit = 0;
  {
    std::lock_guard lock(mu_);
    ++calls_;
    if (idx) hit = hits_[*idx]++;
  }
  if (!idx) {
    throw ProtocolError(fmt::format("no mock entry matches prompt: {:.120}", prompt));
  }
  const MockEntry& e = script_.entries[*idx];
  if (e.failure != MockFailure::none && static_cast<int>(hit) < e.fail_times) {
    switch (e.failure) {
      case MockFailure::rate_limit:
        throw RateLimited(fmt::format("mock '{}': HTTP 429", e.name));
      case MockFailure::transport:
        throw TransportError(fmt::format("mock '{}': connection reset", e.name));
      case MockFailure::malformed:
        throw ProtocolError(fmt::format("mock '{}': malformed body", e.name));
      case MockFailure::none:
        break;
    }
  }
  CompletionResult r;
  r.text = e.response;
  r.prompt_tokens = e.prompt_tokens.value_or(payload.rendered_prompt_token_estimate);
  r.completion_tokens =
      e.completion_tokens.value_or(approximate_token_count(e.response));
  r.usage_approximate = false;
  r.finish_reason = e.finish_reason;
  r.wall_latency = from_seconds(
      e.prefill_seconds_per_token * static_cast<double>(r.prompt_tokens) +
      e.decode_seconds_per_token * static_cast<double>(r.completion_tokens));
  clock_.advance(r.wall_latency);
  return r;
}

Duration MockBackend::pause(Duration backoff) {
  clock_.advance(backoff);
  return backoff;
}

std::unique_ptr<Backend> make_backend(const BackendConfig& cfg) {
  validate(cfg);
  switch (cfg.kind) {
    case BackendKind::mock:
      return std::make_unique<MockBackend>(MockScript::load(cfg.mock_script), cfg);
    case BackendKind::http_chat:
      return std::make_unique<HttpChatBackend>(cfg);
  }
  throw ConfigError("unknown backend kind");
}

}  // namespace sot
