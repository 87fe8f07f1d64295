#include <chrono>
#include <cstdlib>
#include <thread>

#include <fmt/format.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "sot/backend.h"
#include "sot/error.h"
#include "sot/tokens.h"

namespace sot {
namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

}  // namespace

struct HttpChatBackend::Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // path prefix without trailing slash
};

HttpChatBackend::HttpChatBackend(BackendConfig cfg)
    : Backend(cfg.max_concurrency, cfg.max_retries, cfg.retry_backoff),
      cfg_(std::move(cfg)),
      endpoint_(std::make_unique<Endpoint>()) {
  const std::string& url = cfg_.base_url;
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw ConfigError(fmt::format("base_url '{}' has no scheme", url));
  }
  auto path_start = url.find('/', scheme_end + 3);
  endpoint_->origin = url.substr(0, path_start);
  if (path_start != std::string::npos) endpoint_->prefix = url.substr(path_start);
  while (!endpoint_->prefix.empty() && endpoint_->prefix.back() == '/') {
    endpoint_->prefix.pop_back();
  }
}

HttpChatBackend::~HttpChatBackend() = default;

CompletionResult HttpChatBackend::attempt(const RequestPayload& payload) {
  json body;
  if (!cfg_.model.empty()) body["model"] = cfg_.model;
  std::string path = endpoint_->prefix;
  if (payload.raw_prompt) {
    path += "/completions";
    body["prompt"] = payload.messages.front().content;
  } else {
    path += "/chat/completions";
    json messages = json::array();
    for (const auto& m : payload.messages) {
      messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
    }
    body["messages"] = std::move(messages);
  }
  const auto& gen = payload.generation;
  if (gen.max_new_tokens) body["max_tokens"] = *gen.max_new_tokens;
  if (gen.temperature) body["temperature"] = *gen.temperature;
  if (gen.seed) body["seed"] = *gen.seed;

  httplib::Client client(endpoint_->origin);
  auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(
      cfg_.request_timeout);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  httplib::Headers headers;
  if (!cfg_.api_key_env.empty()) {
    if (const char* key = std::getenv(cfg_.api_key_env.c_str()); key && *key) {
      headers.emplace("Authorization", fmt::format("Bearer {}", key));
    }
  }

  const auto start = Clock::now();
  auto res = client.Post(path, headers, body.dump(), "application/json");
  const auto elapsed = std::chrono::duration_cast<Duration>(Clock::now() - start);

  if (!res) {
    throw TransportError(
        fmt::format("POST {}{}: {}", endpoint_->origin, path,
                    httplib::to_string(res.error())),
        elapsed);
  }
  if (res->status == 429) {
    throw RateLimited(fmt::format("POST {}: HTTP 429", path), elapsed);
  }
  if (res->status >= 500) {
    throw TransportError(fmt::format("POST {}: HTTP {}", path, res->status),
                         elapsed);
  }
  if (res->status != 200) {
    throw ProtocolError(fmt::format("POST {}: HTTP {}: {:.200}", path,
                                    res->status, res->body));
  }

  CompletionResult r;
  r.wall_latency = elapsed;
  try {
    auto j = json::parse(res->body);
    const auto& choice = j.at("choices").at(0);
    if (payload.raw_prompt) {
      r.text = choice.at("text").get<std::string>();
    } else {
      r.text = choice.at("message").at("content").get<std::string>();
    }
    auto reason = choice.value("finish_reason", std::string("stop"));
    r.finish_reason = reason == "length" ? FinishReason::length : FinishReason::stop;
    if (auto it = j.find("usage"); it != j.end() && it->is_object() &&
                                   it->contains("prompt_tokens") &&
                                   it->contains("completion_tokens")) {
      r.prompt_tokens = it->at("prompt_tokens").get<std::size_t>();
      r.completion_tokens = it->at("completion_tokens").get<std::size_t>();
    } else {
      r.prompt_tokens = payload.rendered_prompt_token_estimate;
      r.completion_tokens = approximate_token_count(r.text);
      r.usage_approximate = true;
    }
  } catch (const json::exception& e) {
    throw ProtocolError(fmt::format("POST {}: malformed response: {}", path, e.what()));
  }
  return r;
}

Duration HttpChatBackend::pause(Duration backoff) {
  std::this_thread::sleep_for(backoff);
  return backoff;
}

}  // namespace sot
