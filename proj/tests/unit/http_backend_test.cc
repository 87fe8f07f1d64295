#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>

#include <nlohmann/json.hpp>

#include "sot/backend.h"
#include "sot/error.h"
#include "sot/tokens.h"
#include "stub_server.h"

namespace sot {
namespace {

using namespace std::chrono_literals;
using nlohmann::json;
using testing::StubServer;

std::string chat_body(const std::string& content, bool usage = true) {
  json j = {{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}},
                          {"finish_reason", "stop"}}}}};
  if (usage) j["usage"] = {{"prompt_tokens", 11}, {"completion_tokens", 7}};
  return j.dump();
}

BackendConfig config_for(const StubServer& s, int retries = 2) {
  BackendConfig cfg;
  cfg.kind = BackendKind::http_chat;
  cfg.base_url = s.url("/v1");
  cfg.model = "stub-model";
  cfg.max_retries = retries;
  cfg.retry_backoff = {1ms};
  cfg.request_timeout = 5s;
  return cfg;
}

RequestPayload chat_payload(std::string partial = {}) {
  RequestPayload p;
  p.messages.push_back({Role::user, "Question?"});
  if (!partial.empty()) {
    p.messages.push_back({Role::assistant, partial});
    p.partial_answer = partial;
  }
  p.generation.max_new_tokens = 64;
  p.generation.temperature = 0.0;
  p.rendered_prompt_token_estimate = approximate_token_count(p.rendered_prompt());
  return p;
}

TEST(HttpChatBackend, SuccessfulChatCall) {
  json seen;
  std::string auth;
  StubServer server([&](httplib::Server& s) {
    s.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
      seen = json::parse(req.body);
      auth = req.get_header_value("Authorization");
      res.set_content(chat_body("1. A\n2. B"), "application/json");
    });
  });
  ::setenv("SOT_STUB_KEY", "secret", 1);
  auto cfg = config_for(server);
  cfg.api_key_env = "SOT_STUB_KEY";
  HttpChatBackend backend(cfg);
  auto r = backend.complete(chat_payload("1."));
  EXPECT_EQ(r.text, " A\n2. B");
  EXPECT_EQ(usage_tokens(r), (TokenUsage{11, 7, false}));
  EXPECT_EQ(seen["model"], "stub-model");
  EXPECT_EQ(seen["max_tokens"], 64);
  ASSERT_EQ(seen["messages"].size(), 2u);
  EXPECT_EQ(seen["messages"][1]["role"], "assistant");
  EXPECT_EQ(auth, "Bearer secret");
  EXPECT_GT(r.wall_latency, Duration::zero());
}

TEST(HttpChatBackend, MissingUsageFallsBackToApproximation) {
  StubServer server([](httplib::Server& s) {
    s.Post("/v1/chat/completions", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(chat_body("some words here", false), "application/json");
    });
  });
  HttpChatBackend backend(config_for(server));
  auto p = chat_payload();
  auto r = backend.complete(p);
  EXPECT_TRUE(r.usage_approximate);
  EXPECT_EQ(r.completion_tokens, approximate_token_count("some words here"));
  EXPECT_EQ(r.prompt_tokens, p.rendered_prompt_token_estimate);
}

TEST(HttpChatBackend, RetriesServerErrorsThenSucceeds) {
  std::atomic<int> hits{0};
  StubServer server([&](httplib::Server& s) {
    s.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
      if (hits++ < 2) {
        res.status = 500;
        return;
      }
      res.set_content(chat_body("ok"), "application/json");
    });
  });
  HttpChatBackend backend(config_for(server));
  auto r = backend.complete(chat_payload());
  EXPECT_EQ(r.text, "ok");
  EXPECT_EQ(r.attempts, 3);
  EXPECT_EQ(hits.load(), 3);
}

TEST(HttpChatBackend, PersistentRateLimitSurfaces) {
  std::atomic<int> hits{0};
  StubServer server([&](httplib::Server& s) {
    s.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
      ++hits;
      res.status = 429;
    });
  });
  HttpChatBackend backend(config_for(server, 2));
  EXPECT_THROW(backend.complete(chat_payload()), RateLimited);
  EXPECT_EQ(hits.load(), 3);
}

TEST(HttpChatBackend, MalformedBodyIsProtocolError) {
  std::atomic<int> hits{0};
  StubServer server([&](httplib::Server& s) {
    s.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
      ++hits;
      res.set_content("{\"choices\": []}", "application/json");
    });
  });
  HttpChatBackend backend(config_for(server));
  EXPECT_THROW(backend.complete(chat_payload()), ProtocolError);
  EXPECT_EQ(hits.load(), 1);
}

TEST(HttpChatBackend, ClientErrorIsNotRetried) {
  std::atomic<int> hits{0};
  StubServer server([&](httplib::Server& s) {
    s.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
      ++hits;
      res.status = 400;
      res.set_content("bad request", "text/plain");
    });
  });
  HttpChatBackend backend(config_for(server));
  EXPECT_THROW(backend.complete(chat_payload()), ProtocolError);
  EXPECT_EQ(hits.load(), 1);
}

TEST(HttpChatBackend, RawPromptUsesCompletionsEndpoint) {
  json seen;
  StubServer server([&](httplib::Server& s) {
    s.Post("/v1/completions", [&](const httplib::Request& req, httplib::Response& res) {
      seen = json::parse(req.body);
      json j = {{"choices", {{{"text", "1. A"}, {"finish_reason", "length"}}}}};
      res.set_content(j.dump(), "application/json");
    });
  });
  HttpChatBackend backend(config_for(server));
  RequestPayload p;
  p.raw_prompt = true;
  p.messages.push_back({Role::user, "USER: hi ASSISTANT: 1."});
  p.partial_answer = "1.";
  p.rendered_prompt_token_estimate = 5;
  auto r = backend.complete(p);
  EXPECT_EQ(seen["prompt"], "USER: hi ASSISTANT: 1.");
  EXPECT_FALSE(seen.contains("messages"));
  EXPECT_EQ(r.text, " A");
  EXPECT_EQ(r.finish_reason, FinishReason::length);
}

TEST(HttpChatBackend, UnreachableHostIsTransportError) {
  BackendConfig cfg;
  cfg.kind = BackendKind::http_chat;
  cfg.base_url = "http://127.0.0.1:1/v1";
  cfg.max_retries = 0;
  cfg.request_timeout = 1s;
  HttpChatBackend backend(cfg);
  EXPECT_THROW(backend.complete(chat_payload()), TransportError);
}

TEST(HttpChatBackend, BaseUrlNeedsScheme) {
  BackendConfig cfg;
  cfg.kind = BackendKind::http_chat;
  cfg.base_url = "localhost:8000";
  EXPECT_THROW(HttpChatBackend{cfg}, ConfigError);
}

}  // namespace
}  // namespace sot
