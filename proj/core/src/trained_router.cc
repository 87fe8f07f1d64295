#include <chrono>

#include <fmt/format.h>
#include <httplib.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "sot/router.h"

namespace sot {

TrainedRouter::TrainedRouter(std::string base_url, Duration timeout)
    : base_url_(std::move(base_url)), timeout_(timeout) {
  while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
}

RouterDecision TrainedRouter::route(const QuestionRecord& q) {
  RouterDecision d;
  d.question_id = q.id;
  d.source = RouterSource::trained;
  d.raw = "unavailable";

  auto scheme_end = base_url_.find("://");
  auto path_start = scheme_end == std::string::npos
                        ? std::string::npos
                        : base_url_.find('/', scheme_end + 3);
  std::string origin = base_url_.substr(0, path_start);
  std::string path =
      (path_start == std::string::npos ? "" : base_url_.substr(path_start)) +
      "/route";

  const auto start = std::chrono::steady_clock::now();
  try {
    httplib::Client client(origin);
    auto t = std::chrono::duration_cast<std::chrono::microseconds>(timeout_);
    client.set_connection_timeout(t);
    client.set_read_timeout(t);
    nlohmann::json body{{"question", q.text}};
    auto res = client.Post(path, body.dump(), "application/json");
    d.router_latency = std::chrono::duration_cast<Duration>(
        std::chrono::steady_clock::now() - start);
    if (!res) {
      spdlog::warn("trained router at {} unreachable: {}", base_url_,
                   httplib::to_string(res.error()));
      return d;
    }
    if (res->status != 200) {
      spdlog::warn("trained router returned HTTP {}", res->status);
      return d;
    }
    auto j = nlohmann::json::parse(res->body);
    d.use_sot = j.at("use_sot").get<bool>();
    d.raw = fmt::format("{}", j.at("score").get<double>());
  } catch (const std::exception& e) {
    spdlog::warn("trained router reply unusable: {}", e.what());
    d.use_sot = false;
    d.raw = "unavailable";
  }
  return d;
}

}  // namespace sot
