#include "sot/transcript.h"

#include <fstream>

#include <fmt/format.h>

#include "sot/error.h"

namespace sot {
namespace {

double secs(Duration d) { return to_seconds(d); }

Duration dur(const ordered_json& j, const char* key) {
  return from_seconds(j.at(key).get<double>());
}

template <typename T>
std::optional<T> opt(const ordered_json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<T>();
}

ordered_json calls_json(const std::vector<CallRecord>& calls) {
  ordered_json a = ordered_json::array();
  for (const auto& c : calls) a.push_back(to_json(c));
  return a;
}

std::vector<CallRecord> calls_from(const ordered_json& j) {
  std::vector<CallRecord> out;
  for (const auto& c : j) out.push_back(call_from_json(c));
  return out;
}

}  // namespace

ordered_json to_json(const RequestPayload& p) {
  ordered_json messages = ordered_json::array();
  for (const auto& m : p.messages) {
    messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  }
  ordered_json gen = ordered_json::object();
  if (p.generation.max_new_tokens) gen["max_new_tokens"] = *p.generation.max_new_tokens;
  if (p.generation.temperature) gen["temperature"] = *p.generation.temperature;
  if (p.generation.seed) gen["seed"] = *p.generation.seed;
  ordered_json j;
  j["messages"] = std::move(messages);
  j["generation"] = std::move(gen);
  j["prompt_token_estimate"] = p.rendered_prompt_token_estimate;
  j["partial_answer"] = p.partial_answer;
  j["raw_prompt"] = p.raw_prompt;
  return j;
}

RequestPayload payload_from_json(const ordered_json& j) {
  RequestPayload p;
  for (const auto& m : j.at("messages")) {
    p.messages.push_back({parse_role(m.at("role").get<std::string>()),
                          m.at("content").get<std::string>()});
  }
  const auto& gen = j.at("generation");
  p.generation.max_new_tokens = opt<int>(gen, "max_new_tokens");
  p.generation.temperature = opt<double>(gen, "temperature");
  p.generation.seed = opt<std::uint64_t>(gen, "seed");
  p.rendered_prompt_token_estimate = j.at("prompt_token_estimate").get<std::size_t>();
  p.partial_answer = j.at("partial_answer").get<std::string>();
  p.raw_prompt = j.at("raw_prompt").get<bool>();
  return p;
}

ordered_json to_json(const CallRecord& c) {
  ordered_json j;
  j["stage"] = to_string(c.stage);
  if (c.stage == Stage::point) j["point_index"] = c.point_index;
  j["request"] = to_json(c.request);
  j["response"] = c.response;
  j["latency_s"] = secs(c.latency);
  j["prefill_tokens"] = c.prefill_tokens;
  j["decode_tokens"] = c.decode_tokens;
  j["usage_approximate"] = c.usage_approximate;
  j["finish_reason"] = to_string(c.finish_reason);
  j["attempts"] = c.attempts;
  if (!c.error.empty()) j["error"] = c.error;
  return j;
}

CallRecord call_from_json(const ordered_json& j) {
  CallRecord c;
  c.stage = parse_stage(j.at("stage").get<std::string>());
  c.point_index = j.value("point_index", 0);
  c.request = payload_from_json(j.at("request"));
  c.response = j.at("response").get<std::string>();
  c.latency = dur(j, "latency_s");
  c.prefill_tokens = j.at("prefill_tokens").get<std::size_t>();
  c.decode_tokens = j.at("decode_tokens").get<std::size_t>();
  c.usage_approximate = j.at("usage_approximate").get<bool>();
  c.finish_reason = parse_finish_reason(j.at("finish_reason").get<std::string>());
  c.attempts = j.at("attempts").get<int>();
  c.error = j.value("error", std::string{});
  return c;
}

ordered_json to_json(const Skeleton& s) {
  ordered_json points = ordered_json::array();
  for (const auto& p : s.points) points.push_back({{"index", p.index}, {"text", p.text}});
  ordered_json j;
  j["raw"] = s.raw;
  j["points"] = std::move(points);
  j["truncated"] = s.truncated;
  return j;
}

Skeleton skeleton_from_json(const ordered_json& j) {
  Skeleton s;
  s.raw = j.at("raw").get<std::string>();
  for (const auto& p : j.at("points")) {
    s.points.push_back({p.at("index").get<int>(), p.at("text").get<std::string>()});
  }
  s.truncated = j.at("truncated").get<bool>();
  return s;
}

ordered_json to_json(const SotAnswer& a) {
  ordered_json expansions = ordered_json::array();
  for (const auto& e : a.expansions) {
    ordered_json x;
    x["index"] = e.index;
    x["point_skeleton"] = e.point_skeleton;
    x["text"] = e.text;
    x["latency_s"] = secs(e.latency);
    x["prefill_tokens"] = e.prefill_tokens;
    x["decode_tokens"] = e.decode_tokens;
    x["degraded"] = e.degraded;
    expansions.push_back(std::move(x));
  }
  ordered_json j;
  j["question_id"] = a.question_id;
  j["skeleton"] = to_json(a.skeleton);
  j["expansions"] = std::move(expansions);
  j["final_text"] = a.final_text;
  j["skeleton_latency_s"] = secs(a.skeleton_latency);
  j["max_point_latency_s"] = secs(a.max_point_latency);
  j["sot_latency_s"] = secs(a.sot_latency);
  j["tokens"] = {{"stage1_prefill", a.tokens.stage1_prefill},
                 {"stage1_decode", a.tokens.stage1_decode},
                 {"stage2_prefill", a.tokens.stage2_prefill},
                 {"stage2_decode", a.tokens.stage2_decode}};
  j["point_prompt_prefix_tokens"] = a.point_prompt_prefix_tokens;
  j["usage_approximate"] = a.usage_approximate;
  j["calls"] = calls_json(a.calls);
  return j;
}

SotAnswer sot_answer_from_json(const ordered_json& j) {
  SotAnswer a;
  a.question_id = j.at("question_id").get<std::string>();
  a.skeleton = skeleton_from_json(j.at("skeleton"));
  for (const auto& x : j.at("expansions")) {
    ExpansionResult e;
    e.index = x.at("index").get<int>();
    e.point_skeleton = x.at("point_skeleton").get<std::string>();
    e.text = x.at("text").get<std::string>();
    e.latency = dur(x, "latency_s");
    e.prefill_tokens = x.at("prefill_tokens").get<std::size_t>();
    e.decode_tokens = x.at("decode_tokens").get<std::size_t>();
    e.degraded = x.at("degraded").get<bool>();
    a.expansions.push_back(std::move(e));
  }
  a.final_text = j.at("final_text").get<std::string>();
  a.skeleton_latency = dur(j, "skeleton_latency_s");
  a.max_point_latency = dur(j, "max_point_latency_s");
  a.sot_latency = dur(j, "sot_latency_s");
  const auto& t = j.at("tokens");
  a.tokens.stage1_prefill = t.at("stage1_prefill").get<std::size_t>();
  a.tokens.stage1_decode = t.at("stage1_decode").get<std::size_t>();
  a.tokens.stage2_prefill = t.at("stage2_prefill").get<std::size_t>();
  a.tokens.stage2_decode = t.at("stage2_decode").get<std::size_t>();
  a.point_prompt_prefix_tokens = j.at("point_prompt_prefix_tokens").get<std::size_t>();
  a.usage_approximate = j.at("usage_approximate").get<bool>();
  a.calls = calls_from(j.at("calls"));
  return a;
}

ordered_json to_json(const NormalAnswer& a) {
  ordered_json j;
  j["question_id"] = a.question_id;
  j["text"] = a.text;
  j["latency_s"] = secs(a.latency);
  j["prefill_tokens"] = a.prefill_tokens;
  j["decode_tokens"] = a.decode_tokens;
  j["usage_approximate"] = a.usage_approximate;
  j["calls"] = calls_json(a.calls);
  return j;
}

NormalAnswer normal_answer_from_json(const ordered_json& j) {
  NormalAnswer a;
  a.question_id = j.at("question_id").get<std::string>();
  a.text = j.at("text").get<std::string>();
  a.latency = dur(j, "latency_s");
  a.prefill_tokens = j.at("prefill_tokens").get<std::size_t>();
  a.decode_tokens = j.at("decode_tokens").get<std::size_t>();
  a.usage_approximate = j.at("usage_approximate").get<bool>();
  a.calls = calls_from(j.at("calls"));
  return a;
}

ordered_json to_json(const RouterDecision& d) {
  ordered_json j;
  j["question_id"] = d.question_id;
  j["use_sot"] = d.use_sot;
  j["source"] = to_string(d.source);
  j["raw"] = d.raw;
  j["router_latency_s"] = secs(d.router_latency);
  j["fallback"] = d.fallback;
  return j;
}

RouterDecision decision_from_json(const ordered_json& j) {
  RouterDecision d;
  d.question_id = j.at("question_id").get<std::string>();
  d.use_sot = j.at("use_sot").get<bool>();
  d.source = parse_router_source(j.at("source").get<std::string>());
  d.raw = j.at("raw").get<std::string>();
  d.router_latency = dur(j, "router_latency_s");
  d.fallback = j.at("fallback").get<bool>();
  return d;
}

ordered_json to_json(const SotLatencyEstimate& e) {
  ordered_json j;
  j["skeleton_ms"] = e.skeleton_ms;
  j["point_ms"] = e.point_ms;
  j["total_ms"] = e.total_ms;
  j["skeleton_input"] = e.skeleton_input;
  j["skeleton_output"] = e.skeleton_output;
  j["point_input"] = e.point_input;
  j["point_output"] = e.point_output;
  j["batch"] = e.batch;
  j["clamped"] = e.clamped;
  return j;
}

SotLatencyEstimate estimate_from_json(const ordered_json& j) {
  SotLatencyEstimate e;
  e.skeleton_ms = j.at("skeleton_ms").get<double>();
  e.point_ms = j.at("point_ms").get<double>();
  e.total_ms = j.at("total_ms").get<double>();
  e.skeleton_input = j.at("skeleton_input").get<std::size_t>();
  e.skeleton_output = j.at("skeleton_output").get<std::size_t>();
  e.point_input = j.at("point_input").get<std::size_t>();
  e.point_output = j.at("point_output").get<std::size_t>();
  e.batch = j.at("batch").get<std::size_t>();
  e.clamped = j.at("clamped").get<bool>();
  return e;
}

void write_json_file(const std::filesystem::path& path, const ordered_json& doc) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError(fmt::format("cannot write {}", path.string()));
  out << doc.dump(2) << '\n';
  if (!out) throw ConfigError(fmt::format("write to {} failed", path.string()));
}

ordered_json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open {}", path.string()));
  try {
    return ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

}  // namespace sot
