#include "sot/bench.h"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "sot/error.h"
#include "sot/transcript.h"

namespace sot {
namespace {

struct Slot {
  RunRecord record;
  std::vector<std::string> failures;
  std::size_t resumed = 0;
};

Transcript run_mode(const QuestionRecord& q, const Pipeline& pipeline,
                    Router* router, RunMode mode, std::mutex& router_mu) {
  Transcript t;
  t.question_id = q.id;
  t.model_id = pipeline.profile().model_id;
  t.mode = mode;
  switch (mode) {
    case RunMode::normal:
      t.normal = pipeline.run_normal(q);
      t.total_latency = t.normal->latency;
      break;
    case RunMode::sot:
      try {
        t.sot = pipeline.run_sot(q);
        t.total_latency = t.sot->sot_latency;
      } catch (const SotFallback& fb) {
        t.error = fb.what();
        t.overhead_calls.push_back(fb.skeleton_call());
        t.total_latency = fb.skeleton_call().latency;
      }
      break;
    case RunMode::sot_r: {
      // Routers may keep per-call state (the prompting router does).
      std::lock_guard lock(router_mu);
      SotRResult r = run_sot_r(q, pipeline, *router);
      t.decision = r.decision;
      t.overhead_calls = std::move(r.overhead_calls);
      t.total_latency = r.total_latency;
      if (r.used_sot()) {
        t.sot = std::get<SotAnswer>(std::move(r.answer));
      } else {
        t.normal = std::get<NormalAnswer>(std::move(r.answer));
      }
      break;
    }
  }
  return t;
}

}  // namespace

std::string_view to_string(RunMode mode) {
  switch (mode) {
    case RunMode::normal: return "normal";
    case RunMode::sot: return "sot";
    case RunMode::sot_r: return "sot-r";
  }
  return "normal";
}

RunMode parse_run_mode(std::string_view name) {
  if (name == "normal") return RunMode::normal;
  if (name == "sot") return RunMode::sot;
  if (name == "sot-r" || name == "sot_r") return RunMode::sot_r;
  throw ConfigError(fmt::format("unknown mode '{}'", name));
}

std::filesystem::path transcript_path(const std::filesystem::path& root,
                                      std::string_view question_id, RunMode mode) {
  return root / fmt::format("{}.{}.json", question_id, to_string(mode));
}

void write_transcript(const std::filesystem::path& path, const Transcript& t) {
  ordered_json j;
  j["question_id"] = t.question_id;
  j["model_id"] = t.model_id;
  j["mode"] = to_string(t.mode);
  if (t.decision) j["decision"] = to_json(*t.decision);
  if (t.normal) j["normal"] = to_json(*t.normal);
  if (t.sot) j["sot"] = to_json(*t.sot);
  ordered_json overhead = ordered_json::array();
  for (const auto& c : t.overhead_calls) overhead.push_back(to_json(c));
  j["overhead_calls"] = std::move(overhead);
  j["total_latency_s"] = to_seconds(t.total_latency);
  if (!t.error.empty()) j["error"] = t.error;
  // Write-then-rename so an interrupted bench never leaves a torn file to resume.
  auto tmp = path;
  tmp += ".tmp";
  write_json_file(tmp, j);
  std::filesystem::rename(tmp, path);
}

Transcript read_transcript(const std::filesystem::path& path) {
  auto j = read_json_file(path);
  try {
    Transcript t;
    t.question_id = j.at("question_id").get<std::string>();
    t.model_id = j.at("model_id").get<std::string>();
    t.mode = parse_run_mode(j.at("mode").get<std::string>());
    if (j.contains("decision")) t.decision = decision_from_json(j.at("decision"));
    if (j.contains("normal")) t.normal = normal_answer_from_json(j.at("normal"));
    if (j.contains("sot")) t.sot = sot_answer_from_json(j.at("sot"));
    for (const auto& c : j.at("overhead_calls")) {
      t.overhead_calls.push_back(call_from_json(c));
    }
    t.total_latency = from_seconds(j.at("total_latency_s").get<double>());
    t.error = j.value("error", std::string{});
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

SotLatencyEstimate estimate_record(const ProfilingTable& table,
                                   const SotAnswer& sot) {
  if (sot.expansions.empty()) {
    throw IntegrityError(fmt::format("question {}: no points to estimate",
                                     sot.question_id));
  }
  // Batched prefill pads to the longest input and decoding runs until the
  // longest output finishes.
  std::size_t point_input = 0, point_output = 0;
  for (const auto& e : sot.expansions) {
    point_input = std::max(point_input, e.prefill_tokens);
    point_output = std::max(point_output, e.decode_tokens);
  }
  return estimate_sot(table, std::max<std::size_t>(sot.tokens.stage1_prefill, 1),
                      sot.tokens.stage1_decode, std::max<std::size_t>(point_input, 1),
                      point_output, sot.expansions.size());
}

std::vector<std::pair<std::string, Report>> bench_reports(
    std::span<const RunRecord> records) {
  std::vector<std::pair<std::string, Report>> out;
  auto add = [&](std::string stem, auto&& build) {
    try {
      out.emplace_back(std::move(stem), build());
    } catch (const Error& e) {
      spdlog::warn("report {} skipped: {}", stem, e.what());
    }
  };
  add("length_stats", [&] { return length_stats(records, LengthMode::approximate); });
  add("token_overhead_per_call",
      [&] { return token_overhead(records, OverheadMode::per_call); });
  add("token_overhead_shared_prefix",
      [&] { return token_overhead(records, OverheadMode::shared_prefix); });
  add("speedup", [&] { return speedup_report(records); });
  return out;
}

BenchResult run_bench(std::span<const QuestionRecord> questions,
                      const Pipeline& pipeline, Router* router,
                      const BenchConfig& cfg) {
  if (cfg.out_dir.empty()) throw ConfigError("bench needs an output directory");
  const auto transcripts = cfg.out_dir / "transcripts";
  const auto reports = cfg.out_dir / "reports";
  std::filesystem::create_directories(transcripts);
  std::filesystem::create_directories(reports);

  std::vector<RunMode> modes = {RunMode::normal, RunMode::sot};
  if (router) modes.push_back(RunMode::sot_r);

  std::vector<Slot> slots(questions.size());
  std::mutex router_mu;
  auto process = [&](std::size_t i) {
    const QuestionRecord& q = questions[i];
    Slot& s = slots[i];
    s.record.question_id = q.id;
    s.record.model_id = pipeline.profile().model_id;
    s.record.category = q.category;
    for (RunMode mode : modes) {
      auto path = transcript_path(transcripts, q.id, mode);
      Transcript t;
      try {
        if (cfg.resume && std::filesystem::exists(path)) {
          t = read_transcript(path);
          ++s.resumed;
        } else {
          t = run_mode(q, pipeline, router, mode, router_mu);
          write_transcript(path, t);
        }
      } catch (const Error& e) {
        spdlog::error("question {} ({}): {}", q.id, to_string(mode), e.what());
        s.failures.push_back(fmt::format("{} [{}]: {}", q.id, to_string(mode), e.what()));
        continue;
      }
      switch (mode) {
        case RunMode::normal: s.record.normal = std::move(t.normal); break;
        case RunMode::sot: s.record.sot = std::move(t.sot); break;
        case RunMode::sot_r:
          s.record.sot_r_decision = t.decision;
          s.record.sot_r_latency = t.total_latency;
          break;
      }
    }
    if (cfg.table) {
      try {
        if (s.record.sot) s.record.estimates = estimate_record(*cfg.table, *s.record.sot);
        if (s.record.normal) {
          s.record.estimated_normal_ms =
              estimate_generation(*cfg.table,
                                  std::max<std::size_t>(s.record.normal->prefill_tokens, 1),
                                  s.record.normal->decode_tokens, 1)
                  .ms;
        }
      } catch (const Error& e) {
        s.failures.push_back(fmt::format("{} [estimate]: {}", q.id, e.what()));
      }
    }
  };

  const std::size_t workers =
      std::clamp<std::size_t>(cfg.concurrency, 1, std::max<std::size_t>(1, questions.size()));
  if (workers == 1) {
    for (std::size_t i = 0; i < questions.size(); ++i) process(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < questions.size(); i = next++) process(i);
      });
    }
  }

  BenchResult result;
  for (auto& s : slots) {
    result.records.push_back(std::move(s.record));
    for (auto& f : s.failures) result.failures.push_back(std::move(f));
    result.resumed += s.resumed;
  }
  for (const auto& [stem, report] : bench_reports(result.records)) {
    emit(report, ReportFormat::csv, reports / (stem + ".csv"));
    emit(report, ReportFormat::json, reports / (stem + ".json"));
  }
  return result;
}

}  // namespace sot
