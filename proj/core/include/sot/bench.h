#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sot/datasets.h"
#include "sot/expansion.h"
#include "sot/latency_model.h"
#include "sot/reports.h"
#include "sot/router.h"

namespace sot {

enum class RunMode { normal, sot, sot_r };

std::string_view to_string(RunMode mode);
RunMode parse_run_mode(std::string_view name);

// <root>/<question id>.<mode>.json
std::filesystem::path transcript_path(const std::filesystem::path& root,
                                      std::string_view question_id,
                                      RunMode mode);

// One document per question per mode. Holds the answer plus, for sot-r, the
// router decision and the overhead calls.
struct Transcript {
  std::string question_id;
  std::string model_id;
  RunMode mode = RunMode::normal;
  std::optional<NormalAnswer> normal;
  std::optional<SotAnswer> sot;
  std::optional<RouterDecision> decision;
  std::vector<CallRecord> overhead_calls;
  Duration total_latency{};
  // Set when the SoT pipeline could not run and the error was recorded.
  std::string error;
};

void write_transcript(const std::filesystem::path& path, const Transcript& t);
Transcript read_transcript(const std::filesystem::path& path);

struct BenchConfig {
  std::filesystem::path out_dir;
  std::size_t concurrency = 1;  // questions in flight
  bool resume = true;           // reuse transcripts already on disk
  std::optional<std::uint64_t> seed;
  // When a table is given, records also carry analytical estimates.
  const ProfilingTable* table = nullptr;
};

struct BenchResult {
  std::vector<RunRecord> records;  // dataset order
  // "<id>: <message>" per question-level failure; the bench carried on.
  std::vector<std::string> failures;
  std::size_t resumed = 0;
};

// Runs normal, SoT and, when a router is supplied, SoT-R for each question, writing
// transcripts under out_dir/transcripts and reports under out_dir/reports.
BenchResult run_bench(std::span<const QuestionRecord> questions,
                      const Pipeline& pipeline, Router* router,
                      const BenchConfig& cfg);

// Reports written by run_bench, by file stem.
std::vector<std::pair<std::string, Report>> bench_reports(
    std::span<const RunRecord> records);

// Builds the estimate for one record from its token counts.
SotLatencyEstimate estimate_record(const ProfilingTable& table,
                                   const SotAnswer& sot);

}  // namespace sot
