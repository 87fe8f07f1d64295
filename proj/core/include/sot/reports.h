#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "sot/eval_quality.h"
#include "sot/expansion.h"
#include "sot/latency_model.h"
#include "sot/router.h"

namespace sot {

struct RunRecord {
  std::string question_id;
  std::string model_id;
  std::string category;
  std::optional<NormalAnswer> normal;
  std::optional<SotAnswer> sot;
  std::optional<RouterDecision> sot_r_decision;
  // End-to-end SoT-R latency including the router and any wasted skeleton.
  std::optional<Duration> sot_r_latency;
  std::optional<SotLatencyEstimate> estimates;
  std::optional<double> estimated_normal_ms;
};

using Cell = std::variant<std::string, std::int64_t, double>;

// A rectangular table with a fixed column order.
struct Report {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  friend bool operator==(const Report&, const Report&) = default;
};

// Two-pass population standard deviation; 0 for fewer than two values.
double population_stddev(std::span<const double> values);

// How lengths are measured: approximate counts of the answer texts, or the
// backend's reported decode tokens. Usage mode rejects approximate records.
enum class LengthMode { approximate, usage };

// Per (model, category): point count B, longest point, point-length standard
// deviation, final/normal and longest-point/normal length ratios, each the
// arithmetic mean over the group's records.
Report length_stats(std::span<const RunRecord> records, LengthMode mode);

enum class OverheadMode { per_call, shared_prefix };

// SoT prefill tokens over normal prefill tokens for one record.
//   per_call:      stage1 + sum of point prefills
//   shared_prefix: stage1 + P + sum(point_b - P), P the common point prefix
double token_overhead_ratio(const RunRecord& record, OverheadMode mode);
// Per model: mean ratio over records. Throws IntegrityError when records mix
// approximate and reported token counts.
Report token_overhead(std::span<const RunRecord> records, OverheadMode mode);

// Per model and per category: mean of per-record normal/SoT speed-ups, and
// normal/SoT-R when router decisions are present. Measured latencies win over
// estimated ones; the source column says which fed the row.
Report speedup_report(std::span<const RunRecord> records);

Report winrate_report(std::span<const PairOutcome> outcomes, GroupKey key);

Report confusion_report(const ConfusionMatrix& m);

enum class ReportFormat { csv, json };

ReportFormat parse_report_format(std::string_view name);
std::string render(const Report& report, ReportFormat format);
Report parse_report_json(std::string_view text);
// Throws ConfigError when the file cannot be written.
void emit(const Report& report, ReportFormat format,
          const std::filesystem::path& path);

}  // namespace sot
