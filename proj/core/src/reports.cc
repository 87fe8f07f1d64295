#include "sot/reports.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "sot/error.h"
#include "sot/tokens.h"

namespace sot {
namespace {

using nlohmann::ordered_json;

double mean(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

Cell mean_or_blank(const std::vector<double>& v) {
  if (v.empty()) return std::string{};
  return mean(v);
}

std::string csv_field(const Cell& cell) {
  if (const auto* i = std::get_if<std::int64_t>(&cell)) return fmt::format("{}", *i);
  if (const auto* d = std::get_if<double>(&cell)) return fmt::format("{}", *d);
  const auto& s = std::get<std::string>(cell);
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::int64_t count(std::size_t n) { return static_cast<std::int64_t>(n); }

struct Lengths {
  std::vector<double> points;
  double final_len = 0.0;
  double normal_len = 0.0;
};

Lengths measure(const RunRecord& r, LengthMode mode) {
  Lengths l;
  if (mode == LengthMode::usage) {
    if (r.sot->usage_approximate || r.normal->usage_approximate) {
      throw IntegrityError(fmt::format(
          "question {}: usage-mode length stats over estimated token counts",
          r.question_id));
    }
    for (const auto& e : r.sot->expansions) {
      l.points.push_back(static_cast<double>(e.decode_tokens));
    }
    l.final_len = static_cast<double>(r.sot->tokens.stage1_decode +
                                      r.sot->tokens.stage2_decode);
    l.normal_len = static_cast<double>(r.normal->decode_tokens);
  } else {
    for (const auto& e : r.sot->expansions) {
      l.points.push_back(static_cast<double>(approximate_token_count(e.text)));
    }
    l.final_len = static_cast<double>(approximate_token_count(r.sot->final_text));
    l.normal_len = static_cast<double>(approximate_token_count(r.normal->text));
  }
  return l;
}

// Seconds; measured values take precedence over the analytical estimate.
std::optional<double> normal_seconds(const RunRecord& r, bool& estimated) {
  if (r.normal) return to_seconds(r.normal->latency);
  if (r.estimated_normal_ms) {
    estimated = true;
    return *r.estimated_normal_ms / 1000.0;
  }
  return std::nullopt;
}

std::optional<double> sot_seconds(const RunRecord& r, bool& estimated) {
  if (r.sot) return to_seconds(r.sot->sot_latency);
  if (r.estimates) {
    estimated = true;
    return r.estimates->total_ms / 1000.0;
  }
  return std::nullopt;
}

}  // namespace

double population_stddev(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  const double m = mean(values);
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(values.size()));
}

Report length_stats(std::span<const RunRecord> records, LengthMode mode) {
  struct Acc {
    std::vector<double> b, max_len, std_len, final_ratio, max_ratio;
  };
  std::map<std::pair<std::string, std::string>, Acc> groups;
  for (const auto& r : records) {
    if (!r.sot || !r.normal) continue;
    Lengths l = measure(r, mode);
    if (l.points.empty()) continue;
    if (l.normal_len <= 0.0) {
      spdlog::warn("question {}: empty normal answer; left out of length stats",
                   r.question_id);
      continue;
    }
    Acc& a = groups[{r.model_id, r.category}];
    double longest = *std::max_element(l.points.begin(), l.points.end());
    a.b.push_back(static_cast<double>(l.points.size()));
    a.max_len.push_back(longest);
    a.std_len.push_back(population_stddev(l.points));
    a.final_ratio.push_back(l.final_len / l.normal_len);
    a.max_ratio.push_back(longest / l.normal_len);
  }
  Report rep;
  rep.name = "length_stats";
  rep.columns = {"model",           "category",       "records",
                 "token_mode",      "mean_points",    "mean_max_point_len",
                 "mean_point_len_std", "mean_final_over_normal",
                 "mean_max_point_over_normal"};
  const std::string token_mode = mode == LengthMode::usage ? "usage" : "approximate";
  for (const auto& [key, a] : groups) {
    rep.rows.push_back({key.first, key.second, count(a.b.size()), token_mode,
                        mean(a.b), mean(a.max_len), mean(a.std_len),
                        mean(a.final_ratio), mean(a.max_ratio)});
  }
  return rep;
}

double token_overhead_ratio(const RunRecord& r, OverheadMode mode) {
  if (!r.sot || !r.normal) {
    throw IntegrityError(fmt::format(
        "question {}: token overhead needs both normal and SoT runs", r.question_id));
  }
  if (r.normal->prefill_tokens == 0) {
    throw IntegrityError(fmt::format("question {}: normal prefill is zero",
                                     r.question_id));
  }
  const auto& t = r.sot->tokens;
  double sot_prefill = static_cast<double>(t.stage1_prefill + t.stage2_prefill);
  if (mode == OverheadMode::shared_prefix && !r.sot->expansions.empty()) {
    std::size_t shared = r.sot->point_prompt_prefix_tokens;
    for (const auto& e : r.sot->expansions) shared = std::min(shared, e.prefill_tokens);
    sot_prefill -= static_cast<double>((r.sot->expansions.size() - 1) * shared);
  }
  return sot_prefill / static_cast<double>(r.normal->prefill_tokens);
}

Report token_overhead(std::span<const RunRecord> records, OverheadMode mode) {
  std::optional<bool> approximate;
  std::map<std::string, std::vector<double>> groups;
  for (const auto& r : records) {
    if (!r.sot || !r.normal) continue;
    bool approx = r.sot->usage_approximate || r.normal->usage_approximate;
    if (approx != (r.sot->usage_approximate && r.normal->usage_approximate)) {
      throw IntegrityError(fmt::format(
          "question {}: normal and SoT token counts come from different modes",
          r.question_id));
    }
    if (approximate && *approximate != approx) {
      throw IntegrityError("token overhead table mixes approximate and reported counts");
    }
    approximate = approx;
    groups[r.model_id].push_back(token_overhead_ratio(r, mode));
  }
  Report rep;
  rep.name = "token_overhead";
  rep.columns = {"model", "records", "accounting", "token_mode", "mean_ratio"};
  const std::string accounting =
      mode == OverheadMode::per_call ? "per-call" : "shared-prefix";
  const std::string token_mode = approximate.value_or(false) ? "approximate" : "usage";
  for (const auto& [model, ratios] : groups) {
    rep.rows.push_back(
        {model, count(ratios.size()), accounting, token_mode, mean(ratios)});
  }
  return rep;
}

Report speedup_report(std::span<const RunRecord> records) {
  struct Acc {
    std::size_t records = 0;
    bool measured = false;
    bool estimated = false;
    std::vector<double> sot, sot_r;
  };
  std::map<std::string, Acc> by_model, by_category;
  for (const auto& r : records) {
    bool normal_est = false;
    auto normal = normal_seconds(r, normal_est);
    if (!normal) {
      spdlog::warn("question {}: no normal latency; left out of speed-ups",
                   r.question_id);
      continue;
    }
    bool sot_est = false;
    auto sot = sot_seconds(r, sot_est);
    for (Acc* a : {&by_model[r.model_id], &by_category[r.category]}) {
      ++a->records;
      if (sot) {
        a->sot.push_back(speedup(*normal, *sot));
        (normal_est || sot_est ? a->estimated : a->measured) = true;
      }
      if (r.sot_r_latency) {
        a->sot_r.push_back(speedup(*normal, to_seconds(*r.sot_r_latency)));
        (normal_est ? a->estimated : a->measured) = true;
      }
    }
  }
  Report rep;
  rep.name = "speedup";
  rep.columns = {"group_by",     "group",           "records",
                 "latency_source", "sot_records",   "mean_speedup_sot",
                 "sot_r_records",  "mean_speedup_sot_r"};
  auto emit_rows = [&](const char* group_by, const std::map<std::string, Acc>& g) {
    for (const auto& [name, a] : g) {
      std::string source = a.measured && a.estimated ? "mixed"
                           : a.estimated             ? "estimated"
                                                     : "measured";
      rep.rows.push_back({std::string(group_by), name, count(a.records), source,
                          count(a.sot.size()), mean_or_blank(a.sot),
                          count(a.sot_r.size()), mean_or_blank(a.sot_r)});
    }
  };
  emit_rows("model", by_model);
  emit_rows("category", by_category);
  return rep;
}

Report winrate_report(std::span<const PairOutcome> outcomes, GroupKey key) {
  Report rep;
  rep.name = fmt::format("winrate_by_{}", to_string(key));
  rep.columns = {std::string(to_string(key)), "wins", "ties", "losses", "total",
                 "net_win_rate"};
  for (const auto& row : winrate_breakdown(outcomes, key)) {
    rep.rows.push_back({row.group, count(row.wins), count(row.ties),
                        count(row.losses), count(row.total()), row.net_win_rate});
  }
  return rep;
}

Report confusion_report(const ConfusionMatrix& m) {
  Report rep;
  rep.name = "router_confusion";
  rep.columns = {"reference", "candidate_sot", "candidate_normal", "total"};
  rep.rows.push_back({std::string("sot"), count(m.tp), count(m.fn), count(m.tp + m.fn)});
  rep.rows.push_back(
      {std::string("normal"), count(m.fp), count(m.tn), count(m.fp + m.tn)});
  return rep;
}

ReportFormat parse_report_format(std::string_view name) {
  if (name == "csv") return ReportFormat::csv;
  if (name == "json") return ReportFormat::json;
  throw ConfigError(fmt::format("unknown report format '{}'", name));
}

std::string render(const Report& report, ReportFormat format) {
  if (format == ReportFormat::csv) {
    std::string out;
    for (std::size_t i = 0; i < report.columns.size(); ++i) {
      if (i) out += ',';
      out += csv_field(report.columns[i]);
    }
    out += '\n';
    for (const auto& row : report.rows) {
      for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) out += ',';
        out += csv_field(row[i]);
      }
      out += '\n';
    }
    return out;
  }
  ordered_json rows = ordered_json::array();
  for (const auto& row : report.rows) {
    ordered_json r = ordered_json::array();
    for (const auto& cell : row) {
      std::visit([&](const auto& v) { r.push_back(v); }, cell);
    }
    rows.push_back(std::move(r));
  }
  ordered_json j;
  j["name"] = report.name;
  j["columns"] = report.columns;
  j["rows"] = std::move(rows);
  return j.dump(2) + "\n";
}

Report parse_report_json(std::string_view text) {
  Report rep;
  try {
    auto j = ordered_json::parse(text);
    rep.name = j.at("name").get<std::string>();
    rep.columns = j.at("columns").get<std::vector<std::string>>();
    for (const auto& row : j.at("rows")) {
      std::vector<Cell> cells;
      for (const auto& c : row) {
        if (c.is_string()) {
          cells.emplace_back(c.get<std::string>());
        } else if (c.is_number_integer()) {
          cells.emplace_back(c.get<std::int64_t>());
        } else if (c.is_number_float()) {
          cells.emplace_back(c.get<double>());
        } else {
          throw DataError("report cells are strings or numbers");
        }
      }
      if (cells.size() != rep.columns.size()) {
        throw DataError(fmt::format("row has {} cells for {} columns", cells.size(),
                                    rep.columns.size()));
      }
      rep.rows.push_back(std::move(cells));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(fmt::format("report: {}", e.what()));
  }
  return rep;
}

void emit(const Report& report, ReportFormat format,
          const std::filesystem::path& path) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError(fmt::format("cannot write report {}", path.string()));
  out << render(report, format);
  if (!out) throw ConfigError(fmt::format("write to {} failed", path.string()));
}

}  // namespace sot
