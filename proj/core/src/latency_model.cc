#include "sot/latency_model.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <string>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "sot/error.h"

namespace sot {
namespace {

constexpr double kUnset = -1.0;

struct CsvRow {
  std::string phase;
  std::size_t batch = 0;
  std::size_t context = 0;
  double value = 0.0;
};

std::string trim(std::string s) {
  auto b = s.find_first_not_of(" \t\r");
  auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
}

std::vector<CsvRow> read_rows(std::istream& in, std::string_view value_column) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty table file");
  const std::string expected = fmt::format("phase,batch,context,{}", value_column);
  if (trim(line) != expected) {
    throw DataError(fmt::format("table header must be '{}', got '{}'", expected,
                                trim(line)));
  }
  std::vector<CsvRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t start = 0;
    for (;;) {
      auto comma = line.find(',', start);
      cells.push_back(trim(line.substr(start, comma - start)));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (cells.size() != 4) {
      throw DataError(fmt::format("line {}: expected 4 fields", line_no));
    }
    CsvRow r;
    r.phase = cells[0];
    auto parse_size = [&](const std::string& s, std::size_t& out) {
      auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
      if (ec != std::errc{} || p != s.data() + s.size()) {
        throw DataError(fmt::format("line {}: bad integer '{}'", line_no, s));
      }
    };
    parse_size(cells[1], r.batch);
    parse_size(cells[2], r.context);
    try {
      std::size_t used = 0;
      r.value = std::stod(cells[3], &used);
      if (used != cells[3].size()) throw std::invalid_argument(cells[3]);
    } catch (const std::exception&) {
      throw DataError(fmt::format("line {}: bad number '{}'", line_no, cells[3]));
    }
    if (!(r.value > 0.0) || !std::isfinite(r.value)) {
      throw DataError(fmt::format("line {}: value must be positive", line_no));
    }
    if (r.batch < 1 || r.context < 1) {
      throw DataError(fmt::format("line {}: batch and context start at 1", line_no));
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

std::ifstream open(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open {}", path.string()));
  return in;
}

void check_batch(const ProfilingTable& t, std::size_t batch) {
  if (batch < 1 || batch > t.max_batch()) {
    throw ConfigError(fmt::format("batch {} outside profiled range 1..{}", batch,
                                  t.max_batch()));
  }
}

Phase parse_phase(const std::string& s) {
  if (s == "prefill") return Phase::prefill;
  if (s == "decode") return Phase::decode;
  throw DataError(fmt::format("unknown phase '{}'", s));
}

}  // namespace

ProfilingTable::ProfilingTable(std::size_t max_batch, std::size_t max_context,
                               std::size_t max_prefill)
    : max_batch_(max_batch), max_context_(max_context), max_prefill_(max_prefill) {
  if (max_batch < 1 || max_context < 1 || max_prefill < 1) {
    throw DataError("profiling table ranges must be non-empty");
  }
  if (prefill_grid_key(max_prefill) != max_prefill) {
    throw DataError(fmt::format("max prefill {} is off the stride-10 grid",
                                max_prefill));
  }
  decode_.assign(max_batch * max_context, kUnset);
  prefill_.assign(max_batch * (max_prefill / 10 + 1), kUnset);
}

std::size_t ProfilingTable::decode_slot(std::size_t batch,
                                        std::size_t context) const {
  if (batch < 1 || batch > max_batch_ || context < 1 || context > max_context_) {
    throw DataError(fmt::format("decode key ({}, {}) out of range", batch, context));
  }
  return (batch - 1) * max_context_ + (context - 1);
}

std::size_t ProfilingTable::prefill_slot(std::size_t batch,
                                         std::size_t grid_key) const {
  if (batch < 1 || batch > max_batch_ || grid_key < 1 || grid_key > max_prefill_ ||
      prefill_grid_key(grid_key) != grid_key) {
    throw DataError(fmt::format("prefill key ({}, {}) not on the profiled grid",
                                batch, grid_key));
  }
  return (batch - 1) * (max_prefill_ / 10 + 1) + grid_key / 10;
}

void ProfilingTable::set_decode(std::size_t batch, std::size_t context, double ms) {
  if (!(ms > 0.0)) throw DataError("latency must be positive");
  decode_[decode_slot(batch, context)] = ms;
}

void ProfilingTable::set_prefill(std::size_t batch, std::size_t grid_key,
                                 double ms) {
  if (!(ms > 0.0)) throw DataError("latency must be positive");
  prefill_[prefill_slot(batch, grid_key)] = ms;
}

double ProfilingTable::decode(std::size_t batch, std::size_t context) const {
  double v = decode_[decode_slot(batch, context)];
  if (v == kUnset) {
    throw DataError(fmt::format("decode ({}, {}) not profiled", batch, context));
  }
  return v;
}

double ProfilingTable::prefill(std::size_t batch, std::size_t grid_key) const {
  double v = prefill_[prefill_slot(batch, grid_key)];
  if (v == kUnset) {
    throw DataError(fmt::format("prefill ({}, {}) not profiled", batch, grid_key));
  }
  return v;
}

ProfilingTable ProfilingTable::flat(std::size_t max_batch, std::size_t max_context,
                                    std::size_t max_prefill, double prefill_ms,
                                    double decode_ms) {
  ProfilingTable t(max_batch, max_context, max_prefill);
  std::fill(t.decode_.begin(), t.decode_.end(), decode_ms);
  std::fill(t.prefill_.begin(), t.prefill_.end(), prefill_ms);
  if (!(prefill_ms > 0.0) || !(decode_ms > 0.0)) {
    throw DataError("latency must be positive");
  }
  return t;
}

ProfilingTable ProfilingTable::parse_csv(std::istream& in) {
  auto rows = read_rows(in, "latency_ms");
  std::size_t max_batch = 0, max_context = 0, max_prefill = 0;
  for (const auto& r : rows) {
    max_batch = std::max(max_batch, r.batch);
    if (r.phase == "decode") {
      max_context = std::max(max_context, r.context);
    } else if (r.phase == "prefill") {
      if (prefill_grid_key(r.context) != r.context) {
        throw DataError(fmt::format(
            "prefill length {} is off the stride-10 grid 1, 11, 21, ...",
            r.context));
      }
      max_prefill = std::max(max_prefill, r.context);
    } else {
      throw DataError(fmt::format("unknown phase '{}'", r.phase));
    }
  }
  if (max_context == 0 || max_prefill == 0) {
    throw DataError("table needs both prefill and decode rows");
  }
  ProfilingTable t(max_batch, max_context, max_prefill);
  for (const auto& r : rows) {
    std::vector<double>& store = r.phase == "decode" ? t.decode_ : t.prefill_;
    std::size_t slot = r.phase == "decode" ? t.decode_slot(r.batch, r.context)
                                           : t.prefill_slot(r.batch, r.context);
    if (store[slot] != kUnset) {
      throw DataError(fmt::format("duplicate {} row ({}, {})", r.phase, r.batch,
                                  r.context));
    }
    store[slot] = r.value;
  }
  for (std::size_t b = 1; b <= max_batch; ++b) {
    for (std::size_t k = 1; k <= max_context; ++k) {
      if (t.decode_[t.decode_slot(b, k)] == kUnset) {
        throw DataError(fmt::format("decode table missing ({}, {})", b, k));
      }
    }
    for (std::size_t l = 1; l <= max_prefill; l += 10) {
      if (t.prefill_[t.prefill_slot(b, l)] == kUnset) {
        throw DataError(fmt::format("prefill table missing ({}, {})", b, l));
      }
    }
  }
  return t;
}

ProfilingTable ProfilingTable::load_csv(const std::filesystem::path& path) {
  auto in = open(path);
  try {
    return parse_csv(in);
  } catch (const DataError& e) {
    throw DataError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

void ProfilingTable::write_csv(std::ostream& out) const {
  out << "phase,batch,context,latency_ms\n";
  for (std::size_t b = 1; b <= max_batch_; ++b) {
    for (std::size_t l = 1; l <= max_prefill_; l += 10) {
      out << fmt::format("prefill,{},{},{}\n", b, l, prefill(b, l));
    }
    for (std::size_t k = 1; k <= max_context_; ++k) {
      out << fmt::format("decode,{},{},{}\n", b, k, decode(b, k));
    }
  }
}

LatencyLookup prefill_lookup(const ProfilingTable& table, std::size_t batch,
                             std::size_t input_tokens) {
  check_batch(table, batch);
  if (input_tokens < 1) throw ConfigError("prefill length must be >= 1");
  std::size_t key = prefill_grid_key(input_tokens);
  LatencyLookup out;
  if (key > table.max_prefill()) {
    spdlog::warn("prefill length {} beyond profiled {}; clamped", input_tokens,
                 table.max_prefill());
    key = table.max_prefill();
    out.clamped = true;
  }
  out.ms = table.prefill(batch, key);
  return out;
}

LatencyLookup estimate_generation(const ProfilingTable& table,
                                  std::size_t input_tokens,
                                  std::size_t output_tokens, std::size_t batch) {
  LatencyLookup out = prefill_lookup(table, batch, input_tokens);
  bool decode_clamped = false;
  for (std::size_t k = input_tokens; k < input_tokens + output_tokens; ++k) {
    std::size_t ctx = k;
    if (ctx > table.max_context()) {
      ctx = table.max_context();
      decode_clamped = true;
    }
    out.ms += table.decode(batch, ctx);
  }
  if (decode_clamped) {
    spdlog::warn("decode context up to {} beyond profiled {}; clamped",
                 input_tokens + output_tokens - 1, table.max_context());
    out.clamped = true;
  }
  return out;
}

SotLatencyEstimate estimate_sot(const ProfilingTable& table,
                                std::size_t skeleton_input,
                                std::size_t skeleton_output,
                                std::size_t point_input,
                                std::size_t point_output, std::size_t batch) {
  if (batch < 1) throw ConfigError("point count must be >= 1");
  check_batch(table, batch);
  auto s = estimate_generation(table, skeleton_input, skeleton_output, 1);
  auto p = estimate_generation(table, point_input, point_output, batch);
  SotLatencyEstimate e;
  e.skeleton_ms = s.ms;
  e.point_ms = p.ms;
  e.total_ms = s.ms + p.ms;
  e.skeleton_input = skeleton_input;
  e.skeleton_output = skeleton_output;
  e.point_input = point_input;
  e.point_output = point_output;
  e.batch = batch;
  e.clamped = s.clamped || p.clamped;
  return e;
}

double speedup(double normal_latency, double sot_latency) {
  if (!(normal_latency > 0.0) || !(sot_latency > 0.0)) {
    throw ConfigError(fmt::format("speed-up needs positive latencies, got {} / {}",
                                  normal_latency, sot_latency));
  }
  return normal_latency / sot_latency;
}

FlopsTable FlopsTable::parse_csv(std::istream& in) {
  FlopsTable t;
  for (const auto& r : read_rows(in, "flops_per_token")) {
    if (r.phase != "decode") {
      throw DataError(fmt::format("flops table only holds decode rows, got '{}'",
                                  r.phase));
    }
    if (!t.flops_.emplace(std::pair{r.batch, r.context}, r.value).second) {
      throw DataError(fmt::format("duplicate flops row ({}, {})", r.batch, r.context));
    }
  }
  return t;
}

FlopsTable FlopsTable::load_csv(const std::filesystem::path& path) {
  auto in = open(path);
  return parse_csv(in);
}

void FlopsTable::set(std::size_t batch, std::size_t context, double flops) {
  if (!(flops > 0.0)) throw DataError("flops must be positive");
  flops_[{batch, context}] = flops;
}

double FlopsTable::at(std::size_t batch, std::size_t context) const {
  auto it = flops_.find({batch, context});
  if (it == flops_.end()) {
    throw DataError(fmt::format("flops ({}, {}) not profiled", batch, context));
  }
  return it->second;
}

double avg_decode_flops(const FlopsTable& flops, const ProfilingTable& table,
                        std::size_t input_tokens, std::size_t output_tokens,
                        std::size_t batch) {
  check_batch(table, batch);
  if (output_tokens == 0) throw ConfigError("no decoding steps to average");
  double total_flops = 0.0;
  double total_ms = 0.0;
  for (std::size_t k = input_tokens; k < input_tokens + output_tokens; ++k) {
    total_flops += flops.at(batch, k);
    total_ms += table.decode(batch, k);
  }
  return total_flops / (total_ms / 1000.0);
}

MemoryTable MemoryTable::parse_csv(std::istream& in) {
  MemoryTable t;
  for (const auto& r : read_rows(in, "mem_mb")) {
    if (!t.mb_.emplace(std::tuple{parse_phase(r.phase), r.batch, r.context}, r.value)
             .second) {
      throw DataError(fmt::format("duplicate memory row {} ({}, {})", r.phase,
                                  r.batch, r.context));
    }
  }
  return t;
}

MemoryTable MemoryTable::load_csv(const std::filesystem::path& path) {
  auto in = open(path);
  return parse_csv(in);
}

void MemoryTable::set(Phase phase, std::size_t batch, std::size_t length,
                      double mb) {
  if (!(mb > 0.0)) throw DataError("memory must be positive");
  mb_[{phase, batch, length}] = mb;
}

double MemoryTable::at(Phase phase, std::size_t batch, std::size_t length) const {
  auto it = mb_.find({phase, batch, length});
  if (it == mb_.end()) {
    throw DataError(fmt::format("memory ({}, {}, {}) not profiled",
                                phase == Phase::prefill ? "prefill" : "decode",
                                batch, length));
  }
  return it->second;
}

double peak_memory(const MemoryTable& table, const StageDescriptor& skeleton,
                   const StageDescriptor& point) {
  auto stage_peak = [&](const StageDescriptor& s) {
    return std::max(table.at(Phase::prefill, s.batch, s.prefill_length),
                    table.at(Phase::decode, s.batch, s.decode_context));
  };
  return std::max(stage_peak(skeleton), stage_peak(point));
}

}  // namespace sot
