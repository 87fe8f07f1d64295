#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <tuple>
#include <vector>

namespace sot {

// floor(l / 10) * 10 + 1: prefill latency is only profiled on this grid.
constexpr std::size_t prefill_grid_key(std::size_t input_tokens) {
  return input_tokens / 10 * 10 + 1;
}

// A lookup result; `clamped` marks contexts beyond the profiled range that
// were answered with the last profiled entry.
struct LatencyLookup {
  double ms = 0.0;
  bool clamped = false;
};

// Measured latencies in milliseconds:
//   decode(B, k):  one decoding step at batch B with context length k,
//                  dense over B in [1, max_batch], k in [1, max_context];
//   prefill(B, l): prefilling l tokens at batch B, l on the stride-10 grid
//                  1, 11, ..., max_prefill.
class ProfilingTable {
 public:
  ProfilingTable(std::size_t max_batch, std::size_t max_context,
                 std::size_t max_prefill);

  // CSV with header "phase,batch,context,latency_ms"; phase is prefill or
  // decode. Throws DataError on gaps, duplicates, off-grid prefill keys or
  // non-positive latencies.
  static ProfilingTable parse_csv(std::istream& in);
  static ProfilingTable load_csv(const std::filesystem::path& path);
  // Every entry set to one value; handy for closed-form checks.
  static ProfilingTable flat(std::size_t max_batch, std::size_t max_context,
                             std::size_t max_prefill, double prefill_ms,
                             double decode_ms);

  void set_decode(std::size_t batch, std::size_t context, double ms);
  void set_prefill(std::size_t batch, std::size_t grid_key, double ms);

  double decode(std::size_t batch, std::size_t context) const;
  double prefill(std::size_t batch, std::size_t grid_key) const;

  std::size_t max_batch() const { return max_batch_; }
  std::size_t max_context() const { return max_context_; }
  std::size_t max_prefill() const { return max_prefill_; }

  void write_csv(std::ostream& out) const;

 private:
  std::size_t decode_slot(std::size_t batch, std::size_t context) const;
  std::size_t prefill_slot(std::size_t batch, std::size_t grid_key) const;

  std::size_t max_batch_;
  std::size_t max_context_;
  std::size_t max_prefill_;
  std::vector<double> decode_;
  std::vector<double> prefill_;
};

// Throws ConfigError when batch is outside [1, max_batch] or input is 0.
LatencyLookup prefill_lookup(const ProfilingTable& table, std::size_t batch,
                             std::size_t input_tokens);

// T(l_i, l_o, B) = prefill~(l_i) + sum_{k=l_i}^{l_i+l_o-1} decode(B, k)
LatencyLookup estimate_generation(const ProfilingTable& table,
                                  std::size_t input_tokens,
                                  std::size_t output_tokens, std::size_t batch);

struct SotLatencyEstimate {
  double skeleton_ms = 0.0;  // T(li_s, lo_s, 1)
  double point_ms = 0.0;     // T(li_pe, lo_pe, B), longest point request
  double total_ms = 0.0;
  std::size_t skeleton_input = 0;
  std::size_t skeleton_output = 0;
  std::size_t point_input = 0;
  std::size_t point_output = 0;
  std::size_t batch = 0;
  bool clamped = false;
};

SotLatencyEstimate estimate_sot(const ProfilingTable& table,
                                std::size_t skeleton_input,
                                std::size_t skeleton_output,
                                std::size_t point_input,
                                std::size_t point_output, std::size_t batch);

// normal / sot. Throws ConfigError unless both are positive.
double speedup(double normal_latency, double sot_latency);

// FLOPs of one decoding step at (batch, context).
class FlopsTable {
 public:
  // CSV "phase,batch,context,flops_per_token" (phase must be decode).
  static FlopsTable parse_csv(std::istream& in);
  static FlopsTable load_csv(const std::filesystem::path& path);

  void set(std::size_t batch, std::size_t context, double flops);
  // Throws DataError on a missing key.
  double at(std::size_t batch, std::size_t context) const;

 private:
  std::map<std::pair<std::size_t, std::size_t>, double> flops_;
};

// P^D = sum f(B, k) / sum t(B, k) over k in [l_i, l_i + l_o), in FLOPs per
// second. Requires exact coverage by both tables.
double avg_decode_flops(const FlopsTable& flops, const ProfilingTable& table,
                        std::size_t input_tokens, std::size_t output_tokens,
                        std::size_t batch);

enum class Phase { prefill, decode };

// Peak memory (MB) observed per (phase, batch, length).
class MemoryTable {
 public:
  // CSV "phase,batch,context,mem_mb".
  static MemoryTable parse_csv(std::istream& in);
  static MemoryTable load_csv(const std::filesystem::path& path);

  void set(Phase phase, std::size_t batch, std::size_t length, double mb);
  // Throws DataError on a missing key.
  double at(Phase phase, std::size_t batch, std::size_t length) const;

 private:
  std::map<std::tuple<Phase, std::size_t, std::size_t>, double> mb_;
};

struct StageDescriptor {
  std::size_t batch = 1;
  std::size_t prefill_length = 1;  // looked up exactly as given
  std::size_t decode_context = 1;
};

// max over both stages of max(prefill entry, decode entry).
double peak_memory(const MemoryTable& table, const StageDescriptor& skeleton,
                   const StageDescriptor& point);

}  // namespace sot
