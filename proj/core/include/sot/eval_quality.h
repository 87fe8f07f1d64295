#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sot/backend.h"
#include "sot/datasets.h"
#include "sot/prompt_kit.h"

namespace sot {

// Judge score from SoT's point of view.
enum class PairScore : int { lose = -1, tie = 0, win = 1 };

enum class Outcome { win, tie, lose };

std::string_view to_string(Outcome outcome);
Outcome parse_outcome(std::string_view name);
PairScore parse_pair_score(int value);

// A judge prompt with "{question}", "{answer_1}" and "{answer_2}"
// placeholders. The reply is classified by whichever marker occurs first.
struct JudgeTemplate {
  std::string metric;
  std::string prompt;
  // Category-specific prompt text (e.g. coding, math) replacing `prompt`.
  std::map<std::string, std::string> category_prompts;
  // Categories this metric is not applied to.
  std::set<std::string> excluded_categories;
  std::string first_marker = "[[A]]";
  std::string second_marker = "[[B]]";
  std::string tie_marker = "[[C]]";

  bool applies_to(std::string_view category) const;
  std::string render(const QuestionRecord& q, std::string_view first,
                     std::string_view second) const;
};

struct JudgeConfig {
  std::vector<JudgeTemplate> metrics;
  GenerationParams generation;

  // {"temperature"?, "max_new_tokens"?, "metrics": [ {...}, ... ]}
  static JudgeConfig parse(std::string_view json_text);
  static JudgeConfig load(const std::filesystem::path& path);
};

void validate(const JudgeConfig& cfg);

enum class Verdict { first, second, tie };

struct JudgeVerdict {
  Verdict verdict = Verdict::tie;
  bool parse_failed = false;
  std::string raw;
};

// No marker found means a tie with parse_failed set.
JudgeVerdict parse_verdict(const JudgeTemplate& tmpl, std::string_view reply);

JudgeVerdict judge_once(const JudgeTemplate& tmpl, Backend& judge,
                        const QuestionRecord& q, std::string_view answer_first,
                        std::string_view answer_second,
                        const GenerationParams& generation = {});

PairScore score_for_sot(Verdict verdict, bool sot_was_first);

// win / tie / lose by the sign of s1 + s2.
Outcome combine_order_swapped(PairScore s1, PairScore s2);

struct PairOutcome {
  std::string question_id;
  std::string metric;
  std::string model;
  std::string category;
  Outcome outcome = Outcome::tie;
  PairScore score_ab = PairScore::tie;  // SoT shown first
  PairScore score_ba = PairScore::tie;  // SoT shown second
  bool parse_failure = false;

  friend bool operator==(const PairOutcome&, const PairOutcome&) = default;
};

// Judges (sot, normal) then (normal, sot) and combines.
PairOutcome evaluate_pair(const JudgeTemplate& tmpl, Backend& judge,
                          const QuestionRecord& q, std::string_view model,
                          std::string_view sot_answer,
                          std::string_view normal_answer,
                          const GenerationParams& generation = {});

// (#win - #lose) / total. Throws ConfigError on an empty list.
double net_win_rate(std::span<const Outcome> outcomes);
double net_win_rate(std::span<const PairOutcome> outcomes);

enum class GroupKey { model, category, metric };

GroupKey parse_group_key(std::string_view name);
std::string_view to_string(GroupKey key);

struct WinRateRow {
  std::string group;
  std::size_t wins = 0;
  std::size_t ties = 0;
  std::size_t losses = 0;
  double net_win_rate = 0.0;

  std::size_t total() const { return wins + ties + losses; }
};

// Rows sorted by group name.
std::vector<WinRateRow> winrate_breakdown(std::span<const PairOutcome> outcomes,
                                          GroupKey key);

// JSONL {question_id, metric, model, category, outcome, score_ab, score_ba}.
void write_outcomes(std::ostream& out, std::span<const PairOutcome> outcomes);
std::vector<PairOutcome> parse_outcomes(std::istream& in);
std::vector<PairOutcome> load_outcomes(const std::filesystem::path& path);

}  // namespace sot
