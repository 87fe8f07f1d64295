#include "sot/eval_quality.h"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "sot/error.h"
#include "sot/tokens.h"

namespace sot {
namespace {

using nlohmann::ordered_json;

std::string substitute(std::string_view tmpl, const QuestionRecord& q,
                       std::string_view first, std::string_view second) {
  std::string out;
  out.reserve(tmpl.size() + q.text.size() + first.size() + second.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      auto close = tmpl.find('}', i);
      if (close != std::string_view::npos) {
        auto name = tmpl.substr(i + 1, close - i - 1);
        if (name == "question") {
          out += q.text;
          i = close + 1;
          continue;
        }
        if (name == "answer_1") {
          out += first;
          i = close + 1;
          continue;
        }
        if (name == "answer_2") {
          out += second;
          i = close + 1;
          continue;
        }
      }
    }
    out += tmpl[i++];
  }
  return out;
}

JudgeTemplate parse_metric(const ordered_json& j) {
  JudgeTemplate t;
  t.metric = j.at("metric").get<std::string>();
  t.prompt = j.at("prompt").get<std::string>();
  if (auto it = j.find("category_prompts"); it != j.end()) {
    for (const auto& [k, v] : it->items()) t.category_prompts[k] = v.get<std::string>();
  }
  if (auto it = j.find("excluded_categories"); it != j.end()) {
    for (const auto& c : *it) t.excluded_categories.insert(c.get<std::string>());
  }
  if (auto it = j.find("markers"); it != j.end()) {
    t.first_marker = it->value("first", t.first_marker);
    t.second_marker = it->value("second", t.second_marker);
    t.tie_marker = it->value("tie", t.tie_marker);
  }
  return t;
}

}  // namespace

std::string_view to_string(Outcome outcome) {
  switch (outcome) {
    case Outcome::win: return "win";
    case Outcome::tie: return "tie";
    case Outcome::lose: return "lose";
  }
  return "tie";
}

Outcome parse_outcome(std::string_view name) {
  if (name == "win") return Outcome::win;
  if (name == "tie") return Outcome::tie;
  if (name == "lose") return Outcome::lose;
  throw DataError(fmt::format("unknown outcome '{}'", name));
}

PairScore parse_pair_score(int value) {
  if (value < -1 || value > 1) {
    throw DataError(fmt::format("pair score {} not in {{-1, 0, 1}}", value));
  }
  return static_cast<PairScore>(value);
}

bool JudgeTemplate::applies_to(std::string_view category) const {
  return !excluded_categories.contains(std::string(category));
}

std::string JudgeTemplate::render(const QuestionRecord& q, std::string_view first,
                                  std::string_view second) const {
  auto it = category_prompts.find(q.category);
  const std::string& body = it == category_prompts.end() ? prompt : it->second;
  return substitute(body, q, first, second);
}

JudgeConfig JudgeConfig::parse(std::string_view json_text) {
  JudgeConfig cfg;
  try {
    auto j = ordered_json::parse(json_text);
    if (auto it = j.find("temperature"); it != j.end()) {
      cfg.generation.temperature = it->get<double>();
    }
    if (auto it = j.find("max_new_tokens"); it != j.end()) {
      cfg.generation.max_new_tokens = it->get<int>();
    }
    for (const auto& m : j.at("metrics")) cfg.metrics.push_back(parse_metric(m));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("judge config: {}", e.what()));
  }
  validate(cfg);
  return cfg;
}

JudgeConfig JudgeConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open {}", path.string()));
  std::string text((std::istreambuf_iterator<char>(in)), {});
  try {
    return parse(text);
  } catch (const ConfigError& e) {
    throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

void validate(const JudgeConfig& cfg) {
  if (cfg.metrics.empty()) throw ConfigError("judge config lists no metrics");
  std::set<std::string> seen;
  for (const auto& m : cfg.metrics) {
    if (m.metric.empty()) throw ConfigError("judge metric without a name");
    if (!seen.insert(m.metric).second) {
      throw ConfigError(fmt::format("metric '{}' listed twice", m.metric));
    }
    auto check = [&](const std::string& body) {
      for (std::string_view ph : {"{answer_1}", "{answer_2}"}) {
        if (body.find(ph) == std::string::npos) {
          throw ConfigError(fmt::format("metric '{}': prompt lacks {}", m.metric, ph));
        }
      }
    };
    check(m.prompt);
    for (const auto& [cat, body] : m.category_prompts) check(body);
    if (m.first_marker.empty() || m.second_marker.empty() || m.tie_marker.empty()) {
      throw ConfigError(fmt::format("metric '{}': empty verdict marker", m.metric));
    }
  }
}

JudgeVerdict parse_verdict(const JudgeTemplate& tmpl, std::string_view reply) {
  JudgeVerdict v;
  v.raw = std::string(reply);
  std::size_t best = std::string_view::npos;
  auto consider = [&](const std::string& marker, Verdict verdict) {
    auto pos = reply.find(marker);
    if (pos < best) {
      best = pos;
      v.verdict = verdict;
    }
  };
  consider(tmpl.first_marker, Verdict::first);
  consider(tmpl.second_marker, Verdict::second);
  consider(tmpl.tie_marker, Verdict::tie);
  if (best == std::string_view::npos) {
    v.verdict = Verdict::tie;
    v.parse_failed = true;
  }
  return v;
}

JudgeVerdict judge_once(const JudgeTemplate& tmpl, Backend& judge,
                        const QuestionRecord& q, std::string_view answer_first,
                        std::string_view answer_second,
                        const GenerationParams& generation) {
  if (answer_first.empty() || answer_second.empty()) {
    throw ConfigError(fmt::format("question {}: cannot judge an empty answer", q.id));
  }
  RequestPayload req;
  req.messages.push_back({Role::user, tmpl.render(q, answer_first, answer_second)});
  req.generation = generation;
  req.rendered_prompt_token_estimate =
      approximate_token_count(req.messages.front().content);
  auto r = judge.complete(req);
  auto v = parse_verdict(tmpl, r.text);
  if (v.parse_failed) {
    spdlog::warn("question {}: judge reply for '{}' has no verdict marker", q.id,
                 tmpl.metric);
  }
  return v;
}

PairScore score_for_sot(Verdict verdict, bool sot_was_first) {
  switch (verdict) {
    case Verdict::tie: return PairScore::tie;
    case Verdict::first: return sot_was_first ? PairScore::win : PairScore::lose;
    case Verdict::second: return sot_was_first ? PairScore::lose : PairScore::win;
  }
  return PairScore::tie;
}

Outcome combine_order_swapped(PairScore s1, PairScore s2) {
  int sum = static_cast<int>(s1) + static_cast<int>(s2);
  if (sum > 0) return Outcome::win;
  if (sum < 0) return Outcome::lose;
  return Outcome::tie;
}

PairOutcome evaluate_pair(const JudgeTemplate& tmpl, Backend& judge,
                          const QuestionRecord& q, std::string_view model,
                          std::string_view sot_answer,
                          std::string_view normal_answer,
                          const GenerationParams& generation) {
  auto ab = judge_once(tmpl, judge, q, sot_answer, normal_answer, generation);
  auto ba = judge_once(tmpl, judge, q, normal_answer, sot_answer, generation);
  PairOutcome p;
  p.question_id = q.id;
  p.metric = tmpl.metric;
  p.model = std::string(model);
  p.category = q.category;
  p.score_ab = score_for_sot(ab.verdict, true);
  p.score_ba = score_for_sot(ba.verdict, false);
  p.outcome = combine_order_swapped(p.score_ab, p.score_ba);
  p.parse_failure = ab.parse_failed || ba.parse_failed;
  return p;
}

double net_win_rate(std::span<const Outcome> outcomes) {
  if (outcomes.empty()) throw ConfigError("net win rate over zero questions");
  auto wins = std::count(outcomes.begin(), outcomes.end(), Outcome::win);
  auto losses = std::count(outcomes.begin(), outcomes.end(), Outcome::lose);
  return static_cast<double>(wins - losses) / static_cast<double>(outcomes.size());
}

double net_win_rate(std::span<const PairOutcome> outcomes) {
  std::vector<Outcome> flat;
  flat.reserve(outcomes.size());
  for (const auto& p : outcomes) flat.push_back(p.outcome);
  return net_win_rate(std::span<const Outcome>(flat));
}

GroupKey parse_group_key(std::string_view name) {
  if (name == "model") return GroupKey::model;
  if (name == "category") return GroupKey::category;
  if (name == "metric") return GroupKey::metric;
  throw ConfigError(fmt::format("unknown group key '{}'", name));
}

std::string_view to_string(GroupKey key) {
  switch (key) {
    case GroupKey::model: return "model";
    case GroupKey::category: return "category";
    case GroupKey::metric: return "metric";
  }
  return "model";
}

std::vector<WinRateRow> winrate_breakdown(std::span<const PairOutcome> outcomes,
                                          GroupKey key) {
  std::map<std::string, WinRateRow> rows;
  for (const auto& p : outcomes) {
    const std::string& g = key == GroupKey::model      ? p.model
                           : key == GroupKey::category ? p.category
                                                       : p.metric;
    WinRateRow& row = rows[g];
    row.group = g;
    switch (p.outcome) {
      case Outcome::win: ++row.wins; break;
      case Outcome::tie: ++row.ties; break;
      case Outcome::lose: ++row.losses; break;
    }
  }
  std::vector<WinRateRow> out;
  out.reserve(rows.size());
  for (auto& [g, row] : rows) {
    row.net_win_rate = (static_cast<double>(row.wins) - static_cast<double>(row.losses)) /
                       static_cast<double>(row.total());
    out.push_back(std::move(row));
  }
  return out;
}

void write_outcomes(std::ostream& out, std::span<const PairOutcome> outcomes) {
  for (const auto& p : outcomes) {
    ordered_json j;
    j["question_id"] = p.question_id;
    j["metric"] = p.metric;
    j["model"] = p.model;
    j["category"] = p.category;
    j["outcome"] = to_string(p.outcome);
    j["score_ab"] = static_cast<int>(p.score_ab);
    j["score_ba"] = static_cast<int>(p.score_ba);
    if (p.parse_failure) j["parse_failure"] = true;
    out << j.dump() << '\n';
  }
}

std::vector<PairOutcome> parse_outcomes(std::istream& in) {
  std::vector<PairOutcome> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = ordered_json::parse(line);
      PairOutcome p;
      p.question_id = j.at("question_id").get<std::string>();
      p.metric = j.at("metric").get<std::string>();
      p.model = j.value("model", std::string{});
      p.category = j.value("category", std::string{});
      p.outcome = parse_outcome(j.at("outcome").get<std::string>());
      p.score_ab = parse_pair_score(j.at("score_ab").get<int>());
      p.score_ba = parse_pair_score(j.at("score_ba").get<int>());
      p.parse_failure = j.value("parse_failure", false);
      if (combine_order_swapped(p.score_ab, p.score_ba) != p.outcome) {
        throw DataError("outcome disagrees with its scores");
      }
      out.push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(fmt::format("line {}: {}", line_no, e.what()));
    } catch (const DataError& e) {
      throw DataError(fmt::format("line {}: {}", line_no, e.what()));
    }
  }
  return out;
}

std::vector<PairOutcome> load_outcomes(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open {}", path.string()));
  return parse_outcomes(in);
}

}  // namespace sot
