#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "sot/error.h"
#include "sot/reports.h"
#include "sot/tokens.h"
#include "test_support.h"

namespace sot {
namespace {

using namespace std::chrono_literals;

std::string words(std::size_t n) {
  std::string s;
  for (std::size_t i = 0; i < n; ++i) s += i ? " w" : "w";
  return s;
}

RunRecord record(std::string id, std::string category, Duration normal_latency,
                 Duration sot_latency) {
  RunRecord r;
  r.question_id = id;
  r.model_id = "m";
  r.category = std::move(category);
  NormalAnswer n;
  n.question_id = id;
  n.text = words(10);
  n.latency = normal_latency;
  n.prefill_tokens = 10;
  n.decode_tokens = 600;
  SotAnswer s;
  s.question_id = id;
  s.sot_latency = sot_latency;
  s.tokens = {150, 60, 730, 62};
  s.point_prompt_prefix_tokens = 200;
  for (int i = 1; i <= 3; ++i) {
    ExpansionResult e;
    e.index = i;
    e.text = words(5);
    e.prefill_tokens = i == 2 ? 250 : 240;
    e.decode_tokens = 20;
    s.expansions.push_back(e);
  }
  s.final_text = words(15);
  r.normal = std::move(n);
  r.sot = std::move(s);
  return r;
}

TEST(PopulationStddev, FormulaAndReference) {
  std::vector<double> v = {50, 100, 150};
  EXPECT_NEAR(population_stddev(v), std::sqrt(5000.0 / 3.0), 1e-12);
  EXPECT_NEAR(population_stddev(v), 40.825, 1e-3);
  std::vector<double> flat = {100, 100, 100};
  EXPECT_EQ(population_stddev(flat), 0.0);
  std::vector<double> one = {7};
  EXPECT_EQ(population_stddev(one), 0.0);
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> d(0, 1000);
  for (int iter = 0; iter < 200; ++iter) {
    std::vector<double> xs(1 + iter % 17);
    for (double& x : xs) x = d(rng);
    double m = 0;
    for (double x : xs) m += x;
    m /= static_cast<double>(xs.size());
    double ss = 0;
    for (double x : xs) ss += (x - m) * (x - m);
    double ref = std::sqrt(ss / static_cast<double>(xs.size()));
    EXPECT_NEAR(population_stddev(xs), ref, 1e-9 * std::max(1.0, ref));
  }
}

TEST(LengthStats, UsageModeRatios) {
  auto r = record("q", "generic", 6s, 3200ms);
  r.normal->decode_tokens = 600;
  r.sot->tokens.stage1_decode = 300;
  r.sot->tokens.stage2_decode = 600;
  r.sot->expansions[0].decode_tokens = 50;
  r.sot->expansions[1].decode_tokens = 100;
  r.sot->expansions[2].decode_tokens = 150;
  auto rep = length_stats(std::vector{r}, LengthMode::usage);
  ASSERT_EQ(rep.rows.size(), 1u);
  const auto& row = rep.rows[0];
  EXPECT_EQ(std::get<std::string>(row[3]), "usage");
  EXPECT_DOUBLE_EQ(std::get<double>(row[4]), 3.0);
  EXPECT_DOUBLE_EQ(std::get<double>(row[5]), 150.0);
  EXPECT_NEAR(std::get<double>(row[6]), 40.825, 1e-3);
  EXPECT_DOUBLE_EQ(std::get<double>(row[7]), 1.5);
  EXPECT_DOUBLE_EQ(std::get<double>(row[8]), 0.25);
}

TEST(LengthStats, ApproximateModeAndRejections) {
  auto r = record("q", "generic", 6s, 3200ms);
  auto rep = length_stats(std::vector{r}, LengthMode::approximate);
  ASSERT_EQ(rep.rows.size(), 1u);
  EXPECT_DOUBLE_EQ(std::get<double>(rep.rows[0][7]),
                   static_cast<double>(approximate_token_count(words(15))) /
                       static_cast<double>(approximate_token_count(words(10))));
  r.sot->usage_approximate = true;
  EXPECT_THROW(length_stats(std::vector{r}, LengthMode::usage), IntegrityError);
  EXPECT_TRUE(length_stats(std::vector<RunRecord>{}, LengthMode::usage).rows.empty());
}

TEST(TokenOverhead, PerCallAndSharedPrefix) {
  auto r = record("q", "generic", 6s, 3200ms);
  EXPECT_DOUBLE_EQ(token_overhead_ratio(r, OverheadMode::per_call), 88.0);
  // P = min(200, 240, 250, 240) = 200 -> 880 - 2*200 = 480.
  EXPECT_DOUBLE_EQ(token_overhead_ratio(r, OverheadMode::shared_prefix), 48.0);
  auto rep = token_overhead(std::vector{r, r}, OverheadMode::per_call);
  ASSERT_EQ(rep.rows.size(), 1u);
  EXPECT_EQ(std::get<std::int64_t>(rep.rows[0][1]), 2);
  EXPECT_EQ(std::get<std::string>(rep.rows[0][2]), "per-call");
  EXPECT_EQ(std::get<std::string>(rep.rows[0][3]), "usage");
  EXPECT_DOUBLE_EQ(std::get<double>(rep.rows[0][4]), 88.0);
}

TEST(TokenOverhead, PerCallDominatesSharedPrefix) {
  std::mt19937 rng(6);
  std::uniform_int_distribution<std::size_t> tok(1, 500), bd(1, 10);
  for (int iter = 0; iter < 500; ++iter) {
    auto r = record("q", "c", 1s, 1s);
    r.sot->expansions.resize(bd(rng));
    std::size_t stage2 = 0;
    for (auto& e : r.sot->expansions) {
      e.prefill_tokens = tok(rng);
      stage2 += e.prefill_tokens;
    }
    r.sot->tokens.stage2_prefill = stage2;
    r.sot->point_prompt_prefix_tokens = tok(rng);
    double per_call = token_overhead_ratio(r, OverheadMode::per_call);
    double shared = token_overhead_ratio(r, OverheadMode::shared_prefix);
    EXPECT_GE(per_call, shared);
    EXPECT_GT(shared, 0.0);
  }
}

TEST(TokenOverhead, Errors) {
  auto r = record("q", "generic", 6s, 3200ms);
  r.normal->prefill_tokens = 0;
  EXPECT_THROW(token_overhead_ratio(r, OverheadMode::per_call), IntegrityError);
  auto a = record("a", "c", 1s, 1s);
  auto b = record("b", "c", 1s, 1s);
  b.sot->usage_approximate = true;
  b.normal->usage_approximate = true;
  EXPECT_THROW(token_overhead(std::vector{a, b}, OverheadMode::per_call), IntegrityError);
  a.sot->usage_approximate = true;
  EXPECT_THROW(token_overhead(std::vector{a}, OverheadMode::per_call), IntegrityError);
  auto lonely = record("l", "c", 1s, 1s);
  lonely.sot.reset();
  EXPECT_THROW(token_overhead_ratio(lonely, OverheadMode::per_call), IntegrityError);
}

TEST(SpeedupReport, MeasuredRatio) {
  auto rep = speedup_report(std::vector{record("q", "generic", 6s, 3200ms)});
  ASSERT_EQ(rep.rows.size(), 2u);
  EXPECT_EQ(std::get<std::string>(rep.rows[0][0]), "model");
  EXPECT_EQ(std::get<std::string>(rep.rows[1][0]), "category");
  EXPECT_EQ(std::get<std::string>(rep.rows[0][3]), "measured");
  EXPECT_NEAR(std::get<double>(rep.rows[0][5]), 1.875, 1e-9);
  EXPECT_EQ(std::get<std::string>(rep.rows[0][7]), "");
}

TEST(SpeedupReport, RecordwiseArithmeticMean) {
  std::vector<RunRecord> rs = {record("a", "x", 6s, 3s), record("b", "x", 4s, 4s),
                               record("c", "y", 3s, 1s)};
  rs[2].sot_r_latency = 1500ms;
  auto rep = speedup_report(rs);
  EXPECT_DOUBLE_EQ(std::get<double>(rep.rows[0][5]), (2.0 + 1.0 + 3.0) / 3.0);
  EXPECT_EQ(std::get<std::int64_t>(rep.rows[0][6]), 1);
  EXPECT_DOUBLE_EQ(std::get<double>(rep.rows[0][7]), 2.0);
  EXPECT_EQ(std::get<std::string>(rep.rows[1][1]), "x");
  EXPECT_DOUBLE_EQ(std::get<double>(rep.rows[1][5]), 1.5);
  EXPECT_DOUBLE_EQ(std::get<double>(rep.rows[2][5]), 3.0);
}

TEST(SpeedupReport, EqualLatenciesAndEstimatedSource) {
  auto r = record("q", "generic", 2s, 2s);
  EXPECT_DOUBLE_EQ(std::get<double>(speedup_report(std::vector{r}).rows[0][5]), 1.0);
  RunRecord est;
  est.question_id = "e";
  est.model_id = "m";
  est.category = "generic";
  est.estimated_normal_ms = 600.0;
  est.estimates = SotLatencyEstimate{};
  est.estimates->total_ms = 320.0;
  auto rep = speedup_report(std::vector{est});
  EXPECT_EQ(std::get<std::string>(rep.rows[0][3]), "estimated");
  EXPECT_DOUBLE_EQ(std::get<double>(rep.rows[0][5]), 1.875);
  auto mixed = speedup_report(std::vector{r, est});
  EXPECT_EQ(std::get<std::string>(mixed.rows[0][3]), "mixed");
}

TEST(WinrateAndConfusionReports, Shapes) {
  std::vector<PairOutcome> o = {{"1", "general", "m", "generic", Outcome::win,
                                 PairScore::win, PairScore::tie, false},
                                {"2", "general", "m", "math", Outcome::lose,
                                 PairScore::lose, PairScore::tie, false}};
  auto w = winrate_report(o, GroupKey::category);
  EXPECT_EQ(w.name, "winrate_by_category");
  EXPECT_EQ(w.rows.size(), 2u);
  EXPECT_DOUBLE_EQ(std::get<double>(w.rows[0][5]), 1.0);
  auto c = confusion_report({1, 1, 1, 1});
  EXPECT_EQ(c.rows.size(), 2u);
  EXPECT_EQ(std::get<std::int64_t>(c.rows[0][3]), 2);
}

TEST(Render, CsvQuotingAndHeaderOnly) {
  Report rep{"t", {"a", "b,c"}, {}};
  EXPECT_EQ(render(rep, ReportFormat::csv), "a,\"b,c\"\n");
  rep.rows.push_back({std::string("say \"hi\""), std::int64_t{3}});
  rep.rows.push_back({std::string("x"), 0.5});
  EXPECT_EQ(render(rep, ReportFormat::csv), "a,\"b,c\"\n\"say \"\"hi\"\"\",3\nx,0.5\n");
}

TEST(Render, JsonRoundTripIsByteIdentical) {
  Report rep{"t", {"name", "n", "x"}, {}};
  rep.rows.push_back({std::string("a"), std::int64_t{2}, 1.875});
  rep.rows.push_back({std::string("b\n"), std::int64_t{-1}, 0.1});
  auto text = render(rep, ReportFormat::json);
  auto back = parse_report_json(text);
  EXPECT_EQ(back, rep);
  EXPECT_EQ(render(back, ReportFormat::json), text);
  EXPECT_THROW(parse_report_json(R"({"name":"t","columns":["a"],"rows":[[1,2]]})"),
               DataError);
}

TEST(Emit, WritesFilesAndRejectsBadPath) {
  testing::TempDir dir("emit");
  Report rep{"t", {"a"}, {{std::int64_t{1}}}};
  emit(rep, ReportFormat::csv, dir.path() / "sub/t.csv");
  EXPECT_EQ(testing::slurp(dir.path() / "sub/t.csv"), "a\n1\n");
  std::filesystem::create_directories(dir.path() / "blocker");
  EXPECT_THROW(emit(rep, ReportFormat::csv, dir.path() / "blocker"), ConfigError);
}

}  // namespace
}  // namespace sot
