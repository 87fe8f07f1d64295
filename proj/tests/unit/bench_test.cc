#include <gtest/gtest.h>

#include <map>

#include "sot/bench.h"
#include "sot/datasets.h"
#include "test_support.h"

namespace sot {
namespace {

namespace fs = std::filesystem;

struct Fixture {
  std::vector<QuestionRecord> questions =
      load_dataset(testing::data_dir() / "fixtures/questions.jsonl");
  std::map<std::string, bool> labels =
      load_labels(testing::data_dir() / "fixtures/labels.jsonl");
  PromptLibrary prompts = PromptLibrary::builtin();
  ModelProfile profile = load_profile(testing::data_dir() / "fixtures/profile.json");
  ProfilingTable table = ProfilingTable::load_csv(testing::data_dir() / "fixtures/flat_table.csv");
};

std::unique_ptr<MockBackend> fixture_backend() {
  auto cfg = load_backend_config(testing::data_dir() / "fixtures/backend.mock.json");
  return std::make_unique<MockBackend>(MockScript::load(cfg.mock_script), cfg);
}

BenchResult bench(const Fixture& f, const fs::path& out, bool human,
                  std::size_t concurrency = 1) {
  auto backend = fixture_backend();
  Pipeline pipeline(f.prompts, f.profile, *backend);
  std::unique_ptr<Router> router;
  if (human) {
    router = std::make_unique<HumanLabelRouter>(f.labels);
  } else {
    router = std::make_unique<PromptingRouter>(f.prompts, *backend);
  }
  BenchConfig cfg;
  cfg.out_dir = out;
  cfg.concurrency = concurrency;
  cfg.table = &f.table;
  return run_bench(f.questions, pipeline, router.get(), cfg);
}

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) {
      files[fs::relative(e.path(), root).string()] = testing::slurp(e.path());
    }
  }
  return files;
}

TEST(Bench, RunsEveryModeAndWritesReports) {
  Fixture f;
  testing::TempDir dir("bench");
  auto result = bench(f, dir.path(), false);
  EXPECT_TRUE(result.failures.empty());
  ASSERT_EQ(result.records.size(), f.questions.size());
  for (const auto& q : f.questions) {
    for (auto mode : {RunMode::normal, RunMode::sot, RunMode::sot_r}) {
      EXPECT_TRUE(fs::exists(transcript_path(dir.path() / "transcripts", q.id, mode)));
    }
  }
  for (const char* stem : {"length_stats", "token_overhead_per_call",
                           "token_overhead_shared_prefix", "speedup"}) {
    EXPECT_TRUE(fs::exists(dir.path() / "reports" / (std::string(stem) + ".csv"))) << stem;
    EXPECT_TRUE(fs::exists(dir.path() / "reports" / (std::string(stem) + ".json"))) << stem;
  }
  const auto& q6 = result.records.back();
  EXPECT_FALSE(q6.sot.has_value());
  auto t6 = read_transcript(transcript_path(dir.path() / "transcripts", "q6", RunMode::sot));
  EXPECT_FALSE(t6.error.empty());
  ASSERT_EQ(t6.overhead_calls.size(), 1u);
  EXPECT_TRUE(result.records.front().estimates.has_value());
  EXPECT_TRUE(result.records.front().estimated_normal_ms.has_value());
}

TEST(Bench, SotRNeverIssuesBothPipelines) {
  Fixture f;
  testing::TempDir dir("both");
  bench(f, dir.path(), false);
  for (const auto& q : f.questions) {
    auto t = read_transcript(transcript_path(dir.path() / "transcripts", q.id, RunMode::sot_r));
    ASSERT_TRUE(t.decision.has_value());
    EXPECT_NE(t.normal.has_value(), t.sot.has_value()) << q.id;
    EXPECT_EQ(t.sot.has_value(), t.decision->use_sot && !t.decision->fallback) << q.id;
  }
}

TEST(Bench, HumanRouterTriggersSotExactlyOnLabels) {
  Fixture f;
  testing::TempDir dir("human");
  auto result = bench(f, dir.path(), true);
  for (const auto& q : f.questions) {
    auto t = read_transcript(transcript_path(dir.path() / "transcripts", q.id, RunMode::sot_r));
    EXPECT_EQ(t.sot.has_value(), f.labels.at(q.id)) << q.id;
    EXPECT_EQ(t.decision->source, RouterSource::human_label);
  }
}

TEST(Bench, ByteIdenticalAcrossRunsAndConcurrency) {
  Fixture f;
  testing::TempDir a("det-a"), b("det-b");
  bench(f, a.path(), false, 1);
  bench(f, b.path(), false, 4);
  EXPECT_EQ(snapshot(a.path()), snapshot(b.path()));
}

TEST(Bench, ResumeReusesTranscripts) {
  Fixture f;
  testing::TempDir dir("resume");
  auto first = bench(f, dir.path(), false);
  auto before = snapshot(dir.path());
  EXPECT_EQ(first.resumed, 0u);
  auto second = bench(f, dir.path(), false);
  EXPECT_EQ(second.resumed, 3 * f.questions.size());
  EXPECT_EQ(snapshot(dir.path()), before);
  fs::remove(transcript_path(dir.path() / "transcripts", "q2", RunMode::sot));
  auto third = bench(f, dir.path(), false);
  EXPECT_EQ(third.resumed, 3 * f.questions.size() - 1);
  EXPECT_EQ(snapshot(dir.path()), before);
}

TEST(Bench, NoRouterSkipsSotR) {
  Fixture f;
  testing::TempDir dir("norouter");
  auto backend = fixture_backend();
  Pipeline pipeline(f.prompts, f.profile, *backend);
  BenchConfig cfg;
  cfg.out_dir = dir.path();
  run_bench(f.questions, pipeline, nullptr, cfg);
  EXPECT_FALSE(fs::exists(transcript_path(dir.path() / "transcripts", "q1", RunMode::sot_r)));
  EXPECT_TRUE(fs::exists(transcript_path(dir.path() / "transcripts", "q1", RunMode::sot)));
}

TEST(Bench, RequiresOutputDirectory) {
  Fixture f;
  auto backend = fixture_backend();
  Pipeline pipeline(f.prompts, f.profile, *backend);
  EXPECT_THROW(run_bench(f.questions, pipeline, nullptr, BenchConfig{}), ConfigError);
}

}  // namespace
}  // namespace sot
