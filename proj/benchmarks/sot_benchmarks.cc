#include <benchmark/benchmark.h>
#include <spdlog/spdlog.h>

#include <string>

#include "sot/expansion.h"
#include "sot/latency_model.h"
#include "sot/prompt_kit.h"
#include "sot/skeleton.h"

namespace {

using namespace sot;

std::string skeleton_text(int points) {
  std::string s;
  for (int i = 1; i <= points; ++i) {
    s += std::to_string(i) + ". Point number " + std::to_string(i) + " with a few words\n";
  }
  return s;
}

void BM_ParseSkeleton(benchmark::State& state) {
  const auto raw = skeleton_text(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(parse_skeleton(raw, std::nullopt));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(raw.size()));
}
BENCHMARK(BM_ParseSkeleton)->Arg(3)->Arg(10)->Arg(100);

void BM_AssemblePointRequest(benchmark::State& state) {
  auto prompts = PromptLibrary::builtin();
  ModelProfile profile;
  const auto skel = skeleton_text(10);
  for (auto _ : state) {
    benchmark::DoNotOptimize(assemble_point_request(
        prompts, "How can I save energy at home?", skel, 3, "Point number 3", profile));
  }
}
BENCHMARK(BM_AssemblePointRequest);

void BM_EstimateGeneration(benchmark::State& state) {
  auto table = ProfilingTable::flat(16, 2048, 701, 10.0, 30.0);
  const auto lo = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(estimate_generation(table, 300, lo, 8));
}
BENCHMARK(BM_EstimateGeneration)->Arg(64)->Arg(512);

void BM_Aggregate(benchmark::State& state) {
  auto s = parse_skeleton(skeleton_text(10));
  std::vector<ExpansionResult> e(s.points.size());
  for (std::size_t i = 0; i < e.size(); ++i) {
    e[i].index = s.points[i].index;
    e[i].text = " is expanded into a sentence or two of detail.";
  }
  for (auto _ : state) benchmark::DoNotOptimize(aggregate(s, e));
}
BENCHMARK(BM_Aggregate);

void BM_MockRunSot(benchmark::State& state) {
  spdlog::set_level(spdlog::level::err);
  const std::string q = "How can I save energy at home?";
  MockScript script;
  MockEntry skel;
  skel.name = "skeleton";
  skel.contains = {"provide the skeleton for the following question"};
  skel.response = skeleton_text(static_cast<int>(state.range(0)));
  script.entries.push_back(skel);
  MockEntry point;
  point.name = "point";
  point.contains = {"Continue and only continue the writing of point"};
  point.response = " expanded.";
  script.entries.push_back(point);
  MockBackend backend(script);
  auto prompts = PromptLibrary::builtin();
  ModelProfile profile;
  Pipeline pipeline(prompts, profile, backend);
  QuestionRecord rec{"b", "generic", q, std::nullopt};
  for (auto _ : state) benchmark::DoNotOptimize(pipeline.run_sot(rec));
}
BENCHMARK(BM_MockRunSot)->Arg(3)->Arg(10);

}  // namespace

BENCHMARK_MAIN();
