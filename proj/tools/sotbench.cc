#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "sot/bench.h"
#include "sot/datasets.h"
#include "sot/error.h"
#include "sot/eval_quality.h"
#include "sot/latency_model.h"
#include "sot/reports.h"
#include "sot/router.h"
#include "sot/transcript.h"

namespace {

using namespace sot;
namespace fs = std::filesystem;

struct Options {
  std::string profile;
  std::string backend;
  std::string dataset;
  std::string table;
  std::string out;
  std::string router = "off";
  std::string mode = "sot";
  std::size_t concurrency = 1;
  std::optional<std::uint64_t> seed;
  std::string templates;
  std::string labels;
  std::string router_url = "http://127.0.0.1:8100";
  std::optional<std::size_t> cap;
  bool no_cap = false;
  bool verbose = false;

  // run
  std::string id;
  std::string question;
  bool fallback_normal = false;

  // bench
  bool no_resume = false;

  // estimate
  std::size_t li_s = 1, lo_s = 0, li_pe = 1, lo_pe = 0, batch = 1;
  std::optional<std::size_t> li_normal, lo_normal;

  // judge
  std::string judge_backend;
  std::string judge_config;
  std::string transcripts;
  std::string sot_transcript;
  std::string normal_transcript;
  std::string model;

  // report
  std::string outcomes;
  std::string group_by;
  std::string format = "csv";
};

void require(const std::string& value, const char* flag, const char* command) {
  if (value.empty()) throw ConfigError(fmt::format("{} needs {}", command, flag));
}

PromptLibrary prompts_for(const Options& o) {
  return o.templates.empty() ? PromptLibrary::builtin() : PromptLibrary::load(o.templates);
}

ModelProfile profile_for(const Options& o) {
  return o.profile.empty() ? ModelProfile{} : load_profile(o.profile);
}

SotOptions sot_options(const Options& o) {
  SotOptions s;
  if (o.no_cap) {
    s.cap.reset();
  } else if (o.cap) {
    s.cap = *o.cap;
  }
  s.seed = o.seed;
  return s;
}

std::unique_ptr<Router> make_router(const Options& o, const PromptLibrary& prompts,
                                    Backend* backend,
                                    std::span<const QuestionRecord> dataset) {
  if (o.router == "off") return nullptr;
  switch (parse_router_source(o.router)) {
    case RouterSource::prompting:
      if (!backend) throw ConfigError("the prompting router needs --backend");
      return std::make_unique<PromptingRouter>(prompts, *backend,
                                               GenerationParams{{}, 0.0, o.seed});
    case RouterSource::trained:
      return std::make_unique<TrainedRouter>(o.router_url);
    case RouterSource::human_label: {
      std::map<std::string, bool> labels;
      if (!o.labels.empty()) labels = load_labels(o.labels);
      for (const auto& q : dataset) {
        if (q.sot_suitable && !labels.contains(q.id)) labels[q.id] = *q.sot_suitable;
      }
      return std::make_unique<HumanLabelRouter>(std::move(labels));
    }
    case RouterSource::heuristic:
      return std::make_unique<HeuristicRouter>();
  }
  return nullptr;
}

QuestionRecord pick_question(const Options& o, std::vector<QuestionRecord>& dataset) {
  if (!o.question.empty()) return {o.id.empty() ? "cli" : o.id, "generic", o.question, {}};
  require(o.dataset, "--dataset or --question", "run");
  dataset = load_dataset(o.dataset);
  if (o.id.empty()) {
    if (dataset.size() != 1) throw ConfigError("run over a dataset needs --id");
    return dataset.front();
  }
  const QuestionRecord* q = find_question(dataset, o.id);
  if (!q) throw ConfigError(fmt::format("no question '{}' in {}", o.id, o.dataset));
  return *q;
}

int cmd_run(const Options& o) {
  require(o.backend, "--backend", "run");
  const RunMode mode = parse_run_mode(o.mode);
  std::vector<QuestionRecord> dataset;
  QuestionRecord q = pick_question(o, dataset);
  auto prompts = prompts_for(o);
  auto profile = profile_for(o);
  auto backend = make_backend(load_backend_config(o.backend));
  Pipeline pipeline(prompts, profile, *backend, sot_options(o));
  auto router = make_router(o, prompts, backend.get(), dataset);
  if (mode == RunMode::sot_r && !router) throw ConfigError("--mode sot-r needs --router");

  Transcript t;
  t.question_id = q.id;
  t.model_id = profile.model_id;
  t.mode = mode;
  std::string answer;
  int code = 0;
  switch (mode) {
    case RunMode::normal:
      t.normal = pipeline.run_normal(q);
      t.total_latency = t.normal->latency;
      answer = t.normal->text;
      break;
    case RunMode::sot:
      try {
        t.sot = pipeline.run_sot(q);
        t.total_latency = t.sot->sot_latency;
        answer = t.sot->final_text;
      } catch (const SotFallback& fb) {
        t.overhead_calls.push_back(fb.skeleton_call());
        t.total_latency = fb.skeleton_call().latency;
        if (!o.fallback_normal) {
          t.error = fb.what();
          code = fb.exit_code();
          spdlog::error("{}", fb.what());
          break;
        }
        t.normal = pipeline.run_normal(q);
        t.total_latency += t.normal->latency;
        answer = t.normal->text;
      }
      break;
    case RunMode::sot_r: {
      auto r = run_sot_r(q, pipeline, *router);
      t.decision = r.decision;
      t.overhead_calls = std::move(r.overhead_calls);
      t.total_latency = r.total_latency;
      if (r.used_sot()) {
        t.sot = std::get<SotAnswer>(std::move(r.answer));
        answer = t.sot->final_text;
      } else {
        t.normal = std::get<NormalAnswer>(std::move(r.answer));
        answer = t.normal->text;
      }
      break;
    }
  }
  fs::path dir = o.out.empty() ? fs::path("transcripts") : fs::path(o.out);
  fs::create_directories(dir);
  auto path = transcript_path(dir, q.id, mode);
  write_transcript(path, t);
  if (code == 0) std::cout << answer << "\n";
  spdlog::info("transcript written to {} ({:.3f} s)", path.string(),
               to_seconds(t.total_latency));
  return code;
}

int cmd_bench(const Options& o) {
  require(o.backend, "--backend", "bench");
  require(o.dataset, "--dataset", "bench");
  require(o.out, "--out", "bench");
  auto dataset = load_dataset(o.dataset);
  auto prompts = prompts_for(o);
  auto profile = profile_for(o);
  auto backend = make_backend(load_backend_config(o.backend));
  Pipeline pipeline(prompts, profile, *backend, sot_options(o));
  auto router = make_router(o, prompts, backend.get(), dataset);
  std::optional<ProfilingTable> table;
  if (!o.table.empty()) table = ProfilingTable::load_csv(o.table);

  BenchConfig cfg;
  cfg.out_dir = o.out;
  cfg.concurrency = o.concurrency;
  cfg.resume = !o.no_resume;
  cfg.seed = o.seed;
  cfg.table = table ? &*table : nullptr;
  auto result = run_bench(dataset, pipeline, router.get(), cfg);
  for (const auto& f : result.failures) std::cerr << "failed: " << f << "\n";
  std::cout << fmt::format("{} questions, {} transcripts resumed, {} failures\n",
                           result.records.size(), result.resumed, result.failures.size());
  return 0;
}

int cmd_estimate(const Options& o) {
  require(o.table, "--table", "estimate");
  auto table = ProfilingTable::load_csv(o.table);
  auto e = estimate_sot(table, o.li_s, o.lo_s, o.li_pe, o.lo_pe, o.batch);
  ordered_json j = to_json(e);
  if (o.li_normal || o.lo_normal) {
    auto n = estimate_generation(table, o.li_normal.value_or(1), o.lo_normal.value_or(0), 1);
    j["normal_ms"] = n.ms;
    j["speedup"] = speedup(n.ms, e.total_ms);
  }
  std::cout << j.dump(2) << "\n";
  return 0;
}

std::string sot_text(const Transcript& t, const std::string& path) {
  if (t.sot) return t.sot->final_text;
  if (t.normal) return t.normal->text;
  throw DataError(fmt::format("{} holds no answer", path));
}

int cmd_judge(const Options& o) {
  require(o.judge_backend, "--judge-backend", "judge");
  require(o.dataset, "--dataset", "judge");
  auto dataset = load_dataset(o.dataset);
  require(o.judge_config, "--judge-config", "judge");
  auto cfg = JudgeConfig::load(o.judge_config);
  auto judge = make_backend(load_backend_config(o.judge_backend));

  std::vector<std::pair<fs::path, fs::path>> pairs;
  if (!o.sot_transcript.empty() || !o.normal_transcript.empty()) {
    require(o.sot_transcript, "--sot-transcript", "judge");
    require(o.normal_transcript, "--normal-transcript", "judge");
    pairs.emplace_back(o.sot_transcript, o.normal_transcript);
  } else {
    require(o.transcripts, "--transcripts or --sot-transcript", "judge");
    const RunMode candidate = parse_run_mode(o.mode);
    for (const auto& q : dataset) {
      auto s = transcript_path(o.transcripts, q.id, candidate);
      auto n = transcript_path(o.transcripts, q.id, RunMode::normal);
      if (fs::exists(s) && fs::exists(n)) pairs.emplace_back(s, n);
    }
  }

  std::vector<PairOutcome> outcomes;
  for (const auto& [sp, np] : pairs) {
    auto st = read_transcript(sp);
    auto nt = read_transcript(np);
    if (!st.error.empty()) {
      spdlog::warn("{}: {}; not judged", sp.string(), st.error);
      continue;
    }
    const QuestionRecord* q = find_question(dataset, st.question_id);
    if (!q) throw DataError(fmt::format("question {} not in dataset", st.question_id));
    if (nt.question_id != st.question_id) {
      throw IntegrityError(fmt::format("{} and {} answer different questions", sp.string(),
                                       np.string()));
    }
    const std::string model = o.model.empty() ? st.model_id : o.model;
    for (const auto& m : cfg.metrics) {
      if (!m.applies_to(q->category)) continue;
      outcomes.push_back(evaluate_pair(m, *judge, *q, model, sot_text(st, sp.string()),
                                       sot_text(nt, np.string()), cfg.generation));
    }
  }
  if (o.out.empty()) {
    write_outcomes(std::cout, outcomes);
  } else {
    if (fs::path(o.out).has_parent_path()) fs::create_directories(fs::path(o.out).parent_path());
    std::ofstream out(o.out, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError(fmt::format("cannot write {}", o.out));
    write_outcomes(out, outcomes);
  }
  return 0;
}

int cmd_route(const Options& o) {
  require(o.dataset, "--dataset", "route");
  if (o.router == "off") throw ConfigError("route needs --router");
  auto dataset = load_dataset(o.dataset);
  auto prompts = prompts_for(o);
  std::unique_ptr<Backend> backend;
  if (!o.backend.empty()) backend = make_backend(load_backend_config(o.backend));
  auto router = make_router(o, prompts, backend.get(), dataset);
  std::vector<RouterDecision> decisions;
  for (const auto& q : dataset) {
    decisions.push_back(router->route(q));
    std::cout << to_json(decisions.back()).dump() << "\n";
  }
  if (!o.labels.empty()) {
    HumanLabelRouter human(load_labels(o.labels));
    std::vector<RouterDecision> reference;
    for (const auto& q : dataset) reference.push_back(human.route(q));
    auto rep = confusion_report(confusion(reference, decisions));
    if (o.out.empty()) {
      std::cerr << render(rep, parse_report_format(o.format));
    } else {
      emit(rep, parse_report_format(o.format), o.out);
    }
  }
  return 0;
}

int cmd_report(const Options& o) {
  require(o.outcomes, "--outcomes", "report");
  auto outcomes = load_outcomes(o.outcomes);
  const auto format = parse_report_format(o.format);
  std::vector<GroupKey> keys;
  if (o.group_by.empty()) {
    keys = {GroupKey::model, GroupKey::category, GroupKey::metric};
  } else {
    keys = {parse_group_key(o.group_by)};
  }
  for (auto key : keys) {
    auto rep = winrate_report(outcomes, key);
    if (o.out.empty()) {
      std::cout << render(rep, format);
    } else {
      emit(rep, format, fs::path(o.out) / (rep.name + (format == ReportFormat::csv ? ".csv" : ".json")));
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Skeleton-first generation engine and benchmark harness"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_help_all_flag("--help-all");
  Options o;

  app.add_option("--profile", o.profile, "Model profile JSON");
  app.add_option("--backend", o.backend, "Backend config JSON");
  app.add_option("--dataset", o.dataset, "Question dataset JSONL");
  app.add_option("--table", o.table, "Latency profiling table CSV");
  app.add_option("--out", o.out, "Output directory or file");
  app.add_option("--router", o.router, "Router for sot-r")
      ->check(CLI::IsMember({"prompting", "trained", "human", "heuristic", "off"}));
  app.add_option("--mode", o.mode, "Generation mode")
      ->check(CLI::IsMember({"normal", "sot", "sot-r"}));
  app.add_option("--concurrency", o.concurrency, "Questions in flight")
      ->check(CLI::PositiveNumber);
  app.add_option("--seed", o.seed, "Seed forwarded to the backend");
  app.add_option("--templates", o.templates, "Directory overriding built-in prompts");
  app.add_option("--labels", o.labels, "Human label JSONL {id, use_sot}");
  app.add_option("--router-url", o.router_url, "Trained-router service base URL");
  app.add_option("--cap", o.cap, "Maximum points per skeleton")->check(CLI::PositiveNumber);
  app.add_flag("--no-cap", o.no_cap, "Expand every parsed point");
  app.add_flag("-v,--verbose", o.verbose, "Log progress");

  auto* run = app.add_subcommand("run", "Answer one question");
  run->add_option("--id", o.id, "Question id in --dataset");
  run->add_option("--question", o.question, "Question text");
  run->add_flag("--fallback-normal", o.fallback_normal,
                "Answer normally when the skeleton is unusable");

  auto* bench = app.add_subcommand("bench", "Run every mode over a dataset");
  bench->add_flag("--no-resume", o.no_resume, "Ignore transcripts already on disk");

  auto* estimate = app.add_subcommand("estimate", "Analytical SoT latency from a table");
  estimate->add_option("--li-s", o.li_s, "Skeleton prompt tokens")->check(CLI::PositiveNumber);
  estimate->add_option("--lo-s", o.lo_s, "Skeleton output tokens");
  estimate->add_option("--li-pe", o.li_pe, "Longest point prompt tokens")
      ->check(CLI::PositiveNumber);
  estimate->add_option("--lo-pe", o.lo_pe, "Longest point output tokens");
  estimate->add_option("--batch", o.batch, "Number of points")->check(CLI::PositiveNumber);
  estimate->add_option("--li-normal", o.li_normal, "Normal prompt tokens")
      ->check(CLI::PositiveNumber);
  estimate->add_option("--lo-normal", o.lo_normal, "Normal output tokens");

  auto* judge = app.add_subcommand("judge", "Order-swapped pairwise judging");
  judge->add_option("--judge-backend", o.judge_backend, "Judge backend config JSON");
  judge->add_option("--judge-config", o.judge_config, "Judge metrics JSON");
  judge->add_option("--transcripts", o.transcripts, "Transcript directory from bench");
  judge->add_option("--sot-transcript", o.sot_transcript, "Candidate transcript file");
  judge->add_option("--normal-transcript", o.normal_transcript, "Baseline transcript file");
  judge->add_option("--model", o.model, "Model name recorded in outcomes");

  auto* route = app.add_subcommand("route", "Route every dataset question");
  route->add_option("--format", o.format, "Confusion report format")
      ->check(CLI::IsMember({"csv", "json"}));

  auto* report = app.add_subcommand("report", "Net win rate tables from outcomes");
  report->add_option("--outcomes", o.outcomes, "Outcome JSONL from judge")->required();
  report->add_option("--group-by", o.group_by, "model, category or metric")
      ->check(CLI::IsMember({"model", "category", "metric"}));
  report->add_option("--format", o.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(ErrorFamily::config);
  }

  spdlog::set_default_logger(spdlog::stderr_color_mt("sotbench"));
  spdlog::set_level(o.verbose ? spdlog::level::info : spdlog::level::warn);

  try {
    if (*run) return cmd_run(o);
    if (*bench) return cmd_bench(o);
    if (*estimate) return cmd_estimate(o);
    if (*judge) return cmd_judge(o);
    if (*route) return cmd_route(o);
    if (*report) return cmd_report(o);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ErrorFamily::config);
  }
  return 0;
}
