#include <gtest/gtest.h>

#include <fstream>

#include <nlohmann/json.hpp>

#include "sot/router.h"
#include "mock_fixture.h"
#include "stub_server.h"

namespace sot {
namespace {

using namespace std::chrono_literals;
using nlohmann::json;
using testing::chat_profile;
using testing::contains_entry;
using testing::StubServer;

const QuestionRecord kQ{"q1", "generic", "How to save energy?", std::nullopt};

TEST(ScanRouterLetter, FirstStandaloneLetter) {
  EXPECT_EQ(scan_router_letter("A"), 'A');
  EXPECT_EQ(scan_router_letter("Answer: C"), 'C');
  EXPECT_EQ(scan_router_letter("(B) then A"), 'B');
  EXPECT_EQ(scan_router_letter("ABC"), std::nullopt);
  EXPECT_EQ(scan_router_letter("a b c"), std::nullopt);
  EXPECT_EQ(scan_router_letter("A1 B"), 'B');
  EXPECT_EQ(scan_router_letter(""), std::nullopt);
}

struct ReplyCase {
  std::string reply;
  bool use_sot;
};

std::vector<ReplyCase> load_reply_fixture() {
  std::ifstream in(testing::data_dir() / "fixtures/router_replies.jsonl");
  std::vector<ReplyCase> cases;
  for (std::string line; std::getline(in, line);) {
    auto j = json::parse(line);
    cases.push_back({j.at("reply").get<std::string>(), j.at("use_sot").get<bool>()});
  }
  return cases;
}

TEST(PromptingRouter, ReplyFixture) {
  auto cases = load_reply_fixture();
  ASSERT_EQ(cases.size(), 50u);
  auto prompts = PromptLibrary::builtin();
  for (const auto& c : cases) {
    MockScript script;
    script.entries.push_back(contains_entry({testing::kRouterNeedle}, c.reply, 0.01, 3));
    MockBackend backend(script);
    PromptingRouter router(prompts, backend);
    auto d = router.route(kQ);
    EXPECT_EQ(d.use_sot, c.use_sot) << "reply: " << c.reply;
    EXPECT_EQ(d.source, RouterSource::prompting);
    EXPECT_EQ(d.router_latency, 30ms);
    ASSERT_TRUE(router.last_call());
    EXPECT_EQ(router.last_call()->stage, Stage::router);
  }
}

TEST(PromptingRouter, BackendFailureIsNormal) {
  auto prompts = PromptLibrary::builtin();
  MockBackend backend(MockScript{});
  auto d = route_prompting(kQ, prompts, backend);
  EXPECT_FALSE(d.use_sot);
  EXPECT_EQ(d.raw, "error");
}

TEST(TrainedRouter, MirrorsService) {
  json seen;
  StubServer server([&](httplib::Server& s) {
    s.Post("/route", [&](const httplib::Request& req, httplib::Response& res) {
      seen = json::parse(req.body);
      res.set_content(R"({"use_sot": true, "score": 0.91})", "application/json");
    });
  });
  auto d = route_trained(kQ, server.url());
  EXPECT_TRUE(d.use_sot);
  EXPECT_EQ(d.source, RouterSource::trained);
  EXPECT_EQ(d.raw, "0.91");
  EXPECT_EQ(seen, json({{"question", kQ.text}}));
}

TEST(TrainedRouter, ServiceDecisionIsAuthoritativeAtThreshold) {
  for (bool verdict : {true, false}) {
    StubServer server([&](httplib::Server& s) {
      s.Post("/svc/route", [&](const httplib::Request&, httplib::Response& res) {
        res.set_content(json({{"use_sot", verdict}, {"score", 0.5}}).dump(),
                        "application/json");
      });
    });
    TrainedRouter router(server.url("/svc/"));
    auto d = router.route(kQ);
    EXPECT_EQ(d.use_sot, verdict);
    EXPECT_EQ(d.raw, "0.5");
  }
}

TEST(TrainedRouter, UnavailableServiceFailsSafe) {
  TrainedRouter router("http://127.0.0.1:1", 1s);
  auto d = router.route(kQ);
  EXPECT_FALSE(d.use_sot);
  EXPECT_EQ(d.raw, "unavailable");
  EXPECT_EQ(d.source, RouterSource::trained);
}

TEST(TrainedRouter, MalformedReplyFailsSafe) {
  StubServer server([](httplib::Server& s) {
    s.Post("/route", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(R"({"use_sot": "yes"})", "application/json");
    });
    s.Post("/err/route", [](const httplib::Request&, httplib::Response& res) {
      res.status = 503;
    });
  });
  EXPECT_EQ(route_trained(kQ, server.url()).raw, "unavailable");
  EXPECT_FALSE(route_trained(kQ, server.url("/err")).use_sot);
}

TEST(HumanLabelRouter, LabelsThenAnnotationThenNormal) {
  HumanLabelRouter router({{"q1", true}});
  EXPECT_TRUE(router.route(kQ).use_sot);
  QuestionRecord annotated{"q2", "math", "x", true};
  EXPECT_TRUE(router.route(annotated).use_sot);
  QuestionRecord bare{"q3", "math", "x", std::nullopt};
  auto d = router.route(bare);
  EXPECT_FALSE(d.use_sot);
  EXPECT_EQ(d.raw, "unlabeled");
}

TEST(HeuristicRouter, LengthAndOperators) {
  HeuristicRouter router(4);
  EXPECT_TRUE(router.route({"a", "generic", "What are some tips for saving energy at home?", {}}).use_sot);
  EXPECT_FALSE(router.route({"b", "math", "Compute 3 + 4 for the next steps please", {}}).use_sot);
  EXPECT_FALSE(router.route({"c", "math", "Is 10-3 equal to seven or not really?", {}}).use_sot);
  EXPECT_TRUE(router.route({"d", "generic", "Name some well-known long-distance trails worldwide", {}}).use_sot);
  EXPECT_FALSE(router.route({"e", "generic", "Hi", {}}).use_sot);
}

class FixedRouter final : public Router {
 public:
  FixedRouter(bool use_sot, Duration latency) : use_sot_(use_sot), latency_(latency) {}
  RouterDecision route(const QuestionRecord& q) override {
    RouterDecision d;
    d.question_id = q.id;
    d.use_sot = use_sot_;
    d.router_latency = latency_;
    return d;
  }

 private:
  bool use_sot_;
  Duration latency_;
};

bool has_stage(const std::vector<CallRecord>& calls, Stage s) {
  for (const auto& c : calls) {
    if (c.stage == s) return true;
  }
  return false;
}

TEST(RunSotR, NormalBranchIssuesNoSkeleton) {
  MockBackend backend(testing::three_point_script(kQ.text));
  auto prompts = PromptLibrary::builtin();
  auto profile = chat_profile();
  Pipeline pipeline(prompts, profile, backend);
  FixedRouter router(false, 250ms);
  auto r = run_sot_r(kQ, pipeline, router);
  ASSERT_FALSE(r.used_sot());
  EXPECT_EQ(backend.calls(), 1u);
  EXPECT_EQ(r.total_latency, 250ms + 6s);
  EXPECT_FALSE(has_stage(std::get<NormalAnswer>(r.answer).calls, Stage::skeleton));
}

TEST(RunSotR, SotBranchAddsRouterLatency) {
  MockBackend backend(testing::three_point_script(kQ.text));
  auto prompts = PromptLibrary::builtin();
  auto profile = chat_profile();
  Pipeline pipeline(prompts, profile, backend);
  FixedRouter router(true, 250ms);
  auto r = run_sot_r(kQ, pipeline, router);
  ASSERT_TRUE(r.used_sot());
  EXPECT_EQ(r.total_latency, 250ms + 3200ms);
  EXPECT_EQ(backend.calls(), 4u);
  EXPECT_FALSE(r.decision.fallback);
}

TEST(RunSotR, EmptySkeletonFallsBackToNormal) {
  MockScript script;
  testing::script_question(script, kQ.text, {"normal text", 10, 0.1}, {"", 5, 0.1}, {});
  MockBackend backend(script);
  auto prompts = PromptLibrary::builtin();
  auto profile = chat_profile();
  Pipeline pipeline(prompts, profile, backend);
  FixedRouter router(true, 100ms);
  auto r = run_sot_r(kQ, pipeline, router);
  ASSERT_FALSE(r.used_sot());
  EXPECT_TRUE(r.decision.fallback);
  ASSERT_EQ(r.overhead_calls.size(), 1u);
  EXPECT_EQ(r.overhead_calls[0].stage, Stage::skeleton);
  EXPECT_EQ(r.total_latency, 100ms + 500ms + 1s);
  EXPECT_EQ(std::get<NormalAnswer>(r.answer).text, "normal text");
}

TEST(RunSotR, PromptingRouterCallIsOverhead) {
  auto script = testing::three_point_script(kQ.text);
  script.entries.push_back(contains_entry({testing::kRouterNeedle}, "C", 0.1, 1));
  MockBackend backend(script);
  auto prompts = PromptLibrary::builtin();
  auto profile = chat_profile();
  Pipeline pipeline(prompts, profile, backend);
  PromptingRouter router(prompts, backend);
  auto r = run_sot_r(kQ, pipeline, router);
  EXPECT_FALSE(r.used_sot());
  ASSERT_EQ(r.overhead_calls.size(), 1u);
  EXPECT_EQ(r.overhead_calls[0].stage, Stage::router);
  EXPECT_EQ(r.total_latency, 100ms + 6s);
}

std::vector<RouterDecision> decisions(const std::vector<bool>& v) {
  std::vector<RouterDecision> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    RouterDecision d;
    d.question_id = "q" + std::to_string(i);
    d.use_sot = v[i];
    out.push_back(d);
  }
  return out;
}

TEST(Confusion, ToyExample) {
  auto m = confusion(decisions({true, false, true, false}), decisions({true, true, false, false}));
  EXPECT_EQ(m, (ConfusionMatrix{1, 1, 1, 1}));
  EXPECT_EQ(m.total(), 4u);
}

TEST(Confusion, IdenticalVectorsAgreePerfectly) {
  auto v = decisions({true, true, false, true, false});
  auto m = confusion(v, v);
  EXPECT_EQ(m.fp, 0u);
  EXPECT_EQ(m.fn, 0u);
  EXPECT_EQ(m.total(), 5u);
}

TEST(Confusion, IdMismatchIsError) {
  auto ref = decisions({true, false});
  auto cand = decisions({true, false});
  cand[1].question_id = "other";
  EXPECT_THROW(confusion(ref, cand), IntegrityError);
  EXPECT_THROW(confusion(ref, decisions({true})), IntegrityError);
  auto dup = decisions({true, false});
  dup[1].question_id = dup[0].question_id;
  EXPECT_THROW(confusion(dup, dup), IntegrityError);
}

}  // namespace
}  // namespace sot
