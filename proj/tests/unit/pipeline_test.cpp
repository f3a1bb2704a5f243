#include <gtest/gtest.h>

#include "retrorag/error.hpp"
#include "retrorag/pipeline.hpp"
#include "test_support.hpp"

namespace retrorag {
namespace {

using testing::error_rule;
using testing::coach_documents;
using testing::coach_rules;
using testing::kCoachQuestion;
using testing::text_rule;
using testing::yes_rule;

struct Harness {
    explicit Harness(std::vector<ScriptedRule> rules, RunConfig config = {})
        : index(CorpusIndex::build(coach_documents())), client(std::move(rules)), pipeline(index, client, prompts, config) {}
    CorpusIndex index;
    ScriptedClient client;
    PromptRegistry prompts;
    Pipeline pipeline;
};

std::size_t llm_calls_for(const Trace& t, std::string_view role) {
    std::size_t n = 0;
    for (const auto& e : t.events_of("llm_call")) n += e["role"] == role;
    return n;
}

std::vector<ScriptedRule> always(double sc, std::string answer = "Paris") {
    return {text_rule("cot_answer", "", "Answer: " + answer + " | Reason: r"),
            text_rule("direct_answer", "", "Answer: " + answer),
            yes_rule("sc_eval", "", sc),
            yes_rule("evidence_score", "", 0.5),
            text_rule("ie_generate", "", "Paris hosted the 1924 Olympics. [1]"),
            yes_rule("qr_gate", "", 0.9),
            yes_rule("ra_gate", "", 0.9),
            text_rule("requery", "", "more about Paris"),
            text_rule("declarative", "", answer),
            text_rule("key_entities", "", "Paris")};
}

TEST(KeyEntities, ModelDatasetAndFailure) {
    Harness h(coach_rules());
    Trace trace;
    ModelContext ctx{h.client, h.prompts, &trace};
    const auto e = extract_key_entities(ctx, {"q", kCoachQuestion, std::nullopt});
    EXPECT_NE(std::find(e.begin(), e.end(), "Beckham"), e.end());
    EXPECT_NE(std::find(e.begin(), e.end(), "Manchester United"), e.end());
    const std::vector<std::string> given = {"x", "y"};
    EXPECT_EQ(extract_key_entities(ctx, {"q", "anything", given}), given);
    ScriptedClient failing({error_rule("key_entities", "", "protocol")});
    ModelContext bad{failing, h.prompts, &trace};
    EXPECT_TRUE(extract_key_entities(bad, {"q", "anything", std::nullopt}).empty());
}

TEST(Run, AcceptsInRoundOneWithoutDiscovery) {
    Harness h(always(0.9));
    const auto r = h.pipeline.run({"q1", "Where were the 1924 Olympics?", std::nullopt});
    EXPECT_EQ(r.status, RunStatus::ok);
    EXPECT_TRUE(r.accepted);
    EXPECT_EQ(r.rounds_used, 1u);
    EXPECT_EQ(r.final_answer, "Paris");
    EXPECT_EQ(r.trace.count("discover"), 0u);
    EXPECT_EQ(r.trace.count("requery"), 0u);
    EXPECT_EQ(llm_calls_for(r.trace, "ie_generate"), 0u);
    EXPECT_EQ(llm_calls_for(r.trace, "key_entities"), 0u);
}

TEST(Run, ExhaustionReturnsBestRound) {
    auto rules = always(0.3);
    // Once the discovered fact is in context the answer changes and scores
    // higher, though still below t.
    rules.insert(rules.begin(), text_rule("declarative", "Answer: Lyon", "Lyon"));
    rules.insert(rules.begin(), yes_rule("sc_eval", "Answer A: Lyon", 0.6));
    rules.insert(rules.begin(), text_rule("cot_answer", "- Paris hosted", "Answer: Lyon | Reason: r"));
    RunConfig config;
    config.max_iterations = 4;
    Harness h(rules, config);
    const auto r = h.pipeline.run({"q1", "Where were the Summer Olympics of 1924?", std::nullopt});
    EXPECT_FALSE(r.accepted);
    EXPECT_EQ(r.rounds_used, 4u);
    EXPECT_EQ(r.history.size(), 4u);
    EXPECT_EQ(r.trace.count("round"), 4u);
    EXPECT_EQ(r.trace.count("discover"), 3u);
    EXPECT_EQ(r.trace.count("requery"), 3u);
    EXPECT_EQ(best_round(r.history), 1u);
    EXPECT_NEAR(r.best_s_sc, 0.6, 1e-12);
    EXPECT_EQ(r.final_answer, "Lyon");
    EXPECT_EQ(r.trace.events_of("final")[0]["answer_round"], 2);
}

TEST(Run, BestRoundPrefersEarliestTie) {
    std::vector<AnswerRecord> h(3);
    h[0].s_sc = 0.4;
    h[1].s_sc = 0.6;
    h[2].s_sc = 0.6;
    EXPECT_EQ(best_round(h), 1u);
}

TEST(Run, CoachExampleFlipsAfterDiscovery) {
    Harness h(coach_rules());
    const auto r = h.pipeline.run({"coach", kCoachQuestion, std::nullopt});
    ASSERT_EQ(r.status, RunStatus::ok) << r.error;
    ASSERT_EQ(r.history.size(), 2u);
    EXPECT_EQ(r.history[0].answer, "Eric Harrison");
    EXPECT_FALSE(r.history[0].accepted);
    EXPECT_EQ(r.history[1].answer, "Alex Ferguson");
    EXPECT_TRUE(r.accepted);
    EXPECT_EQ(r.final_answer, "Alex Ferguson");
    ASSERT_EQ(r.store.inferential.size(), 1u);
    EXPECT_EQ(r.store.inferential[0].claim, testing::kYouthCoachClaim);
    EXPECT_GT(r.best_s_sc, 0.7);
}

TEST(Run, AnsweringContextIsCurrentSourcesAndPreviousClaims) {
    Harness h(coach_rules());
    const auto r = h.pipeline.run({"coach", kCoachQuestion, std::nullopt});
    const auto events = r.trace.events();
    nlohmann::json last_claims = nlohmann::json::array();
    nlohmann::json current_sources;
    for (const auto& e : events) {
        if (e["kind"] == "store_snapshot" && e["phase"] == "collate") {
            current_sources = nlohmann::json::array();
            for (const auto& s : e["store"]["source"]) current_sources.push_back(s["passage_id"]);
        }
        if (e["kind"] == "answer_context") {
            EXPECT_EQ(e["context"]["source"], current_sources);
            EXPECT_EQ(e["context"]["inferential"], last_claims);
        }
        if (e["kind"] == "store_snapshot" && e["phase"] == "discover") {
            last_claims = nlohmann::json::array();
            for (const auto& c : e["store"]["inferential"]) last_claims.push_back(c["claim"]);
        }
    }
}

TEST(Run, NoDiscoveryOrRequeryAfterAccept) {
    Harness h(coach_rules());
    const auto r = h.pipeline.run({"coach", kCoachQuestion, std::nullopt});
    bool accepted = false;
    for (const auto& e : r.trace.events()) {
        if (e["kind"] == "assess" && e["decision"] == "accept") accepted = true;
        if (accepted) {
            EXPECT_NE(e["kind"], "discover");
            EXPECT_NE(e["kind"], "requery");
        }
    }
    EXPECT_TRUE(accepted);
}

TEST(Run, DeterministicTraces) {
    Harness a(coach_rules());
    Harness b(coach_rules());
    const Question q{"coach", kCoachQuestion, std::nullopt};
    EXPECT_EQ(a.pipeline.run(q).trace.to_jsonl(), b.pipeline.run(q).trace.to_jsonl());
    EXPECT_EQ(a.pipeline.run(q).trace.to_jsonl(), a.pipeline.run(q).trace.to_jsonl());
}

TEST(Run, SequenceNumbersIncrease) {
    Harness h(coach_rules());
    const auto events = h.pipeline.run({"coach", kCoachQuestion, std::nullopt}).trace.events();
    for (std::size_t i = 0; i < events.size(); ++i) EXPECT_EQ(events[i]["seq"], i);
    EXPECT_EQ(events.front()["kind"], "start");
    EXPECT_EQ(events.back()["kind"], "final");
}

TEST(Run, BackendFailureBecomesErrorStatus) {
    auto rules = always(0.3);
    rules.insert(rules.begin(), error_rule("requery", ""));
    Harness h(rules);
    const auto r = h.pipeline.run({"q1", "Where were the Summer Olympics of 1924?", std::nullopt});
    EXPECT_EQ(r.status, RunStatus::error);
    EXPECT_NE(r.error.find("transport"), std::string::npos);
    EXPECT_EQ(r.final_answer, "Paris");
    EXPECT_EQ(r.trace.events_of("final")[0]["status"], "error");
}

TEST(Run, DiscoverEveryRoundUsesFreshClaims) {
    RunConfig config;
    config.discover_every_round = true;
    Harness h(always(0.9), config);
    const auto r = h.pipeline.run({"q1", "Where were the Summer Olympics of 1924?", std::nullopt});
    EXPECT_TRUE(r.accepted);
    EXPECT_EQ(r.trace.count("discover"), 1u);
    EXPECT_EQ(r.trace.events_of("answer_context")[0]["context"]["inferential"].size(), 1u);
}

TEST(Run, SingleShotMode) {
    RunConfig config;
    config.mode = AnswerMode::single_shot;
    Harness h(always(0.1), config);
    const auto r = h.pipeline.run({"q1", "Paris Olympics", std::nullopt});
    EXPECT_EQ(r.rounds_used, 1u);
    EXPECT_EQ(r.final_answer, "Paris");
    EXPECT_EQ(llm_calls_for(r.trace, "evidence_score"), 0u);
    EXPECT_EQ(llm_calls_for(r.trace, "sc_eval"), 0u);
}

TEST(Run, EmptyQuestionIsAnError) {
    Harness h(always(0.9));
    EXPECT_EQ(h.pipeline.run({"q", "  ", std::nullopt}).status, RunStatus::error);
}

}  // namespace
}  // namespace retrorag
