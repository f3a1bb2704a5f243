#include <gtest/gtest.h>

#include "retrorag/error.hpp"
#include "retrorag/evaluators.hpp"
#include "retrorag/trace.hpp"
#include "test_support.hpp"

namespace retrorag {
namespace {

using testing::yes_rule;

struct Fixture {
    explicit Fixture(std::vector<ScriptedRule> rules) : client(std::move(rules)) {}
    ScriptedClient client;
    PromptRegistry prompts;
    Trace trace{"q"};
    ModelContext ctx{client, prompts, &trace};
};

SourceEvidence source(std::string id, std::string text) {
    SourceEvidence s;
    s.passage.passage_id = std::move(id);
    s.passage.text = std::move(text);
    return s;
}

TEST(SelfConsistency, NormalizedYesShare) {
    // 0.1 / (0.1 + 0.8) and 0.99 / (0.99 + 0.01)
    Fixture f({yes_rule("sc_eval", "Answer B: Paris", 0.1, 0.8), yes_rule("sc_eval", "", 0.99, 0.01)});
    EXPECT_NEAR(self_consistency_score(f.ctx, "Lyon", "Paris", "q").value, 0.1 / 0.9, 1e-12);
    EXPECT_NEAR(self_consistency_score(f.ctx, "Lyon", "Lyon", "q").value, 0.99, 1e-12);
    EXPECT_EQ(f.trace.count("score"), 2u);
    EXPECT_THROW(self_consistency_score(f.ctx, " ", "Lyon", "q"), PreconditionError);
}

TEST(Relevance, SourceAndInferentialUseTheirOwnQueries) {
    Fixture f({yes_rule("evidence_score", "Query: q [SEP] follow", 0.5, 0.5), yes_rule("evidence_score", "", 0.2)});
    EXPECT_NEAR(source_relevance_score(f.ctx, source("d#0", "text"), "q [SEP] follow").value, 0.5, 1e-12);
    InferentialEvidence claim;
    claim.claim = "A is B.";
    EXPECT_NEAR(inferential_relevance_score(f.ctx, claim, "q").value, 0.2, 1e-12);
    EXPECT_THROW(source_relevance_score(f.ctx, source("d#1", " "), "q"), PreconditionError);
}

TEST(Gates, QrSeesPriorClaimsAndRaSeesSources) {
    Fixture f({yes_rule("qr_gate", "- known fact", 0.7), yes_rule("qr_gate", "", 0.3),
               yes_rule("ra_gate", "[1] text one", 0.9)});
    InferentialEvidence cand;
    cand.claim = "new";
    InferentialEvidence prior;
    prior.claim = "known fact";
    EXPECT_NEAR(question_relevance_gate(f.ctx, cand, {prior}, "q").value, 0.7, 1e-12);
    EXPECT_NEAR(question_relevance_gate(f.ctx, cand, {}, "q").value, 0.3, 1e-12);
    EXPECT_NEAR(reference_attribution_gate(f.ctx, cand, {source("d#0", "text one")}).value, 0.9, 1e-12);
    EXPECT_THROW(reference_attribution_gate(f.ctx, cand, {}), PreconditionError);
}

TEST(Gates, StrictThreshold) {
    EXPECT_TRUE(passes_gates(0.51, 0.99));
    EXPECT_FALSE(passes_gates(0.5, 0.99));
    EXPECT_FALSE(passes_gates(0.99, 0.5));
    EXPECT_FALSE(passes_gates(0.2, 0.9));
    EXPECT_TRUE(passes_gates(std::nextafter(0.5, 1.0), std::nextafter(0.5, 1.0)));
    static_assert(!passes_gates(0.5, 0.5));
}

}  // namespace
}  // namespace retrorag
