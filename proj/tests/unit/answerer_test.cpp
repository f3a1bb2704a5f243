#include <gtest/gtest.h>

#include "retrorag/answerer.hpp"
#include "retrorag/error.hpp"
#include "retrorag/trace.hpp"
#include "test_support.hpp"

namespace retrorag {
namespace {

using testing::error_rule;
using testing::text_rule;
using testing::yes_rule;

struct Fixture {
    explicit Fixture(std::vector<ScriptedRule> rules) : client(std::move(rules)) {}
    ScriptedClient client;
    PromptRegistry prompts;
    Trace trace{"q"};
    ModelContext ctx{client, prompts, &trace};
};

TEST(ParseAnswer, AcceptsBothLayouts) {
    auto a = parse_answer_reply("Answer: Alex Ferguson | Reason: he was the manager.");
    ASSERT_TRUE(a);
    EXPECT_EQ(a->answer, "Alex Ferguson");
    EXPECT_EQ(a->reason, "he was the manager.");
    auto b = parse_answer_reply("Let me think.\n**Answer:** Paris\nReason: capital\n of France");
    ASSERT_TRUE(b);
    EXPECT_EQ(b->answer, "Paris");
    EXPECT_EQ(b->reason, "capital of France");
    EXPECT_FALSE(parse_answer_reply("Paris"));
    EXPECT_FALSE(parse_answer_reply("Answer: | Reason: x"));
    EXPECT_FALSE(parse_answer_reply("Answer: x | Reason:"));
}

TEST(ParseDirect, AnswerPrefixOrFirstLine) {
    EXPECT_EQ(*parse_direct_reply("Answer: 1924"), "1924");
    EXPECT_EQ(*parse_direct_reply("\n  Paris \nmore"), "Paris");
    EXPECT_EQ(*parse_direct_reply("Answer: X | Reason: y"), "X");
    EXPECT_FALSE(parse_direct_reply("  \n "));
}

TEST(GenerateAnswer, ReasksOnceWithFormatReminder) {
    Fixture f({text_rule("cot_answer", "did not follow the required format", "Answer: Bergen | Reason: passage 1"),
               text_rule("cot_answer", "", "I think it is Bergen")});
    const auto a = generate_answer(f.ctx, "q", {}, {});
    EXPECT_EQ(a.answer, "Bergen");
    EXPECT_EQ(f.client.calls(), 2u);
    EXPECT_EQ(f.trace.events_of("answer")[0]["reasked"], true);
}

TEST(GenerateAnswer, FallsBackToRawText) {
    Fixture f({text_rule("cot_answer", "", "  Bergen,   probably ")});
    const auto a = generate_answer(f.ctx, "q", {}, {});
    EXPECT_EQ(a.answer, "Bergen, probably");
    EXPECT_EQ(a.reason, "");
    EXPECT_EQ(f.trace.count("warning"), 1u);
}

TEST(GenerateAnswer, EvidenceBlockListsFactsThenPassages) {
    Fixture f({text_rule("cot_answer", "Facts:\n- fact one\nPassages:\n[1] (T) body", "Answer: ok | Reason: r"),
               text_rule("cot_answer", "", "Answer: wrong | Reason: r")});
    SourceEvidence s;
    s.passage = {"d#0", "d", 0, "T", "body", 1};
    InferentialEvidence c;
    c.claim = "fact one";
    EXPECT_EQ(generate_answer(f.ctx, "q", {s}, {c}).answer, "ok");
}

TEST(ScAnswer, UsesHighTemperature) {
    Fixture f({text_rule("direct_answer", "", "Answer: Lyon")});
    f.ctx.temp_high = 0.9;
    EXPECT_EQ(generate_sc_answer(f.ctx, "q", {}, {}), "Lyon");
    EXPECT_EQ(f.trace.events_of("llm_call")[0]["temperature"], 0.9);
}

TEST(Decide, StrictAndMonotone) {
    EXPECT_EQ(decide(0.7, 0.7), Decision::continue_search);
    EXPECT_EQ(decide(std::nextafter(0.7, 1.0), 0.7), Decision::accept);
    EXPECT_EQ(decide(0.9, 0.7), Decision::accept);
    EXPECT_EQ(decide(0.111, 0.7), Decision::continue_search);
    for (double s = 0.0; s <= 1.0; s += 0.05) {
        for (double t = 0.05; t < 1.0; t += 0.05) {
            if (decide(s, t) == Decision::accept) {
                EXPECT_EQ(decide(s + 0.05, t), Decision::accept);
                EXPECT_EQ(decide(s, t - 0.04), Decision::accept);
            }
        }
    }
}

TEST(Assess, ThresholdMustBeOpenUnitInterval) {
    Fixture f({yes_rule("sc_eval", "", 0.9)});
    EXPECT_THROW(assess(f.ctx, "a", "b", "q", 1.0), ConfigError);
    EXPECT_THROW(assess(f.ctx, "a", "b", "q", 0.0), ConfigError);
    EXPECT_EQ(assess(f.ctx, "a", "b", "q", 0.7).decision, Decision::accept);
    const auto empty = assess(f.ctx, "", "b", "q", 0.7);
    EXPECT_EQ(empty.s_sc, 0.0);
    EXPECT_EQ(empty.decision, Decision::continue_search);
}

TEST(Standardize, ShortensOrKeepsInput) {
    Fixture f({text_rule("declarative", "Answer: It opened in May 1932.", "\"May 1932.\""),
               text_rule("declarative", "Answer: blank", "   "),
               error_rule("declarative", "Answer: broken", "protocol")});
    EXPECT_EQ(standardize_answer(f.ctx, "q", "It opened in May 1932."), "May 1932");
    EXPECT_EQ(standardize_answer(f.ctx, "q", "blank"), "blank");
    EXPECT_EQ(standardize_answer(f.ctx, "q", "broken"), "broken");
    EXPECT_EQ(standardize_answer(f.ctx, "q", ""), "");
}

}  // namespace
}  // namespace retrorag
