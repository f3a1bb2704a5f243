#include <algorithm>

#include <gtest/gtest.h>

#include "retrorag/ellery.hpp"
#include "retrorag/error.hpp"
#include "retrorag/trace.hpp"
#include "test_support.hpp"

namespace retrorag {
namespace {

using testing::text_rule;
using testing::yes_rule;

struct Fixture {
    explicit Fixture(std::vector<ScriptedRule> rules) : client(std::move(rules)) {}
    ScriptedClient client;
    PromptRegistry prompts;
    Trace trace{"q"};
    ModelContext ctx{client, prompts, &trace};
};

// Eight single-passage documents m0..m7, all containing "shared".
CorpusIndex marker_index() {
    std::vector<Document> docs;
    for (int i = 0; i < 8; ++i) {
        docs.push_back({"m" + std::to_string(i), "", "marker" + std::to_string(i) + " shared" + std::string(i, '!')});
    }
    IndexOptions o;
    o.index_titles = false;
    return CorpusIndex::build(docs, o);
}

SourceEvidence stored(const CorpusIndex& index, int i, double relevance, std::size_t seen) {
    return {index.passage(make_passage_id("m" + std::to_string(i), 0)), relevance, seen, "old"};
}

TEST(MatchingQuery, FirstRoundIsTheQuestion) {
    EXPECT_EQ(make_matching_query("q", "q", 1), "q");
    EXPECT_EQ(make_matching_query("q", "follow up", 2), "q [SEP] follow up");
}

TEST(Collate, KeepsTopFiveOfEightCandidates) {
    const auto index = marker_index();
    const double rel[8] = {0.3, 0.9, 0.1, 0.8, 0.6, 0.2, 0.7, 0.4};
    std::vector<ScriptedRule> rules;
    for (int i = 0; i < 8; ++i) rules.push_back(yes_rule("evidence_score", "Evidence: marker" + std::to_string(i) + " ", rel[i]));
    Fixture f(rules);
    EvidenceStore store;
    for (int i : {5, 6, 7}) store.source.push_back(stored(index, i, 0.99, 1));  // stale scores are replaced
    const auto r = collate(f.ctx, store, "q", "shared", 2, index, 5, 5);
    EXPECT_EQ(r.matching_query, "q [SEP] shared");
    ASSERT_EQ(r.retrieved.size(), 5u);
    ASSERT_EQ(r.source.size(), 5u);
    std::vector<std::string> ids;
    for (const auto& s : r.source) ids.push_back(s.passage.passage_id);
    EXPECT_EQ(ids, (std::vector<std::string>{"m1#0", "m3#0", "m6#0", "m4#0", "m7#0"}));
    // Stored items keep their first-seen round.
    for (const auto& s : r.source) {
        if (s.passage.passage_id == "m6#0") EXPECT_EQ(s.first_seen_iteration, 1u);
    }
    EXPECT_EQ(f.trace.count("score"), 8u);
}

TEST(Collate, DeduplicatesByPassageId) {
    const auto index = marker_index();
    Fixture f({yes_rule("evidence_score", "", 0.5)});
    EvidenceStore store;
    store.source.push_back(stored(index, 0, 0.5, 1));
    const auto r = collate(f.ctx, store, "q", "marker0", 2, index, 5, 5);
    ASSERT_EQ(r.source.size(), 1u);
    EXPECT_EQ(r.source[0].first_seen_iteration, 1u);
}

TEST(Collate, RoundPreconditions) {
    const auto index = marker_index();
    Fixture f({yes_rule("evidence_score", "", 0.5)});
    EXPECT_THROW(collate(f.ctx, {}, "q", "q", 0, index, 5, 5), PreconditionError);
    EXPECT_THROW(collate(f.ctx, {}, "q", "other", 1, index, 5, 5), PreconditionError);
}

TEST(Collate, CacheAvoidsRescoring) {
    const auto index = marker_index();
    Fixture f({yes_rule("evidence_score", "", 0.5)});
    RelevanceCache cache;
    collate(f.ctx, {}, "shared", "shared", 1, index, 5, 5, &cache);
    const auto calls = f.client.calls();
    collate(f.ctx, {}, "shared", "shared", 1, index, 5, 5, &cache);
    EXPECT_EQ(f.client.calls(), calls);
    EXPECT_EQ(cache.size(), 5u);
}

TEST(RankAndTruncate, MatchesExhaustiveSort) {
    std::mt19937 rng(23);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<InferentialEvidence> items(rng() % 12);
        for (auto& it : items) {
            it.claim = "c" + std::to_string(rng() % 20);
            it.relevance = (rng() % 5) / 4.0;
            it.created_iteration = 1 + rng() % 3;
        }
        auto expected = items;
        std::sort(expected.begin(), expected.end(), [](const auto& a, const auto& b) {
            return std::tie(b.relevance, a.created_iteration, a.claim) < std::tie(a.relevance, b.created_iteration, b.claim);
        });
        const std::size_t cap = 1 + rng() % 6;
        if (expected.size() > cap) expected.resize(cap);
        rank_and_truncate(items, cap);
        ASSERT_EQ(items.size(), expected.size());
        for (std::size_t i = 0; i < items.size(); ++i) {
            EXPECT_EQ(items[i].claim, expected[i].claim);
            EXPECT_EQ(items[i].relevance, expected[i].relevance);
        }
    }
}

TEST(ParseClaims, StripsMarkersAndCitations) {
    const auto c = parse_candidate_claims("1. A is B. [1]\n- C is D [2, 3]\n\nNONE\n* E [x]\nF\nG", 4);
    ASSERT_EQ(c.size(), 4u);
    EXPECT_EQ(c[0].claim, "A is B.");
    EXPECT_EQ(c[0].cited, (std::vector<std::size_t>{1}));
    EXPECT_EQ(c[1].claim, "C is D");
    EXPECT_EQ(c[1].cited, (std::vector<std::size_t>{2, 3}));
    EXPECT_EQ(c[2].claim, "E [x]");
    EXPECT_TRUE(c[2].cited.empty());
    EXPECT_EQ(c[3].claim, "F");
    EXPECT_TRUE(parse_candidate_claims("NONE", 8).empty());
}

EvidenceStore discovery_store(const CorpusIndex& index) {
    EvidenceStore store;
    store.source = {stored(index, 0, 0.9, 1), stored(index, 1, 0.8, 1)};
    for (int i = 0; i < 3; ++i) {
        InferentialEvidence e;
        e.claim = "prior" + std::to_string(i);
        e.supports = {"m0#0"};
        e.created_iteration = 1;
        store.inferential.push_back(e);
    }
    return store;
}

TEST(Discover, MergesThreePriorAndFourNewIntoFive) {
    const auto index = marker_index();
    Fixture f({text_rule("ie_generate", "", "new0 [1]\nnew1 [2]\nnew2\nnew3 [9]"),
               yes_rule("qr_gate", "", 0.9), yes_rule("ra_gate", "", 0.9),
               yes_rule("evidence_score", "Evidence: prior0", 0.95), yes_rule("evidence_score", "Evidence: prior1", 0.2),
               yes_rule("evidence_score", "Evidence: prior2", 0.6), yes_rule("evidence_score", "Evidence: new0", 0.7),
               yes_rule("evidence_score", "Evidence: new1", 0.1), yes_rule("evidence_score", "Evidence: new2", 0.6),
               yes_rule("evidence_score", "Evidence: new3", 0.85)});
    const auto store = discovery_store(index);
    DiscoveryStats stats;
    const auto out = discover(f.ctx, store, "q", "q [SEP] s", {"A"}, 2, 5, 8, nullptr, &stats);
    std::vector<std::string> claims;
    for (const auto& e : out) claims.push_back(e.claim);
    // prior2 and new2 tie at 0.6; the earlier round wins.
    EXPECT_EQ(claims, (std::vector<std::string>{"prior0", "new3", "new0", "prior2", "new2"}));
    EXPECT_EQ(stats.candidates, 4u);
    EXPECT_EQ(stats.survivors, 4u);
    EXPECT_EQ(f.trace.events_of("score").size(), 4u * 2 + 7u);  // gates for new items only, relevance for all
    for (const auto& e : out) {
        if (e.claim == "new0") EXPECT_EQ(e.supports, (std::vector<std::string>{"m0#0"}));
        if (e.claim == "new3") EXPECT_EQ(e.supports, (std::vector<std::string>{"m0#0", "m1#0"}));
    }
}

TEST(Discover, GateFailuresAreDiscarded) {
    const auto index = marker_index();
    Fixture f({text_rule("ie_generate", "", "keep\nbad qr\nbad ra\nedge"),
               yes_rule("qr_gate", "Statement: bad qr", 0.2), yes_rule("qr_gate", "Statement: edge", 0.5),
               yes_rule("qr_gate", "", 0.9),
               yes_rule("ra_gate", "Statement: bad ra", 0.3), yes_rule("ra_gate", "", 0.9),
               yes_rule("evidence_score", "", 0.5)});
    EvidenceStore store;
    store.source = {stored(index, 0, 0.9, 1)};
    const auto out = discover(f.ctx, store, "q", "q", {}, 1, 5, 8);
    ASSERT_EQ(out.size(), 1u);
    EXPECT_EQ(out[0].claim, "keep");
    // QR failures never reach the RA gate.
    std::size_t ra_calls = 0;
    for (const auto& e : f.trace.events_of("llm_call")) ra_calls += e["role"] == "ra_gate";
    EXPECT_EQ(ra_calls, 2u);
}

TEST(Discover, DuplicatesOfPriorClaimsAreSkipped) {
    const auto index = marker_index();
    Fixture f({text_rule("ie_generate", "", "PRIOR0\n  prior1  "), yes_rule("*", "", 0.9)});
    const auto out = discover(f.ctx, discovery_store(index), "q", "q", {}, 2, 5, 8);
    EXPECT_EQ(out.size(), 3u);
    EXPECT_EQ(f.trace.count("gate"), 2u);
    EXPECT_EQ(f.trace.events_of("gate")[0]["skipped"], "duplicate");
}

TEST(Discover, NoSourcesMeansNoCall) {
    Fixture f({});
    EvidenceStore store;
    EXPECT_TRUE(discover(f.ctx, store, "q", "q", {}, 1, 5, 8).empty());
    EXPECT_EQ(f.client.calls(), 0u);
    EXPECT_EQ(f.trace.count("warning"), 1u);
}

TEST(Requery, StripsPrefixAndFallsBack) {
    Fixture ok({text_rule("requery", "", "Search query: \"Alex Ferguson manager\"")});
    EXPECT_EQ(generate_requery(ok.ctx, {}, {}, "", "q"), "Alex Ferguson manager");
    Fixture reask({text_rule("requery", "Your previous reply was empty", "second try"), text_rule("requery", "", "  ")});
    EXPECT_EQ(generate_requery(reask.ctx, {}, {}, "why", "q"), "second try");
    Fixture empty({text_rule("requery", "", "")});
    EXPECT_EQ(generate_requery(empty.ctx, {}, {}, "why", "the question"), "the question");
    EXPECT_EQ(empty.trace.events_of("requery")[0]["fallback"], true);
    EXPECT_EQ(empty.client.calls(), 2u);
}

}  // namespace
}  // namespace retrorag
