#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "retrorag/corpus.hpp"
#include "retrorag/evaluators.hpp"
#include "retrorag/evidence.hpp"

namespace retrorag {

inline constexpr std::string_view kQuerySeparator = " [SEP] ";

// q for the first round, "q [SEP] q_s" afterwards.
std::string make_matching_query(const std::string& question, const std::string& previous_search_query,
                                std::size_t round);

// Relevance scores keyed by (item, query). Lives for one question.
class RelevanceCache {
public:
    std::optional<double> find(const std::string& item, const std::string& query) const;
    void put(const std::string& item, const std::string& query, double value);
    std::size_t size() const { return values_.size(); }

private:
    std::map<std::pair<std::string, std::string>, double> values_;
};

// Sort by relevance descending, then iteration ascending, then text; keep the
// first capacity items.
void rank_and_truncate(std::vector<SourceEvidence>& items, std::size_t capacity);
void rank_and_truncate(std::vector<InferentialEvidence>& items, std::size_t capacity);

struct CollationResult {
    std::vector<SourceEvidence> source;  // E_s for this round
    std::string matching_query;
    std::vector<Hit> retrieved;
};

// Retrieve with the previous search query, merge with stored source evidence
// (dedup by passage id), score every candidate against the matching query,
// keep the top `capacity`.
CollationResult collate(ModelContext& ctx, const EvidenceStore& store, const std::string& question,
                        const std::string& previous_search_query, std::size_t round, const CorpusIndex& index,
                        std::size_t retrieval_k, std::size_t capacity, RelevanceCache* cache = nullptr);

struct CandidateClaim {
    std::string claim;
    std::vector<std::size_t> cited;  // 1-based passage numbers, as written by the model
};

// One claim per line; list markers and trailing "[1, 2]" citations are
// stripped; "NONE" and blank lines are ignored. At most `cap` claims.
std::vector<CandidateClaim> parse_candidate_claims(std::string_view text, std::size_t cap);

struct DiscoveryStats {
    std::size_t candidates = 0;
    std::size_t survivors = 0;
};

// Deduce candidate claims from the current source evidence, gate them, merge
// with the prior inferential evidence and keep the top `capacity` by
// relevance to the original question. Prior items are not re-gated.
std::vector<InferentialEvidence> discover(ModelContext& ctx, const EvidenceStore& store,
                                          const std::string& question, const std::string& matching_query,
                                          const std::vector<std::string>& key_entities, std::size_t round,
                                          std::size_t capacity, std::size_t candidate_cap,
                                          RelevanceCache* cache = nullptr, DiscoveryStats* stats = nullptr);

// One search query for the missing information; falls back to the question.
std::string generate_requery(ModelContext& ctx, const std::vector<SourceEvidence>& sources,
                             const std::vector<InferentialEvidence>& claims, const std::string& reason,
                             const std::string& question);

}  // namespace retrorag
