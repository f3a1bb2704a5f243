#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "retrorag/corpus.hpp"

namespace retrorag {

struct SourceEvidence {
    Passage passage;
    double relevance = 0.0;
    std::size_t first_seen_iteration = 0;
    std::string origin_query;
};

struct InferentialEvidence {
    std::string claim;
    double qr = 0.0;
    double ra = 0.0;
    double relevance = 0.0;
    std::vector<std::string> supports;  // passage ids of E_s at creation
    std::size_t created_iteration = 0;
};

struct EvidenceStore {
    std::vector<SourceEvidence> source;
    std::vector<InferentialEvidence> inferential;
};

// "(title) text" as shown to the model.
std::string format_passage(const Passage& p);
// "[1] (title) text" lines, or "(none)".
std::string format_sources(const std::vector<SourceEvidence>& sources);
// "- claim" lines, or "(none)".
std::string format_claims(const std::vector<InferentialEvidence>& claims);
// Answering context: facts first, then passages.
std::string format_evidence_block(const std::vector<SourceEvidence>& sources,
                                  const std::vector<InferentialEvidence>& claims);

// Whitespace-collapsed, case-folded claim; the dedup key for inferential evidence.
std::string claim_key(const std::string& claim);

nlohmann::json to_json(const SourceEvidence& e);
nlohmann::json to_json(const InferentialEvidence& e);
nlohmann::json to_json(const EvidenceStore& store);

}  // namespace retrorag
