#include "retrorag/evidence.hpp"

#include "retrorag/text.hpp"

namespace retrorag {

std::string format_passage(const Passage& p) {
    if (p.title.empty()) return p.text;
    return "(" + p.title + ") " + p.text;
}

std::string format_sources(const std::vector<SourceEvidence>& sources) {
    if (sources.empty()) return "(none)";
    std::string out;
    for (std::size_t i = 0; i < sources.size(); ++i) {
        if (i) out += '\n';
        out += "[" + std::to_string(i + 1) + "] " + format_passage(sources[i].passage);
    }
    return out;
}

std::string format_claims(const std::vector<InferentialEvidence>& claims) {
    if (claims.empty()) return "(none)";
    std::string out;
    for (std::size_t i = 0; i < claims.size(); ++i) {
        if (i) out += '\n';
        out += "- " + claims[i].claim;
    }
    return out;
}

std::string format_evidence_block(const std::vector<SourceEvidence>& sources,
                                  const std::vector<InferentialEvidence>& claims) {
    return "Facts:\n" + format_claims(claims) + "\nPassages:\n" + format_sources(sources);
}

std::string claim_key(const std::string& claim) { return collapse_whitespace(to_lower_utf8(claim)); }

nlohmann::json to_json(const SourceEvidence& e) {
    return {{"passage_id", e.passage.passage_id},
            {"relevance", e.relevance},
            {"first_seen_iteration", e.first_seen_iteration},
            {"origin_query", e.origin_query}};
}

nlohmann::json to_json(const InferentialEvidence& e) {
    return {{"claim", e.claim},       {"qr", e.qr},
            {"ra", e.ra},             {"relevance", e.relevance},
            {"supports", e.supports}, {"created_iteration", e.created_iteration}};
}

nlohmann::json to_json(const EvidenceStore& store) {
    auto source = nlohmann::json::array();
    for (const auto& e : store.source) source.push_back(to_json(e));
    auto inferential = nlohmann::json::array();
    for (const auto& e : store.inferential) inferential.push_back(to_json(e));
    return {{"source", std::move(source)}, {"inferential", std::move(inferential)}};
}

}  // namespace retrorag
