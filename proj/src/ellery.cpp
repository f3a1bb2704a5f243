#include "retrorag/ellery.hpp"

#include <algorithm>
#include <set>

#include "retrorag/error.hpp"
#include "retrorag/text.hpp"
#include "retrorag/trace.hpp"

namespace retrorag {

std::string make_matching_query(const std::string& question, const std::string& previous_search_query,
                                std::size_t round) {
    if (round <= 1) return question;
    return question + std::string(kQuerySeparator) + previous_search_query;
}

std::optional<double> RelevanceCache::find(const std::string& item, const std::string& query) const {
    auto it = values_.find({item, query});
    if (it == values_.end()) return std::nullopt;
    return it->second;
}

void RelevanceCache::put(const std::string& item, const std::string& query, double value) {
    values_[{item, query}] = value;
}

void rank_and_truncate(std::vector<SourceEvidence>& items, std::size_t capacity) {
    std::stable_sort(items.begin(), items.end(), [](const SourceEvidence& a, const SourceEvidence& b) {
        if (a.relevance != b.relevance) return a.relevance > b.relevance;
        if (a.first_seen_iteration != b.first_seen_iteration) return a.first_seen_iteration < b.first_seen_iteration;
        if (a.passage.text != b.passage.text) return a.passage.text < b.passage.text;
        return a.passage.passage_id < b.passage.passage_id;
    });
    if (items.size() > capacity) items.resize(capacity);
}

void rank_and_truncate(std::vector<InferentialEvidence>& items, std::size_t capacity) {
    std::stable_sort(items.begin(), items.end(), [](const InferentialEvidence& a, const InferentialEvidence& b) {
        if (a.relevance != b.relevance) return a.relevance > b.relevance;
        if (a.created_iteration != b.created_iteration) return a.created_iteration < b.created_iteration;
        return a.claim < b.claim;
    });
    if (items.size() > capacity) items.resize(capacity);
}

namespace {

template <typename Item, typename ScoreFn>
double cached_score(ModelContext& ctx, RelevanceCache* cache, const std::string& key, const std::string& query,
                    std::string_view kind, ScoreFn&& score) {
    if (cache) {
        if (auto hit = cache->find(key, query)) {
            if (ctx.trace) {
                ctx.trace->emit("score", {{"score_kind", kind}, {"subject_id", key}, {"value", *hit}, {"cached", true}});
            }
            return *hit;
        }
    }
    const double value = score();
    if (cache) cache->put(key, query, value);
    return value;
}

std::string strip_list_marker(std::string_view line) {
    auto t = trim(line);
    if (!t.empty() && (t.front() == '-' || t.front() == '*')) return std::string(trim(t.substr(1)));
    if (t.starts_with("\xE2\x80\xA2")) return std::string(trim(t.substr(3)));  // bullet
    std::size_t digits = 0;
    while (digits < t.size() && t[digits] >= '0' && t[digits] <= '9') ++digits;
    if (digits > 0 && digits < t.size() && (t[digits] == '.' || t[digits] == ')')) {
        return std::string(trim(t.substr(digits + 1)));
    }
    return std::string(t);
}

// Splits a trailing "[1]" / "[1, 3]" citation off the claim.
std::vector<std::size_t> take_citations(std::string& claim) {
    std::vector<std::size_t> cited;
    auto t = std::string(trim(claim));
    if (t.empty() || t.back() != ']') return cited;
    const auto open = t.rfind('[');
    if (open == std::string::npos) return cited;
    const auto inside = t.substr(open + 1, t.size() - open - 2);
    std::size_t value = 0;
    bool in_number = false;
    for (char c : inside) {
        if (c >= '0' && c <= '9') {
            value = value * 10 + static_cast<std::size_t>(c - '0');
            in_number = true;
        } else if (c == ',' || c == ' ') {
            if (in_number) cited.push_back(value);
            value = 0;
            in_number = false;
        } else {
            return {};  // not a citation list
        }
    }
    if (in_number) cited.push_back(value);
    if (cited.empty()) return cited;
    claim = std::string(trim(std::string_view(t).substr(0, open)));
    return cited;
}

}  // namespace

CollationResult collate(ModelContext& ctx, const EvidenceStore& store, const std::string& question,
                        const std::string& previous_search_query, std::size_t round, const CorpusIndex& index,
                        std::size_t retrieval_k, std::size_t capacity, RelevanceCache* cache) {
    if (round == 0) throw PreconditionError("rounds are numbered from 1");
    if (round == 1 && previous_search_query != question) {
        throw PreconditionError("the first round must search with the question itself");
    }
    CollationResult result;
    result.matching_query = make_matching_query(question, previous_search_query, round);
    result.retrieved = index.retrieve(previous_search_query, retrieval_k);
    if (ctx.trace) {
        auto hits = nlohmann::json::array();
        for (const auto& h : result.retrieved) hits.push_back({{"passage_id", h.passage.passage_id}, {"bm25", h.score}});
        ctx.trace->emit("retrieve", {{"round", round}, {"query", previous_search_query}, {"k", retrieval_k}, {"hits", hits}});
    }

    std::vector<SourceEvidence> candidates = store.source;
    std::set<std::string> seen;
    for (const auto& c : candidates) seen.insert(c.passage.passage_id);
    for (const auto& h : result.retrieved) {
        if (!seen.insert(h.passage.passage_id).second) continue;
        candidates.push_back({h.passage, 0.0, round, previous_search_query});
    }
    for (auto& c : candidates) {
        c.relevance = cached_score<SourceEvidence>(ctx, cache, c.passage.passage_id, result.matching_query,
                                                   "source_relevance", [&] {
                                                       return source_relevance_score(ctx, c, result.matching_query).value;
                                                   });
    }
    rank_and_truncate(candidates, capacity);
    result.source = std::move(candidates);
    return result;
}

std::vector<CandidateClaim> parse_candidate_claims(std::string_view text, std::size_t cap) {
    std::vector<CandidateClaim> out;
    for (const auto& line : split_lines(text)) {
        if (out.size() >= cap) break;
        auto claim = strip_list_marker(line);
        if (claim.empty()) continue;
        const auto upper_trimmed = to_lower_utf8(claim);
        if (upper_trimmed == "none" || upper_trimmed == "none.") continue;
        CandidateClaim c;
        c.cited = take_citations(claim);
        c.claim = collapse_whitespace(claim);
        if (c.claim.empty()) continue;
        out.push_back(std::move(c));
    }
    return out;
}

std::vector<InferentialEvidence> discover(ModelContext& ctx, const EvidenceStore& store,
                                          const std::string& question, const std::string& matching_query,
                                          const std::vector<std::string>& key_entities, std::size_t round,
                                          std::size_t capacity, std::size_t candidate_cap, RelevanceCache* cache,
                                          DiscoveryStats* stats) {
    const auto& prior = store.inferential;
    if (store.source.empty()) {
        if (ctx.trace) ctx.trace->warn("discovery skipped: no source evidence", {{"round", round}});
        auto kept = prior;
        rank_and_truncate(kept, capacity);
        return kept;
    }

    std::string entities;
    for (const auto& e : key_entities) entities += (entities.empty() ? "" : "; ") + e;
    if (entities.empty()) entities = "(none given; use the entities of the question: " + question + ")";
    const auto prompt = ctx.prompts.render(RoleTag::ie_generate, {{"entities", entities},
                                                                  {"sources", format_sources(store.source)},
                                                                  {"max_claims", std::to_string(candidate_cap)}});
    GenerationParams params;
    params.temperature = ctx.temp_low;
    params.max_tokens = 512;
    const auto completion = ctx.llm.generate(prompt, params, ctx.trace);
    const auto candidates = parse_candidate_claims(completion.text, candidate_cap);
    if (candidates.empty() && ctx.trace) ctx.trace->warn("no candidate claims parsed", {{"round", round}});

    std::vector<std::string> all_support;
    for (const auto& s : store.source) all_support.push_back(s.passage.passage_id);

    std::set<std::string> keys;
    for (const auto& p : prior) keys.insert(claim_key(p.claim));

    std::vector<InferentialEvidence> merged = prior;
    std::size_t survivors = 0;
    for (const auto& cand : candidates) {
        InferentialEvidence item;
        item.claim = cand.claim;
        item.created_iteration = round;
        if (!keys.insert(claim_key(item.claim)).second) {
            if (ctx.trace) ctx.trace->emit("gate", {{"round", round}, {"claim", item.claim}, {"skipped", "duplicate"}});
            continue;
        }
        item.qr = question_relevance_gate(ctx, item, prior, matching_query).value;
        std::optional<double> ra;
        if (item.qr > kGateThreshold) ra = reference_attribution_gate(ctx, item, store.source).value;
        const bool passed = ra && passes_gates(item.qr, *ra);
        if (ctx.trace) {
            ctx.trace->emit("gate", {{"round", round},
                                     {"claim", item.claim},
                                     {"qr", item.qr},
                                     {"ra", ra ? nlohmann::json(*ra) : nlohmann::json()},
                                     {"passed", passed}});
        }
        if (!passed) continue;
        item.ra = *ra;
        for (auto n : cand.cited) {
            if (n >= 1 && n <= store.source.size()) item.supports.push_back(store.source[n - 1].passage.passage_id);
        }
        std::sort(item.supports.begin(), item.supports.end());
        item.supports.erase(std::unique(item.supports.begin(), item.supports.end()), item.supports.end());
        if (item.supports.empty()) item.supports = all_support;
        merged.push_back(std::move(item));
        ++survivors;
    }

    for (auto& item : merged) {
        item.relevance = cached_score<InferentialEvidence>(ctx, cache, claim_key(item.claim), question,
                                                           "inferential_relevance", [&] {
                                                               return inferential_relevance_score(ctx, item, question).value;
                                                           });
    }
    rank_and_truncate(merged, capacity);
    if (stats) *stats = {candidates.size(), survivors};
    if (ctx.trace) {
        ctx.trace->emit("discover", {{"round", round},
                                     {"candidates", candidates.size()},
                                     {"survivors", survivors},
                                     {"kept", merged.size()},
                                     {"template_hash", prompt.template_hash}});
    }
    return merged;
}

std::string generate_requery(ModelContext& ctx, const std::vector<SourceEvidence>& sources,
                             const std::vector<InferentialEvidence>& claims, const std::string& reason,
                             const std::string& question) {
    auto prompt = ctx.prompts.render(RoleTag::requery, {{"question", question},
                                                        {"known", format_claims(claims)},
                                                        {"sources", format_sources(sources)},
                                                        {"reason", reason.empty() ? "(no reason given)" : reason}});
    GenerationParams params;
    params.temperature = ctx.temp_low;
    params.max_tokens = 64;
    auto extract = [](const std::string& text) {
        for (const auto& line : split_lines(text)) {
            std::string q(trim(line));
            for (std::string_view prefix : {"search query:", "query:"}) {
                if (starts_with_icase(q, prefix)) q = std::string(trim(std::string_view(q).substr(prefix.size())));
            }
            if (q.size() >= 2 && q.front() == '"' && q.back() == '"') q = q.substr(1, q.size() - 2);
            q = std::string(trim(q));
            if (!q.empty()) return q;
        }
        return std::string{};
    };
    auto query = extract(ctx.llm.generate(prompt, params, ctx.trace).text);
    bool reasked = false;
    if (query.empty()) {
        reasked = true;
        prompt.user_text += "\n\n";
        prompt.user_text += kRequeryReminder;
        query = extract(ctx.llm.generate(prompt, params, ctx.trace).text);
    }
    const bool fallback = query.empty();
    if (fallback) {
        query = question;
        if (ctx.trace) ctx.trace->warn("re-query empty after re-ask; searching with the question");
    }
    if (ctx.trace) {
        auto ids = nlohmann::json::array();
        for (const auto& s : sources) ids.push_back(s.passage.passage_id);
        auto known = nlohmann::json::array();
        for (const auto& c : claims) known.push_back(c.claim);
        ctx.trace->emit("requery", {{"query", query},
                                    {"fallback", fallback},
                                    {"reasked", reasked},
                                    {"template_hash", prompt.template_hash},
                                    {"inputs", {{"question", question}, {"reason", reason}, {"sources", ids}, {"claims", known}}}});
    }
    return query;
}

}  // namespace retrorag
