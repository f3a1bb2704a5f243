#include "retrorag/pipeline.hpp"

#include <set>

#include "retrorag/ellery.hpp"
#include "retrorag/error.hpp"
#include "retrorag/text.hpp"

namespace retrorag {

namespace {

nlohmann::json context_json(const std::vector<SourceEvidence>& sources, const std::vector<InferentialEvidence>& claims) {
    auto ids = nlohmann::json::array();
    for (const auto& s : sources) ids.push_back(s.passage.passage_id);
    auto texts = nlohmann::json::array();
    for (const auto& c : claims) texts.push_back(c.claim);
    return {{"source", ids}, {"inferential", texts}};
}

void snapshot(Trace& trace, std::size_t round, std::string_view phase, const EvidenceStore& store) {
    trace.emit("store_snapshot", {{"round", round}, {"phase", phase}, {"store", to_json(store)}});
}

}  // namespace

std::vector<std::string> extract_key_entities(ModelContext& ctx, const Question& question) {
    if (question.key_entities) {
        if (ctx.trace) ctx.trace->emit("key_entities", {{"entities", *question.key_entities}, {"source", "dataset"}});
        return *question.key_entities;
    }
    if (trim(question.text).empty()) throw PreconditionError("question is empty");
    std::vector<std::string> entities;
    try {
        const auto prompt = ctx.prompts.render(RoleTag::key_entities, {{"question", question.text}});
        GenerationParams params;
        params.temperature = ctx.temp_low;
        params.max_tokens = 96;
        const auto completion = ctx.llm.generate(prompt, params, ctx.trace);
        std::set<std::string> seen;
        for (const auto& c : parse_candidate_claims(completion.text, 5)) {
            if (seen.insert(to_lower_utf8(c.claim)).second) entities.push_back(c.claim);
        }
    } catch (const Error& e) {
        if (ctx.trace) ctx.trace->warn("key entity extraction failed", {{"error", e.what()}});
        entities.clear();
    }
    if (ctx.trace) ctx.trace->emit("key_entities", {{"entities", entities}, {"source", "model"}});
    return entities;
}

std::size_t best_round(const std::vector<AnswerRecord>& history) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < history.size(); ++i) {
        if (history[i].s_sc > history[best].s_sc) best = i;
    }
    return best;
}

Pipeline::Pipeline(const CorpusIndex& index, LlmClient& llm, const PromptRegistry& prompts, RunConfig config)
    : index_(index), llm_(llm), prompts_(prompts), config_(config) {
    config_.validate();
}

RunResult Pipeline::run(const Question& question) const {
    RunResult result;
    result.trace = Trace(question.id);
    ModelContext ctx{llm_, prompts_, &result.trace, config_.temp_low, config_.temp_high};
    result.trace.emit("start", {{"question", question.text},
                                {"config", config_.to_json()},
                                {"config_hash", config_.hash()},
                                {"templates_hash", prompts_.registry_hash()},
                                {"backend", llm_.backend_name()}});
    try {
        if (trim(question.text).empty()) throw PreconditionError("question is empty");
        if (config_.mode == AnswerMode::single_shot) {
            run_single_shot(question, ctx, result);
        } else {
            run_retroactive(question, ctx, result);
        }
    } catch (const Error& e) {
        result.status = RunStatus::error;
        result.error = e.what();
        result.accepted = false;
        if (!result.history.empty()) {
            const auto& best = result.history[best_round(result.history)];
            result.final_answer = best.answer;
            result.best_s_sc = best.s_sc;
        }
        result.trace.emit("final", {{"status", "error"},
                                    {"error", result.error},
                                    {"answer", result.final_answer},
                                    {"rounds_used", result.rounds_used}});
    }
    return result;
}

void Pipeline::run_retroactive(const Question& question, ModelContext& ctx, RunResult& result) const {
    const auto& q = question.text;
    Trace& trace = *ctx.trace;
    EvidenceStore& store = result.store;
    RelevanceCache cache;
    std::string search_query = q;  // q_s^(0)
    std::optional<std::vector<std::string>> entities;
    auto ensure_entities = [&]() -> const std::vector<std::string>& {
        if (!entities) entities = extract_key_entities(ctx, question);
        return *entities;
    };

    auto finish = [&](const AnswerRecord& rec, bool accepted) {
        result.accepted = accepted;
        result.final_answer = standardize_answer(ctx, q, rec.answer);
        result.best_s_sc = result.history[best_round(result.history)].s_sc;
        trace.emit("final", {{"status", "ok"},
                             {"answer", result.final_answer},
                             {"raw_answer", rec.answer},
                             {"accepted", accepted},
                             {"rounds_used", result.rounds_used},
                             {"best_s_sc", result.best_s_sc},
                             {"answer_round", rec.iteration}});
    };

    for (std::size_t round = 1; round <= config_.max_iterations; ++round) {
        result.rounds_used = round;
        trace.emit("round", {{"round", round}, {"search_query", search_query}});

        auto collation = collate(ctx, store, q, search_query, round, index_, config_.retrieval_k,
                                 config_.source_capacity, &cache);
        store.source = std::move(collation.source);
        const auto& matching_query = collation.matching_query;
        snapshot(trace, round, "collate", store);

        if (config_.discover_every_round) {
            store.inferential = discover(ctx, store, q, matching_query, ensure_entities(), round,
                                         config_.inferential_capacity, config_.ie_candidate_cap, &cache);
            snapshot(trace, round, "discover", store);
        }

        // Round-L context: E_s^(L) together with E_i^(L-1).
        const auto sources = store.source;
        const auto claims = store.inferential;
        trace.emit("answer_context", {{"round", round}, {"context", context_json(sources, claims)}});
        const auto parsed = generate_answer(ctx, q, sources, claims);
        const auto sc_answer = generate_sc_answer(ctx, q, sources, claims);
        const auto assessment = assess(ctx, parsed.answer, sc_answer, q, config_.threshold);

        AnswerRecord rec{parsed.answer, parsed.reason, sc_answer, assessment.s_sc,
                         assessment.decision == Decision::accept, round};
        result.history.push_back(rec);
        if (rec.accepted) {
            finish(rec, true);
            return;
        }
        if (round == config_.max_iterations) break;

        if (!config_.discover_every_round) {
            store.inferential = discover(ctx, store, q, matching_query, ensure_entities(), round,
                                         config_.inferential_capacity, config_.ie_candidate_cap, &cache);
            snapshot(trace, round, "discover", store);
        }
        search_query = generate_requery(ctx, store.source, store.inferential, rec.reason, q);
    }
    const auto best = result.history[best_round(result.history)];
    finish(best, false);
}

// Baseline: one retrieval with the question, one reasoned answer.
void Pipeline::run_single_shot(const Question& question, ModelContext& ctx, RunResult& result) const {
    const auto& q = question.text;
    Trace& trace = *ctx.trace;
    result.rounds_used = 1;
    const auto hits = index_.retrieve(q, config_.retrieval_k);
    auto ids = nlohmann::json::array();
    for (const auto& h : hits) {
        ids.push_back({{"passage_id", h.passage.passage_id}, {"bm25", h.score}});
        result.store.source.push_back({h.passage, 0.0, 1, q});
    }
    trace.emit("retrieve", {{"round", 1}, {"query", q}, {"k", config_.retrieval_k}, {"hits", ids}});
    const auto parsed = generate_answer(ctx, q, result.store.source, {});
    result.history.push_back({parsed.answer, parsed.reason, "", 0.0, false, 1});
    result.final_answer = standardize_answer(ctx, q, parsed.answer);
    trace.emit("final", {{"status", "ok"}, {"answer", result.final_answer}, {"raw_answer", parsed.answer},
                         {"accepted", false}, {"rounds_used", 1}, {"best_s_sc", 0.0}});
}

}  // namespace retrorag
