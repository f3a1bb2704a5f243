#include "retrorag/evaluators.hpp"

#include "retrorag/error.hpp"
#include "retrorag/text.hpp"
#include "retrorag/trace.hpp"

namespace retrorag {

GenerationParams ModelContext::scoring_params() const {
    GenerationParams p;
    p.temperature = temp_low;
    p.max_tokens = 4;
    p.want_logprobs = true;
    p.top_alternatives = 5;
    return p;
}

std::string_view to_string(ScoreKind kind) {
    switch (kind) {
        case ScoreKind::sc: return "sc";
        case ScoreKind::source_relevance: return "source_relevance";
        case ScoreKind::inferential_relevance: return "inferential_relevance";
        case ScoreKind::qr: return "qr";
        case ScoreKind::ra: return "ra";
    }
    return "unknown";
}

namespace {

Score run_yes_no(ModelContext& ctx, RoleTag role, const PromptValues& values, ScoreKind kind, std::string subject) {
    const auto prompt = ctx.prompts.render(role, values);
    Score s{ctx.llm.yes_no_probability(prompt, ctx.scoring_params(), ctx.trace), kind, std::move(subject)};
    if (ctx.trace) {
        ctx.trace->emit("score", {{"score_kind", to_string(kind)},
                                  {"subject_id", s.subject_id},
                                  {"value", s.value},
                                  {"template_hash", prompt.template_hash}});
    }
    return s;
}

}  // namespace

Score self_consistency_score(ModelContext& ctx, const std::string& answer, const std::string& sc_answer,
                             const std::string& question) {
    if (trim(answer).empty() || trim(sc_answer).empty()) {
        throw PreconditionError("self-consistency needs two non-empty answers");
    }
    return run_yes_no(ctx, RoleTag::sc_eval, {{"answer", answer}, {"sc_answer", sc_answer}, {"question", question}},
                      ScoreKind::sc, "answer");
}

Score source_relevance_score(ModelContext& ctx, const SourceEvidence& candidate, const std::string& matching_query) {
    const auto text = format_passage(candidate.passage);
    if (trim(candidate.passage.text).empty()) throw PreconditionError("source evidence text is empty");
    return run_yes_no(ctx, RoleTag::evidence_score, {{"evidence", text}, {"query", matching_query}},
                      ScoreKind::source_relevance, candidate.passage.passage_id);
}

Score inferential_relevance_score(ModelContext& ctx, const InferentialEvidence& candidate,
                                  const std::string& question) {
    if (trim(candidate.claim).empty()) throw PreconditionError("inferential evidence claim is empty");
    return run_yes_no(ctx, RoleTag::evidence_score, {{"evidence", candidate.claim}, {"query", question}},
                      ScoreKind::inferential_relevance, candidate.claim);
}

Score question_relevance_gate(ModelContext& ctx, const InferentialEvidence& candidate,
                              const std::vector<InferentialEvidence>& prior, const std::string& matching_query) {
    return run_yes_no(ctx, RoleTag::qr_gate,
                      {{"claim", candidate.claim}, {"known", format_claims(prior)}, {"query", matching_query}},
                      ScoreKind::qr, candidate.claim);
}

Score reference_attribution_gate(ModelContext& ctx, const InferentialEvidence& candidate,
                                 const std::vector<SourceEvidence>& sources) {
    if (sources.empty()) throw PreconditionError("reference attribution needs at least one source passage");
    return run_yes_no(ctx, RoleTag::ra_gate, {{"claim", candidate.claim}, {"sources", format_sources(sources)}},
                      ScoreKind::ra, candidate.claim);
}

}  // namespace retrorag
