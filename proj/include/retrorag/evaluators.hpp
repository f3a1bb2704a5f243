#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "retrorag/evidence.hpp"
#include "retrorag/llm_client.hpp"
#include "retrorag/prompts.hpp"

namespace retrorag {

class Trace;

// What every LLM-backed step needs: the backend, the templates, where to log,
// and the two sampling temperatures.
struct ModelContext {
    LlmClient& llm;
    const PromptRegistry& prompts;
    Trace* trace = nullptr;
    double temp_low = 0.01;
    double temp_high = 1.0;

    GenerationParams scoring_params() const;
};

enum class ScoreKind { sc, source_relevance, inferential_relevance, qr, ra };

std::string_view to_string(ScoreKind kind);

struct Score {
    double value = 0.0;
    ScoreKind kind = ScoreKind::sc;
    std::string subject_id;
};

// Agreement of the reasoned answer and the monitoring answer.
Score self_consistency_score(ModelContext& ctx, const std::string& answer, const std::string& sc_answer,
                             const std::string& question);

// Source evidence is ranked against the matching query...
Score source_relevance_score(ModelContext& ctx, const SourceEvidence& candidate, const std::string& matching_query);

// ...inferential evidence against the original question.
Score inferential_relevance_score(ModelContext& ctx, const InferentialEvidence& candidate,
                                  const std::string& question);

Score question_relevance_gate(ModelContext& ctx, const InferentialEvidence& candidate,
                              const std::vector<InferentialEvidence>& prior, const std::string& matching_query);

// Throws PreconditionError when sources is empty.
Score reference_attribution_gate(ModelContext& ctx, const InferentialEvidence& candidate,
                                 const std::vector<SourceEvidence>& sources);

// A candidate claim is kept only when both gate scores strictly exceed 0.5.
constexpr double kGateThreshold = 0.5;
constexpr bool passes_gates(double qr, double ra) { return qr > kGateThreshold && ra > kGateThreshold; }

}  // namespace retrorag
