#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "retrorag/answerer.hpp"
#include "retrorag/config.hpp"
#include "retrorag/corpus.hpp"
#include "retrorag/evaluators.hpp"
#include "retrorag/evidence.hpp"
#include "retrorag/trace.hpp"

namespace retrorag {

struct Question {
    std::string id;
    std::string text;
    std::optional<std::vector<std::string>> key_entities;  // from the dataset, when it has them
};

enum class RunStatus { ok, error };

struct RunResult {
    std::string final_answer;
    bool accepted = false;
    std::size_t rounds_used = 0;
    double best_s_sc = 0.0;
    RunStatus status = RunStatus::ok;
    std::string error;
    std::vector<AnswerRecord> history;
    EvidenceStore store;
    Trace trace;
};

// Passes dataset entities through; otherwise asks the model for 1-5 entities.
// A failed call yields an empty list.
std::vector<std::string> extract_key_entities(ModelContext& ctx, const Question& question);

// Index of the history entry with the highest s_sc (earliest on ties).
std::size_t best_round(const std::vector<AnswerRecord>& history);

class Pipeline {
public:
    Pipeline(const CorpusIndex& index, LlmClient& llm, const PromptRegistry& prompts, RunConfig config);

    // Never throws for backend failures: they come back as status=error with
    // the partial trace.
    RunResult run(const Question& question) const;

    const RunConfig& config() const { return config_; }

private:
    void run_retroactive(const Question& question, ModelContext& ctx, RunResult& result) const;
    void run_single_shot(const Question& question, ModelContext& ctx, RunResult& result) const;

    const CorpusIndex& index_;
    LlmClient& llm_;
    const PromptRegistry& prompts_;
    RunConfig config_;
};

}  // namespace retrorag
