#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "retrorag/evaluators.hpp"
#include "retrorag/evidence.hpp"

namespace retrorag {

struct AnswerRecord {
    std::string answer;
    std::string reason;
    std::string sc_answer;
    double s_sc = 0.0;
    bool accepted = false;
    std::size_t iteration = 0;
};

struct ParsedAnswer {
    std::string answer;
    std::string reason;
};

// "Answer: ... | Reason: ..." (or the two fields on separate lines). Both
// fields must be non-empty.
std::optional<ParsedAnswer> parse_answer_reply(std::string_view text);
// "Answer: ..." or, failing that, the first non-empty line.
std::optional<std::string> parse_direct_reply(std::string_view text);

// Reasoned answer at the low temperature. An unparseable reply is re-asked
// once with a format reminder; a second failure yields the raw text and an
// empty reason.
ParsedAnswer generate_answer(ModelContext& ctx, const std::string& question,
                             const std::vector<SourceEvidence>& sources,
                             const std::vector<InferentialEvidence>& claims);

// Monitoring answer: direct prompt, high temperature, same evidence block.
std::string generate_sc_answer(ModelContext& ctx, const std::string& question,
                               const std::vector<SourceEvidence>& sources,
                               const std::vector<InferentialEvidence>& claims);

enum class Decision { accept, continue_search };

std::string_view to_string(Decision d);

// Acceptance is strict: s_sc must exceed the threshold.
constexpr Decision decide(double s_sc, double threshold) {
    return s_sc > threshold ? Decision::accept : Decision::continue_search;
}

struct Assessment {
    double s_sc = 0.0;
    Decision decision = Decision::continue_search;
};

// Throws ConfigError unless threshold is in (0,1).
Assessment assess(ModelContext& ctx, const std::string& answer, const std::string& sc_answer,
                  const std::string& question, double threshold);

// Rewrites the answer as a minimal span. Any failure returns the input.
std::string standardize_answer(ModelContext& ctx, const std::string& question, const std::string& answer);

}  // namespace retrorag
