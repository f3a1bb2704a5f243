#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace retrorag {

// Lowercase, drop ASCII punctuation, drop the articles a/an/the, collapse
// whitespace.
std::string normalize_answer(std::string_view s);

int exact_match(std::string_view prediction, std::string_view gold);

struct TokenScores {
    double f1 = 0.0;
    double precision = 0.0;
    double recall = 0.0;
};

// Multiset token overlap of the normalized strings. Two empty strings score
// (1,1,1); no overlap scores (0,0,0).
TokenScores token_f1(std::string_view prediction, std::string_view gold);

struct MetricRow {
    std::string question_id;
    int em = 0;
    double f1 = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    std::size_t rounds_used = 0;
    bool accepted = false;
    std::string prediction;
    std::vector<std::string> gold;
    std::string status = "ok";  // "ok" or "error"
    std::string error;

    nlohmann::json to_json() const;
    static MetricRow from_json(const nlohmann::json& j);
};

// Scores against every alias and keeps the best (EM by max; F1/P/R from the
// alias with the highest F1).
MetricRow score_prediction(std::string question_id, std::string prediction, std::vector<std::string> gold,
                           std::size_t rounds_used, bool accepted);

struct MetricSummary {
    std::size_t questions = 0;  // rows with status ok
    std::size_t errors = 0;
    // Means over ok rows, x100, one decimal.
    double em = 0.0;
    double f1 = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double accepted_rate = 0.0;
    double mean_rounds = 0.0;
    std::string config_hash;

    nlohmann::json to_json() const;
};

double percent_1dp(double mean);

MetricSummary summarize(const std::vector<MetricRow>& rows, std::string config_hash);

}  // namespace retrorag
