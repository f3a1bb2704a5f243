#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace retrorag {

enum class AnswerMode {
    retroactive,  // full collation/discovery loop
    single_shot,  // retrieve once with the question, answer once
};

std::string_view to_string(AnswerMode mode);

struct RunConfig {
    double threshold = 0.7;
    std::size_t max_iterations = 5;
    std::size_t source_capacity = 5;       // N
    std::size_t inferential_capacity = 5;  // K
    std::size_t retrieval_k = 5;
    double temp_low = 0.01;
    double temp_high = 1.0;
    std::size_t ie_candidate_cap = 8;
    // Run discovery right after collation in every round (instead of only
    // after a failed assessment), so round L answers over E_i of round L.
    bool discover_every_round = false;
    AnswerMode mode = AnswerMode::retroactive;

    // Throws ConfigError.
    void validate() const;

    nlohmann::json to_json() const;
    // Unknown keys are rejected; missing keys keep their current value.
    void merge_json(const nlohmann::json& j);
    static RunConfig load(const std::filesystem::path& path);

    std::string hash() const;
};

}  // namespace retrorag
