#include "retrorag/config.hpp"

#include <fstream>

#include "retrorag/error.hpp"
#include "retrorag/text.hpp"

namespace retrorag {

std::string_view to_string(AnswerMode mode) {
    return mode == AnswerMode::retroactive ? "retroactive" : "single_shot";
}

void RunConfig::validate() const {
    if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("threshold must be in (0,1)");
    if (max_iterations < 1) throw ConfigError("max_iterations must be at least 1");
    if (source_capacity < 1) throw ConfigError("source_capacity must be at least 1");
    if (inferential_capacity < 1) throw ConfigError("inferential_capacity must be at least 1");
    if (retrieval_k < 1) throw ConfigError("retrieval_k must be at least 1");
    if (ie_candidate_cap < 1) throw ConfigError("ie_candidate_cap must be at least 1");
    if (!(temp_low >= 0.0) || !(temp_high >= 0.0)) throw ConfigError("temperatures must be >= 0");
}

nlohmann::json RunConfig::to_json() const {
    return {{"threshold", threshold},
            {"max_iterations", max_iterations},
            {"source_capacity", source_capacity},
            {"inferential_capacity", inferential_capacity},
            {"retrieval_k", retrieval_k},
            {"temp_low", temp_low},
            {"temp_high", temp_high},
            {"ie_candidate_cap", ie_candidate_cap},
            {"discover_every_round", discover_every_round},
            {"mode", to_string(mode)}};
}

void RunConfig::merge_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "threshold") threshold = value.get<double>();
            else if (key == "max_iterations") max_iterations = value.get<std::size_t>();
            else if (key == "source_capacity") source_capacity = value.get<std::size_t>();
            else if (key == "inferential_capacity") inferential_capacity = value.get<std::size_t>();
            else if (key == "evidence_size") source_capacity = inferential_capacity = value.get<std::size_t>();
            else if (key == "retrieval_k") retrieval_k = value.get<std::size_t>();
            else if (key == "temp_low") temp_low = value.get<double>();
            else if (key == "temp_high") temp_high = value.get<double>();
            else if (key == "ie_candidate_cap") ie_candidate_cap = value.get<std::size_t>();
            else if (key == "discover_every_round") discover_every_round = value.get<bool>();
            else if (key == "mode") {
                const auto m = value.get<std::string>();
                if (m == "retroactive") mode = AnswerMode::retroactive;
                else if (m == "single_shot") mode = AnswerMode::single_shot;
                else throw ConfigError("unknown mode " + m);
            } else {
                throw ConfigError("unknown config key " + key);
            }
        }
    } catch (const nlohmann::json::type_error& e) {
        throw ConfigError(std::string("bad config value: ") + e.what());
    }
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config file not found: " + path.string());
    RunConfig c;
    try {
        c.merge_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config file " + path.string() + ": " + e.what());
    }
    return c;
}

std::string RunConfig::hash() const { return hash_hex(to_json().dump()); }

}  // namespace retrorag
