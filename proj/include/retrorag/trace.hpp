#pragma once

#include <cstddef>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace retrorag {

// Ordered JSON-lines event log for one question. Each event carries a
// monotonically increasing "seq" and a "kind".
class Trace {
public:
    Trace() = default;
    explicit Trace(std::string question_id) : question_id_(std::move(question_id)) {}

    Trace(const Trace& other);
    Trace& operator=(const Trace& other);

    void emit(std::string_view kind, nlohmann::json fields = nlohmann::json::object());
    void warn(std::string_view message, nlohmann::json fields = nlohmann::json::object());

    std::vector<nlohmann::json> events() const;
    std::vector<nlohmann::json> events_of(std::string_view kind) const;
    std::size_t count(std::string_view kind) const;
    std::size_t size() const;

    // One compact JSON object per line, sorted keys.
    std::string to_jsonl() const;

    const std::string& question_id() const { return question_id_; }

private:
    mutable std::mutex mutex_;
    std::string question_id_;
    std::vector<nlohmann::json> events_;
};

}  // namespace retrorag
