#include "retrorag/trace.hpp"

namespace retrorag {

Trace::Trace(const Trace& other) {
    std::lock_guard lock(other.mutex_);
    question_id_ = other.question_id_;
    events_ = other.events_;
}

Trace& Trace::operator=(const Trace& other) {
    if (this == &other) return *this;
    std::scoped_lock lock(mutex_, other.mutex_);
    question_id_ = other.question_id_;
    events_ = other.events_;
    return *this;
}

void Trace::emit(std::string_view kind, nlohmann::json fields) {
    std::lock_guard lock(mutex_);
    if (!fields.is_object()) fields = nlohmann::json{{"value", std::move(fields)}};
    fields["seq"] = events_.size();
    fields["kind"] = kind;
    if (!question_id_.empty()) fields["question_id"] = question_id_;
    events_.push_back(std::move(fields));
}

void Trace::warn(std::string_view message, nlohmann::json fields) {
    fields["message"] = message;
    emit("warning", std::move(fields));
}

std::vector<nlohmann::json> Trace::events() const {
    std::lock_guard lock(mutex_);
    return events_;
}

std::vector<nlohmann::json> Trace::events_of(std::string_view kind) const {
    std::lock_guard lock(mutex_);
    std::vector<nlohmann::json> out;
    for (const auto& e : events_) {
        if (e.at("kind") == kind) out.push_back(e);
    }
    return out;
}

std::size_t Trace::count(std::string_view kind) const {
    std::lock_guard lock(mutex_);
    std::size_t n = 0;
    for (const auto& e : events_) n += e.at("kind") == kind ? 1 : 0;
    return n;
}

std::size_t Trace::size() const {
    std::lock_guard lock(mutex_);
    return events_.size();
}

std::string Trace::to_jsonl() const {
    std::lock_guard lock(mutex_);
    std::string out;
    for (const auto& e : events_) {
        out += e.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
        out += '\n';
    }
    return out;
}

}  // namespace retrorag
