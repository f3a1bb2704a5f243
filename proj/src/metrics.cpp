#include "retrorag/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "retrorag/text.hpp"

namespace retrorag {

namespace {

bool is_ascii_punct(unsigned char c) {
    return (c >= 33 && c <= 47) || (c >= 58 && c <= 64) || (c >= 91 && c <= 96) || (c >= 123 && c <= 126);
}

std::vector<std::string> split_ws(std::string_view s) {
    std::vector<std::string> out;
    std::istringstream in{std::string(s)};
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

std::vector<std::string> normalized_tokens(std::string_view s) { return split_ws(normalize_answer(s)); }

}  // namespace

std::string normalize_answer(std::string_view s) {
    std::string lowered = to_lower_utf8(s);
    std::string no_punct;
    no_punct.reserve(lowered.size());
    for (char c : lowered) {
        if (!is_ascii_punct(static_cast<unsigned char>(c))) no_punct.push_back(c);
    }
    std::string out;
    for (const auto& tok : split_ws(no_punct)) {
        if (tok == "a" || tok == "an" || tok == "the") continue;
        if (!out.empty()) out.push_back(' ');
        out += tok;
    }
    return out;
}

int exact_match(std::string_view prediction, std::string_view gold) {
    return normalize_answer(prediction) == normalize_answer(gold) ? 1 : 0;
}

TokenScores token_f1(std::string_view prediction, std::string_view gold) {
    const auto pred = normalized_tokens(prediction);
    const auto ref = normalized_tokens(gold);
    if (pred.empty() && ref.empty()) return {1.0, 1.0, 1.0};
    if (pred.empty() || ref.empty()) return {};
    std::map<std::string, std::size_t> counts;
    for (const auto& t : ref) ++counts[t];
    std::size_t overlap = 0;
    for (const auto& t : pred) {
        auto it = counts.find(t);
        if (it != counts.end() && it->second > 0) {
            --it->second;
            ++overlap;
        }
    }
    if (overlap == 0) return {};
    TokenScores s;
    s.precision = static_cast<double>(overlap) / static_cast<double>(pred.size());
    s.recall = static_cast<double>(overlap) / static_cast<double>(ref.size());
    s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
    return s;
}

nlohmann::json MetricRow::to_json() const {
    nlohmann::json j = {{"question_id", question_id}, {"status", status}, {"em", em},
                        {"f1", f1},                   {"precision", precision}, {"recall", recall},
                        {"rounds_used", rounds_used}, {"accepted", accepted},   {"prediction", prediction},
                        {"gold", gold}};
    if (!error.empty()) j["error"] = error;
    return j;
}

MetricRow MetricRow::from_json(const nlohmann::json& j) {
    MetricRow r;
    r.question_id = j.at("question_id").get<std::string>();
    r.status = j.value("status", std::string("ok"));
    r.em = j.value("em", 0);
    r.f1 = j.value("f1", 0.0);
    r.precision = j.value("precision", 0.0);
    r.recall = j.value("recall", 0.0);
    r.rounds_used = j.value("rounds_used", std::size_t{0});
    r.accepted = j.value("accepted", false);
    r.prediction = j.value("prediction", std::string{});
    r.gold = j.value("gold", std::vector<std::string>{});
    r.error = j.value("error", std::string{});
    return r;
}

MetricRow score_prediction(std::string question_id, std::string prediction, std::vector<std::string> gold,
                           std::size_t rounds_used, bool accepted) {
    MetricRow row;
    row.question_id = std::move(question_id);
    row.rounds_used = rounds_used;
    row.accepted = accepted;
    bool first = true;
    for (const auto& g : gold) {
        row.em = std::max(row.em, exact_match(prediction, g));
        const auto s = token_f1(prediction, g);
        if (first || s.f1 > row.f1) {
            row.f1 = s.f1;
            row.precision = s.precision;
            row.recall = s.recall;
            first = false;
        }
    }
    row.prediction = std::move(prediction);
    row.gold = std::move(gold);
    return row;
}

nlohmann::json MetricSummary::to_json() const {
    return {{"type", "summary"},     {"questions", questions}, {"errors", errors},
            {"em", em},              {"f1", f1},               {"precision", precision},
            {"recall", recall},      {"accepted_rate", accepted_rate},
            {"mean_rounds", mean_rounds}, {"config_hash", config_hash}};
}

double percent_1dp(double mean) { return std::round(mean * 1000.0) / 10.0; }

MetricSummary summarize(const std::vector<MetricRow>& rows, std::string config_hash) {
    MetricSummary s;
    s.config_hash = std::move(config_hash);
    double em = 0, f1 = 0, p = 0, r = 0, acc = 0, rounds = 0;
    for (const auto& row : rows) {
        if (row.status != "ok") {
            ++s.errors;
            continue;
        }
        ++s.questions;
        em += row.em;
        f1 += row.f1;
        p += row.precision;
        r += row.recall;
        acc += row.accepted ? 1.0 : 0.0;
        rounds += static_cast<double>(row.rounds_used);
    }
    if (s.questions > 0) {
        const auto n = static_cast<double>(s.questions);
        s.em = percent_1dp(em / n);
        s.f1 = percent_1dp(f1 / n);
        s.precision = percent_1dp(p / n);
        s.recall = percent_1dp(r / n);
        s.accepted_rate = percent_1dp(acc / n);
        s.mean_rounds = std::round(rounds / n * 100.0) / 100.0;
    }
    return s;
}

}  // namespace retrorag
