#include "retrorag/llm_client.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "retrorag/error.hpp"
#include "retrorag/text.hpp"
#include "retrorag/trace.hpp"

namespace retrorag {

using nlohmann::json;

void GenerationParams::validate() const {
    if (!(temperature >= 0.0)) throw ConfigError("temperature must be >= 0");
    if (max_tokens == 0) throw ConfigError("max_tokens must be at least 1");
    if (want_logprobs && top_alternatives < 2) throw ConfigError("top_alternatives must be >= 2 with logprobs");
}

std::string_view to_string(YesNoMethod method) {
    switch (method) {
        case YesNoMethod::logprobs: return "logprobs";
        case YesNoMethod::floor_fallback: return "floor_fallback";
        case YesNoMethod::text_fallback: return "text_fallback";
        case YesNoMethod::undecided: return "undecided";
    }
    return "unknown";
}

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    const double hi = std::max(a, b);
    return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

// Share of the first log-probability against the second. The larger side is
// computed directly and the smaller as its complement, which makes swapping
// the arguments map p to exactly 1 - p.
double normalized_share(double log_yes, double log_no) {
    if (log_yes >= log_no) return 1.0 / (1.0 + std::exp(log_no - log_yes));
    return 1.0 - 1.0 / (1.0 + std::exp(log_yes - log_no));
}

}  // namespace

YesNoShare yes_no_share(const Completion& completion) {
    std::optional<double> log_yes, log_no;
    double floor = 0.0;
    bool any = false;
    for (const auto& alt : completion.first_token_alternatives) {
        const auto token = to_lower_utf8(trim(alt.token));
        if (token == "yes") log_yes = log_add(log_yes.value_or(kNegInf), alt.logprob);
        if (token == "no") log_no = log_add(log_no.value_or(kNegInf), alt.logprob);
        if (alt.logprob != kNegInf && (!any || alt.logprob < floor)) {
            floor = alt.logprob;
            any = true;
        }
    }
    const bool yes_seen = log_yes && *log_yes != kNegInf;
    const bool no_seen = log_no && *log_no != kNegInf;
    if (log_yes && log_no && (yes_seen || no_seen)) return {normalized_share(*log_yes, *log_no), YesNoMethod::logprobs};
    if (yes_seen && !log_no) return {normalized_share(*log_yes, floor), YesNoMethod::floor_fallback};
    if (no_seen && !log_yes) return {normalized_share(floor, *log_no), YesNoMethod::floor_fallback};

    const auto text = to_lower_utf8(trim(completion.text));
    const auto words = tokenize(text);
    if (!words.empty() && words.front() == "yes") return {1.0, YesNoMethod::text_fallback};
    if (!words.empty() && words.front() == "no") return {0.0, YesNoMethod::text_fallback};
    return {0.5, YesNoMethod::undecided};
}

LlmClient::LlmClient(RetryPolicy retry, std::size_t max_in_flight)
    : retry_(retry), in_flight_(static_cast<std::ptrdiff_t>(std::clamp<std::size_t>(max_in_flight, 1, 1024))) {
    if (retry_.attempts < 1) throw ConfigError("retry attempts must be at least 1");
}

Completion LlmClient::generate(const Prompt& prompt, const GenerationParams& params, Trace* trace) {
    params.validate();
    const auto prompt_hash = hash_hex(prompt.flattened());
    auto backoff = retry_.initial_backoff;
    for (int attempt = 1;; ++attempt) {
        try {
            in_flight_.acquire();
            Completion c;
            try {
                c = complete(prompt, params);
            } catch (...) {
                in_flight_.release();
                throw;
            }
            in_flight_.release();
            if (trace) {
                trace->emit("llm_call", {{"role", to_string(prompt.role_tag)},
                                         {"template_hash", prompt.template_hash},
                                         {"prompt_hash", prompt_hash},
                                         {"temperature", params.temperature},
                                         {"attempts", attempt},
                                         {"latency_ms", c.latency_ms},
                                         {"prompt_tokens", c.prompt_tokens},
                                         {"completion_tokens", c.completion_tokens}});
            }
            return c;
        } catch (const TransportError& e) {
            if (attempt >= retry_.attempts) {
                if (trace) {
                    trace->emit("llm_error", {{"role", to_string(prompt.role_tag)},
                                              {"prompt_hash", prompt_hash},
                                              {"attempts", attempt},
                                              {"error", e.what()}});
                }
                throw TransportError(std::string(e.what()) + " (after " + std::to_string(attempt) + " attempts)");
            }
            if (backoff.count() > 0) std::this_thread::sleep_for(backoff);
            backoff = std::chrono::milliseconds(
                static_cast<long long>(static_cast<double>(backoff.count()) * retry_.multiplier));
        } catch (const Error& e) {
            if (trace) {
                trace->emit("llm_error", {{"role", to_string(prompt.role_tag)},
                                          {"prompt_hash", prompt_hash},
                                          {"attempts", attempt},
                                          {"error", e.what()}});
            }
            throw;
        }
    }
}

double LlmClient::yes_no_probability(const Prompt& prompt, GenerationParams params, Trace* trace) {
    params.want_logprobs = true;
    params.top_alternatives = std::max<std::size_t>(params.top_alternatives, 5);
    const auto completion = generate(prompt, params, trace);
    const auto share = yes_no_share(completion);
    if (trace && share.method != YesNoMethod::logprobs) {
        trace->warn("yes/no tokens missing from alternatives",
                    {{"role", to_string(prompt.role_tag)}, {"method", to_string(share.method)}, {"value", share.value}});
    }
    return share.value;
}

// ---------------------------------------------------------------- scripted

bool ScriptedRule::matches(const Prompt& prompt) const {
    if (role_tag != "*" && role_tag != to_string(prompt.role_tag)) return false;
    if (!match_substring.empty() && prompt.user_text.find(match_substring) == std::string::npos) return false;
    return std::all_of(match_all.begin(), match_all.end(),
                       [&](const std::string& s) { return prompt.user_text.find(s) != std::string::npos; });
}

namespace {

double checked_probability(const json& v, std::size_t line_no, std::string_view field) {
    if (!v.is_number()) throw ConfigError("fixture line " + std::to_string(line_no) + ": " + std::string(field) + " must be a number");
    const double p = v.get<double>();
    if (!(p >= 0.0 && p <= 1.0)) {
        throw ConfigError("fixture line " + std::to_string(line_no) + ": " + std::string(field) + " must be in [0,1]");
    }
    return p;
}

}  // namespace

std::vector<ScriptedRule> parse_scripted_rules(std::string_view jsonl) {
    std::vector<ScriptedRule> rules;
    std::size_t line_no = 0;
    for (const auto& line : split_lines(jsonl)) {
        ++line_no;
        const auto body = trim(line);
        if (body.empty() || body.front() == '#') continue;
        json j;
        try {
            j = json::parse(body);
        } catch (const json::exception& e) {
            throw ConfigError("fixture line " + std::to_string(line_no) + ": " + e.what());
        }
        ScriptedRule r;
        r.role_tag = j.value("role_tag", std::string("*"));
        if (r.role_tag != "*" && !role_from_string(r.role_tag)) {
            throw ConfigError("fixture line " + std::to_string(line_no) + ": unknown role_tag " + r.role_tag);
        }
        r.match_substring = j.value("match_substring", std::string{});
        if (auto it = j.find("match_all"); it != j.end()) r.match_all = it->get<std::vector<std::string>>();
        r.response_text = j.value("response_text", std::string{});
        if (auto it = j.find("yes_prob"); it != j.end()) r.yes_prob = checked_probability(*it, line_no, "yes_prob");
        if (auto it = j.find("no_prob"); it != j.end()) r.no_prob = checked_probability(*it, line_no, "no_prob");
        if (auto it = j.find("alternatives"); it != j.end()) {
            for (const auto& pair : *it) {
                r.alternatives.emplace_back(pair.at(0).get<std::string>(),
                                            checked_probability(pair.at(1), line_no, "alternative probability"));
            }
        }
        r.error = j.value("error", std::string{});
        if (!r.error.empty() && r.error != "transport" && r.error != "protocol") {
            throw ConfigError("fixture line " + std::to_string(line_no) + ": error must be transport or protocol");
        }
        rules.push_back(std::move(r));
    }
    return rules;
}

std::vector<ScriptedRule> load_scripted_rules(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("scripted fixture not found: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_scripted_rules(ss.str());
}

ScriptedClient::ScriptedClient(std::vector<ScriptedRule> rules, RetryPolicy retry)
    : LlmClient(retry, 1024), rules_(std::move(rules)) {}

Completion ScriptedClient::complete(const Prompt& prompt, const GenerationParams& params) {
    ++calls_;
    auto it = std::find_if(rules_.begin(), rules_.end(), [&](const ScriptedRule& r) { return r.matches(prompt); });
    if (it == rules_.end()) {
        auto head = prompt.user_text.substr(0, 160);
        throw NoMatchingRuleError("no scripted rule for role " + std::string(to_string(prompt.role_tag)) + ": " + head);
    }
    const auto& rule = *it;
    if (rule.error == "transport") throw TransportError("scripted transport failure");
    if (rule.error == "protocol") throw ProtocolError("scripted protocol failure");

    Completion c;
    c.text = rule.response_text;
    if (c.text.empty() && rule.yes_prob) c.text = *rule.yes_prob >= rule.no_prob.value_or(1.0 - *rule.yes_prob) ? "yes" : "no";
    if (params.want_logprobs) {
        auto ln = [](double p) { return p > 0.0 ? std::log(p) : kNegInf; };
        if (!rule.alternatives.empty()) {
            for (const auto& [tok, p] : rule.alternatives) c.first_token_alternatives.push_back({tok, ln(p)});
        } else if (rule.yes_prob) {
            c.first_token_alternatives.push_back({"yes", ln(*rule.yes_prob)});
            c.first_token_alternatives.push_back({"no", ln(rule.no_prob.value_or(1.0 - *rule.yes_prob))});
        }
        std::sort(c.first_token_alternatives.begin(), c.first_token_alternatives.end(),
                  [](const TokenAlternative& a, const TokenAlternative& b) {
                      return a.logprob != b.logprob ? a.logprob > b.logprob : a.token < b.token;
                  });
    }
    c.prompt_tokens = tokenize(prompt.user_text).size();
    c.completion_tokens = tokenize(c.text).size();
    return c;
}

// ---------------------------------------------------------------- remote

ChatCompletionsClient::ChatCompletionsClient(ChatEndpoint endpoint, RetryPolicy retry, std::size_t max_in_flight)
    : LlmClient(retry, max_in_flight), endpoint_(std::move(endpoint)) {
    const auto scheme_end = endpoint_.base_url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("base URL needs a scheme: " + endpoint_.base_url);
    const auto path_start = endpoint_.base_url.find('/', scheme_end + 3);
    origin_ = endpoint_.base_url.substr(0, path_start);
    path_ = path_start == std::string::npos ? "" : endpoint_.base_url.substr(path_start);
    while (!path_.empty() && path_.back() == '/') path_.pop_back();
    path_ += "/chat/completions";
}

std::string ChatCompletionsClient::request_body(const ChatEndpoint& endpoint, const Prompt& prompt,
                                                const GenerationParams& params) {
    json messages = json::array();
    if (!prompt.system_text.empty()) messages.push_back({{"role", "system"}, {"content", prompt.system_text}});
    for (const auto& [in, out] : prompt.few_shot_examples) {
        messages.push_back({{"role", "user"}, {"content", in}});
        messages.push_back({{"role", "assistant"}, {"content", out}});
    }
    messages.push_back({{"role", "user"}, {"content", prompt.user_text}});
    json body = {
        {"model", endpoint.model},
        {"messages", std::move(messages)},
        {"temperature", params.temperature},
        {"max_tokens", params.max_tokens},
    };
    if (params.want_logprobs) {
        body["logprobs"] = true;
        body["top_logprobs"] = params.top_alternatives;
    }
    return body.dump();
}

Completion ChatCompletionsClient::parse_response(std::string_view body) {
    json j;
    try {
        j = json::parse(body);
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("response is not JSON: ") + e.what());
    }
    try {
        const auto& choice = j.at("choices").at(0);
        Completion c;
        const auto& content = choice.at("message").at("content");
        c.text = content.is_null() ? std::string{} : content.get<std::string>();
        const auto finish = choice.value("finish_reason", std::string("stop"));
        c.finish_reason = finish == "stop" ? FinishReason::stop : finish == "length" ? FinishReason::length : FinishReason::other;
        if (auto lp = choice.find("logprobs"); lp != choice.end() && lp->is_object()) {
            if (auto content_lp = lp->find("content"); content_lp != lp->end() && content_lp->is_array() && !content_lp->empty()) {
                for (const auto& alt : content_lp->at(0).value("top_logprobs", json::array())) {
                    const double logprob = alt.at("logprob").get<double>();
                    if (logprob > 0.0) throw ProtocolError("positive log-probability in response");
                    c.first_token_alternatives.push_back({alt.at("token").get<std::string>(), logprob});
                }
            }
        }
        std::stable_sort(c.first_token_alternatives.begin(), c.first_token_alternatives.end(),
                         [](const TokenAlternative& a, const TokenAlternative& b) { return a.logprob > b.logprob; });
        if (auto usage = j.find("usage"); usage != j.end() && usage->is_object()) {
            c.prompt_tokens = usage->value("prompt_tokens", std::size_t{0});
            c.completion_tokens = usage->value("completion_tokens", std::size_t{0});
        }
        return c;
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("unexpected response shape: ") + e.what());
    }
}

Completion ChatCompletionsClient::complete(const Prompt& prompt, const GenerationParams& params) {
    httplib::Client http(origin_);
    http.set_connection_timeout(std::chrono::seconds(10));
    http.set_read_timeout(endpoint_.timeout);
    httplib::Headers headers;
    if (const char* key = std::getenv(endpoint_.api_key_env.c_str()); key && *key) {
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }
    const auto started = std::chrono::steady_clock::now();
    auto res = http.Post(path_, headers, request_body(endpoint_, prompt, params), "application/json");
    const auto elapsed = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started);
    if (!res) throw TransportError("request to " + origin_ + path_ + " failed: " + httplib::to_string(res.error()));
    if (res->status >= 500) throw TransportError("server error " + std::to_string(res->status));
    if (res->status != 200) {
        throw ProtocolError("HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
    }
    auto c = parse_response(res->body);
    c.latency_ms = elapsed.count();
    return c;
}

}  // namespace retrorag
