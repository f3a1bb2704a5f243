#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

#include "retrorag/prompts.hpp"

namespace retrorag {

class Trace;

struct GenerationParams {
    double temperature = 0.01;
    std::size_t max_tokens = 256;
    bool want_logprobs = false;
    std::size_t top_alternatives = 5;

    void validate() const;
};

enum class FinishReason { stop, length, other };

struct TokenAlternative {
    std::string token;
    double logprob = 0.0;  // natural log; -inf allowed for impossible tokens
};

struct Completion {
    std::string text;
    // Sorted by logprob descending, ties by token.
    std::vector<TokenAlternative> first_token_alternatives;
    FinishReason finish_reason = FinishReason::stop;
    std::size_t prompt_tokens = 0;
    std::size_t completion_tokens = 0;
    double latency_ms = 0.0;
};

enum class YesNoMethod { logprobs, floor_fallback, text_fallback, undecided };

struct YesNoShare {
    double value = 0.5;
    YesNoMethod method = YesNoMethod::logprobs;
};

std::string_view to_string(YesNoMethod method);

// P(yes) / (P(yes) + P(no)) from the first-token alternatives. Alternatives
// that trim and case-fold to "yes" (or "no") are pooled. When one side is
// missing it gets the smallest returned alternative probability; when both
// are, the completion text decides ("yes"/"no" prefix) and otherwise 0.5.
YesNoShare yes_no_share(const Completion& completion);

struct RetryPolicy {
    int attempts = 3;
    std::chrono::milliseconds initial_backoff{500};
    double multiplier = 2.0;
};

class LlmClient {
public:
    explicit LlmClient(RetryPolicy retry = {}, std::size_t max_in_flight = 4);
    virtual ~LlmClient() = default;

    LlmClient(const LlmClient&) = delete;
    LlmClient& operator=(const LlmClient&) = delete;

    // Retries TransportError with exponential backoff; records an llm_call
    // (or llm_error) event in the trace when one is given.
    Completion generate(const Prompt& prompt, const GenerationParams& params, Trace* trace = nullptr);

    // Runs the prompt with log-probabilities enabled and returns the yes-share.
    double yes_no_probability(const Prompt& prompt, GenerationParams params, Trace* trace = nullptr);

    virtual std::string backend_name() const = 0;

protected:
    virtual Completion complete(const Prompt& prompt, const GenerationParams& params) = 0;

private:
    RetryPolicy retry_;
    std::counting_semaphore<1024> in_flight_;
};

// One fixture rule. The first rule whose role matches ("*" for any) and
// whose substrings all occur in the prompt's user text wins.
struct ScriptedRule {
    std::string role_tag;
    std::string match_substring;
    std::vector<std::string> match_all;
    std::string response_text;
    std::optional<double> yes_prob;
    std::optional<double> no_prob;
    std::vector<std::pair<std::string, double>> alternatives;  // (token, probability)
    std::string error;  // "", "transport" or "protocol"

    bool matches(const Prompt& prompt) const;
};

std::vector<ScriptedRule> parse_scripted_rules(std::string_view jsonl);
std::vector<ScriptedRule> load_scripted_rules(const std::filesystem::path& path);

// Deterministic backend driven by fixture rules. An unmatched prompt raises
// NoMatchingRuleError.
class ScriptedClient final : public LlmClient {
public:
    explicit ScriptedClient(std::vector<ScriptedRule> rules, RetryPolicy retry = {3, std::chrono::milliseconds{0}, 2.0});

    std::string backend_name() const override { return "scripted"; }
    std::size_t calls() const { return calls_.load(); }

protected:
    Completion complete(const Prompt& prompt, const GenerationParams& params) override;

private:
    std::vector<ScriptedRule> rules_;
    std::atomic<std::size_t> calls_{0};
};

struct ChatEndpoint {
    std::string base_url = "http://127.0.0.1:8000/v1";
    std::string model = "default";
    std::string api_key_env = "OPENAI_API_KEY";
    std::chrono::seconds timeout{120};
};

// OpenAI-compatible /chat/completions client.
class ChatCompletionsClient final : public LlmClient {
public:
    explicit ChatCompletionsClient(ChatEndpoint endpoint, RetryPolicy retry = {}, std::size_t max_in_flight = 4);

    std::string backend_name() const override { return "chat-completions:" + endpoint_.model; }

    // Exposed for tests of the wire format.
    static std::string request_body(const ChatEndpoint& endpoint, const Prompt& prompt, const GenerationParams& params);
    static Completion parse_response(std::string_view body);

protected:
    Completion complete(const Prompt& prompt, const GenerationParams& params) override;

private:
    ChatEndpoint endpoint_;
    std::string origin_;  // scheme://host[:port]
    std::string path_;    // base path + /chat/completions
};

}  // namespace retrorag
