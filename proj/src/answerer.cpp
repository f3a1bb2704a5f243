#include "retrorag/answerer.hpp"

#include "retrorag/error.hpp"
#include "retrorag/text.hpp"
#include "retrorag/trace.hpp"

namespace retrorag {

namespace {

std::string ascii_lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c + 32);
    }
    return out;
}

std::string strip_field(std::string_view s) {
    auto t = trim(s);
    while (!t.empty() && (t.back() == '|' || t.back() == ' ' || t.back() == '\t')) t.remove_suffix(1);
    while (!t.empty() && (t.front() == '*' || t.front() == ' ')) t.remove_prefix(1);
    while (!t.empty() && t.back() == '*') t.remove_suffix(1);
    return std::string(trim(t));
}

std::string first_line(std::string_view s) {
    for (const auto& line : split_lines(s)) {
        auto t = trim(line);
        if (!t.empty()) return std::string(t);
    }
    return {};
}

GenerationParams answer_params(double temperature) {
    GenerationParams p;
    p.temperature = temperature;
    p.max_tokens = 384;
    return p;
}

}  // namespace

std::string_view to_string(Decision d) { return d == Decision::accept ? "accept" : "continue"; }

std::optional<ParsedAnswer> parse_answer_reply(std::string_view text) {
    const auto lower = ascii_lower(text);
    const auto a = lower.find("answer:");
    if (a == std::string::npos) return std::nullopt;
    const auto r = lower.find("reason:", a);
    if (r == std::string::npos) return std::nullopt;
    ParsedAnswer out;
    out.answer = strip_field(first_line(text.substr(a + 7, r - a - 7)));
    out.reason = collapse_whitespace(trim(text.substr(r + 7)));
    if (out.answer.empty() || out.reason.empty()) return std::nullopt;
    return out;
}

std::optional<std::string> parse_direct_reply(std::string_view text) {
    const auto lower = ascii_lower(text);
    std::string answer;
    if (const auto a = lower.find("answer:"); a != std::string::npos) {
        answer = first_line(text.substr(a + 7));
        const auto r = ascii_lower(answer).find("reason:");
        if (r != std::string::npos) answer = answer.substr(0, r);
        answer = strip_field(answer);
    } else {
        answer = strip_field(first_line(text));
    }
    if (answer.empty()) return std::nullopt;
    return answer;
}

ParsedAnswer generate_answer(ModelContext& ctx, const std::string& question,
                             const std::vector<SourceEvidence>& sources,
                             const std::vector<InferentialEvidence>& claims) {
    const auto evidence = format_evidence_block(sources, claims);
    auto prompt = ctx.prompts.render(RoleTag::cot_answer, {{"evidence", evidence}, {"question", question}});
    auto completion = ctx.llm.generate(prompt, answer_params(ctx.temp_low), ctx.trace);
    auto parsed = parse_answer_reply(completion.text);
    bool reasked = false;
    if (!parsed) {
        reasked = true;
        prompt.user_text += "\n\n";
        prompt.user_text += kFormatReminder;
        completion = ctx.llm.generate(prompt, answer_params(ctx.temp_low), ctx.trace);
        parsed = parse_answer_reply(completion.text);
    }
    ParsedAnswer result;
    if (parsed) {
        result = *parsed;
    } else {
        result.answer = collapse_whitespace(trim(completion.text));
        if (ctx.trace) ctx.trace->warn("answer reply unparseable after re-ask; using raw completion");
    }
    if (ctx.trace) {
        ctx.trace->emit("answer", {{"answer", result.answer},
                                   {"reason", result.reason},
                                   {"reasked", reasked},
                                   {"evidence_hash", hash_hex(evidence)}});
    }
    return result;
}

std::string generate_sc_answer(ModelContext& ctx, const std::string& question,
                               const std::vector<SourceEvidence>& sources,
                               const std::vector<InferentialEvidence>& claims) {
    const auto evidence = format_evidence_block(sources, claims);
    auto prompt = ctx.prompts.render(RoleTag::direct_answer, {{"evidence", evidence}, {"question", question}});
    auto completion = ctx.llm.generate(prompt, answer_params(ctx.temp_high), ctx.trace);
    auto parsed = parse_direct_reply(completion.text);
    bool reasked = false;
    if (!parsed) {
        reasked = true;
        prompt.user_text += "\n\nYour previous reply was empty. Reply as:\nAnswer: <short answer>";
        completion = ctx.llm.generate(prompt, answer_params(ctx.temp_high), ctx.trace);
        parsed = parse_direct_reply(completion.text);
    }
    std::string answer = parsed ? *parsed : collapse_whitespace(trim(completion.text));
    if (!parsed && ctx.trace) ctx.trace->warn("monitoring answer unparseable after re-ask");
    if (ctx.trace) {
        ctx.trace->emit("sc_answer", {{"answer", answer}, {"reasked", reasked}, {"evidence_hash", hash_hex(evidence)}});
    }
    return answer;
}

Assessment assess(ModelContext& ctx, const std::string& answer, const std::string& sc_answer,
                  const std::string& question, double threshold) {
    if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("threshold must be in (0,1)");
    Assessment out;
    if (trim(answer).empty() || trim(sc_answer).empty()) {
        // Nothing to compare; treat as no agreement.
        if (ctx.trace) ctx.trace->warn("empty answer; self-consistency set to 0");
        out.s_sc = 0.0;
    } else {
        out.s_sc = self_consistency_score(ctx, answer, sc_answer, question).value;
    }
    out.decision = decide(out.s_sc, threshold);
    if (ctx.trace) {
        ctx.trace->emit("assess", {{"s_sc", out.s_sc}, {"threshold", threshold}, {"decision", to_string(out.decision)}});
    }
    return out;
}

std::string standardize_answer(ModelContext& ctx, const std::string& question, const std::string& answer) {
    if (trim(answer).empty()) return answer;
    std::string result = answer;
    try {
        const auto prompt = ctx.prompts.render(RoleTag::declarative, {{"question", question}, {"answer", answer}});
        GenerationParams params;
        params.temperature = ctx.temp_low;
        params.max_tokens = 64;
        const auto completion = ctx.llm.generate(prompt, params, ctx.trace);
        auto span = first_line(completion.text);
        if (starts_with_icase(span, "answer:")) span = std::string(trim(std::string_view(span).substr(7)));
        if (span.size() >= 2 && span.front() == '"' && span.back() == '"') span = span.substr(1, span.size() - 2);
        while (!span.empty() && span.back() == '.') span.pop_back();
        span = std::string(trim(span));
        if (!span.empty()) result = span;
        else if (ctx.trace) ctx.trace->warn("declarative assessor returned nothing; keeping answer");
    } catch (const Error& e) {
        if (ctx.trace) ctx.trace->warn("declarative assessor failed; keeping answer", {{"error", e.what()}});
    }
    return result;
}

}  // namespace retrorag
