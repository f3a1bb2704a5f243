#include "retrorag/prompts.hpp"

#include <fstream>
#include <sstream>

#include "retrorag/error.hpp"
#include "retrorag/text.hpp"

namespace retrorag {

namespace {

constexpr std::string_view kCotAnswer = R"([system]
You answer multi-hop questions. Use the evidence given with each question; prefer the listed facts when they conflict with your own memory. Think step by step before answering.
[example.input]
Evidence:
Facts:
- The Lighthouse Keeper was directed by Mara Olsen.
Passages:
[1] (Mara Olsen) Mara Olsen is a Norwegian film director born in Bergen in 1961.

Question: In which city was the director of The Lighthouse Keeper born?
[example.output]
Answer: Bergen | Reason: The Lighthouse Keeper was directed by Mara Olsen, and passage 1 says Mara Olsen was born in Bergen.
[example.input]
Evidence:
Facts:
(none)
Passages:
[1] (Glass River) Glass River is a tributary of the Vell, 84 km long.

Question: Which is longer, Glass River or Tarn Creek?
[example.output]
Answer: unknown | Reason: The evidence gives the length of Glass River but says nothing about Tarn Creek, so the two cannot be compared.
[user]
Evidence:
{{evidence}}

Question: {{question}}
Think step by step, then reply in exactly this format:
Answer: <short answer> | Reason: <one or two sentences of reasoning>
)";

constexpr std::string_view kDirectAnswer = R"([system]
You answer questions directly and briefly from the evidence given.
[user]
Evidence:
{{evidence}}

Question: {{question}}
Reply with the answer only, as:
Answer: <short answer>
)";

constexpr std::string_view kScEval = R"([system]
You judge whether two answers to the same question agree. Reply with a single word: yes or no.
[user]
Question: {{question}}
Answer A: {{answer}}
Answer B: {{sc_answer}}
Do answer A and answer B give the same answer to the question? Reply yes or no.
)";

constexpr std::string_view kEvidenceScore = R"([system]
You judge whether a piece of evidence helps answer a query. Reply with a single word: yes or no.
[user]
Query: {{query}}
Evidence: {{evidence}}
Does this evidence contain information that helps answer the query? Reply yes or no.
)";

constexpr std::string_view kIeGenerate = R"([system]
You read source passages and write down what can be deduced from them about a set of key entities.
[user]
Key entities: {{entities}}

Source passages:
{{sources}}

Write declarative statements that follow from the passages about the key entities and how they relate to each other. Write one statement per line, at most {{max_claims}} lines. End each statement with the bracketed numbers of the passages it relies on, for example [1] or [2, 3]. Do not add facts that are not in the passages. If nothing can be deduced, reply NONE.
)";

constexpr std::string_view kQrGate = R"([system]
You judge whether a statement is useful for answering a query. Reply with a single word: yes or no.
[user]
Facts already known:
{{known}}

Query: {{query}}
Statement: {{claim}}
Given the facts already known, is the statement directly related to answering the query? Reply yes or no.
)";

constexpr std::string_view kRaGate = R"([system]
You check statements against source passages. Reply with a single word: yes or no.
[user]
Source passages:
{{sources}}

Statement: {{claim}}
Is the statement stated in, or directly supported by, at least one of the source passages? Reply yes or no.
)";

constexpr std::string_view kRequery = R"([system]
You write search queries that find information missing for answering a question.
[user]
Question: {{question}}

Facts established so far:
{{known}}

Source passages already retrieved:
{{sources}}

Why the question could not be answered yet: {{reason}}

Write one search query that would retrieve the missing information. Reply with the query only, on one line.
)";

constexpr std::string_view kDeclarative = R"([system]
You shorten answers to their essential span.
[example.input]
Question: When was the bridge opened?
Answer: The bridge was opened to traffic in May 1932.
[example.output]
May 1932
[user]
Question: {{question}}
Answer: {{answer}}
Rewrite the answer as the shortest span (a name, date, number or short phrase) that answers the question. Use only words from the answer. Reply with the span only.
)";

constexpr std::string_view kKeyEntities = R"([system]
You extract the key entities from questions.
[user]
Question: {{question}}
List the key entities (people, places, organisations, works, events, dates) named in the question, one per line, at most 5. Reply with the list only.
)";

enum class Section { none, system, example_input, example_output, user };

}  // namespace

std::string_view to_string(RoleTag role) {
    switch (role) {
        case RoleTag::cot_answer: return "cot_answer";
        case RoleTag::direct_answer: return "direct_answer";
        case RoleTag::sc_eval: return "sc_eval";
        case RoleTag::evidence_score: return "evidence_score";
        case RoleTag::ie_generate: return "ie_generate";
        case RoleTag::qr_gate: return "qr_gate";
        case RoleTag::ra_gate: return "ra_gate";
        case RoleTag::requery: return "requery";
        case RoleTag::declarative: return "declarative";
        case RoleTag::key_entities: return "key_entities";
    }
    return "unknown";
}

std::optional<RoleTag> role_from_string(std::string_view name) {
    for (auto role : kAllRoles) {
        if (to_string(role) == name) return role;
    }
    return std::nullopt;
}

std::string Prompt::flattened() const {
    std::string out = "[system]\n" + system_text + "\n";
    for (const auto& [in, reply] : few_shot_examples) out += "[example.input]\n" + in + "\n[example.output]\n" + reply + "\n";
    out += "[user]\n" + user_text;
    return out;
}

PromptTemplate PromptTemplate::parse(RoleTag role, std::string source) {
    PromptTemplate t;
    t.role = role;
    Section section = Section::none;
    std::string buffer;
    std::string pending_input;
    bool have_user = false;
    auto flush = [&] {
        // Section bodies keep interior newlines but drop the trailing one.
        while (!buffer.empty() && buffer.back() == '\n') buffer.pop_back();
        switch (section) {
            case Section::system: t.system = buffer; break;
            case Section::example_input: pending_input = buffer; break;
            case Section::example_output: t.examples.emplace_back(std::move(pending_input), buffer); break;
            case Section::user: t.user = buffer; have_user = true; break;
            case Section::none:
                if (!trim(buffer).empty()) {
                    throw ConfigError("template " + std::string(to_string(role)) + ": text before first section");
                }
                break;
        }
        buffer.clear();
    };
    for (const auto& line : split_lines(source)) {
        const auto header = trim(line);
        Section next = Section::none;
        if (header == "[system]") next = Section::system;
        else if (header == "[example.input]") next = Section::example_input;
        else if (header == "[example.output]") next = Section::example_output;
        else if (header == "[user]") next = Section::user;
        if (next != Section::none) {
            flush();
            if (next == Section::example_output && section != Section::example_input) {
                throw ConfigError("template " + std::string(to_string(role)) + ": [example.output] without input");
            }
            section = next;
            continue;
        }
        buffer += line;
        buffer += '\n';
    }
    flush();
    if (!have_user) throw ConfigError("template " + std::string(to_string(role)) + " has no [user] section");
    t.hash = hash_hex(source);
    t.source = std::move(source);
    return t;
}

std::string_view PromptRegistry::builtin_source(RoleTag role) {
    switch (role) {
        case RoleTag::cot_answer: return kCotAnswer;
        case RoleTag::direct_answer: return kDirectAnswer;
        case RoleTag::sc_eval: return kScEval;
        case RoleTag::evidence_score: return kEvidenceScore;
        case RoleTag::ie_generate: return kIeGenerate;
        case RoleTag::qr_gate: return kQrGate;
        case RoleTag::ra_gate: return kRaGate;
        case RoleTag::requery: return kRequery;
        case RoleTag::declarative: return kDeclarative;
        case RoleTag::key_entities: return kKeyEntities;
    }
    throw LookupError("no built-in template");
}

PromptRegistry::PromptRegistry() {
    for (auto role : kAllRoles) set(PromptTemplate::parse(role, std::string(builtin_source(role))));
}

PromptRegistry PromptRegistry::with_overrides(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw ConfigError("template directory not found: " + dir.string());
    PromptRegistry registry;
    for (auto role : kAllRoles) {
        const auto file = dir / (std::string(to_string(role)) + ".txt");
        if (!std::filesystem::exists(file)) continue;
        std::ifstream in(file, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        registry.set(PromptTemplate::parse(role, ss.str()));
    }
    return registry;
}

const PromptTemplate& PromptRegistry::get(RoleTag role) const { return templates_.at(role); }

void PromptRegistry::set(PromptTemplate tmpl) { templates_[tmpl.role] = std::move(tmpl); }

namespace {

std::string substitute(std::string_view text, const PromptValues& values, RoleTag role) {
    std::string out;
    std::size_t pos = 0;
    while (true) {
        const auto open = text.find("{{", pos);
        if (open == std::string_view::npos) break;
        const auto close = text.find("}}", open + 2);
        if (close == std::string_view::npos) break;
        out.append(text.substr(pos, open - pos));
        const auto name = text.substr(open + 2, close - open - 2);
        auto it = values.find(name);
        if (it == values.end()) {
            throw LookupError("template " + std::string(to_string(role)) + " needs a value for {{" +
                              std::string(name) + "}}");
        }
        out += it->second;
        pos = close + 2;
    }
    out.append(text.substr(pos));
    return out;
}

}  // namespace

Prompt PromptRegistry::render(RoleTag role, const PromptValues& values) const {
    const auto& t = get(role);
    Prompt p;
    p.role_tag = role;
    p.template_hash = t.hash;
    p.system_text = substitute(t.system, values, role);
    p.user_text = substitute(t.user, values, role);
    p.few_shot_examples = t.examples;
    return p;
}

std::string PromptRegistry::registry_hash() const {
    std::string all;
    for (const auto& [role, t] : templates_) {
        all += to_string(role);
        all += '=';
        all += t.hash;
        all += ';';
    }
    return hash_hex(all);
}

}  // namespace retrorag
