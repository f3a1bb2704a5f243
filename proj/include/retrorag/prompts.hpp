#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace retrorag {

enum class RoleTag {
    cot_answer,
    direct_answer,
    sc_eval,
    evidence_score,
    ie_generate,
    qr_gate,
    ra_gate,
    requery,
    declarative,
    key_entities,
};

inline constexpr std::array kAllRoles = {
    RoleTag::cot_answer,  RoleTag::direct_answer, RoleTag::sc_eval, RoleTag::evidence_score,
    RoleTag::ie_generate, RoleTag::qr_gate,       RoleTag::ra_gate, RoleTag::requery,
    RoleTag::declarative, RoleTag::key_entities,
};

std::string_view to_string(RoleTag role);
std::optional<RoleTag> role_from_string(std::string_view name);

struct Prompt {
    std::string system_text;
    std::string user_text;
    std::vector<std::pair<std::string, std::string>> few_shot_examples;
    RoleTag role_tag = RoleTag::cot_answer;
    std::string template_hash;

    // Everything the model sees, flattened; used for hashing and matching.
    std::string flattened() const;
};

// A template is a text resource split into sections by header lines:
//   [system]  [example.input]  [example.output]  [user]
// Placeholders are written {{name}}.
struct PromptTemplate {
    RoleTag role = RoleTag::cot_answer;
    std::string source;  // raw resource text
    std::string system;
    std::vector<std::pair<std::string, std::string>> examples;
    std::string user;
    std::string hash;

    static PromptTemplate parse(RoleTag role, std::string source);
};

using PromptValues = std::map<std::string, std::string, std::less<>>;

class PromptRegistry {
public:
    // Built-in templates.
    PromptRegistry();

    // Built-ins, with any <role>.txt found in dir taking precedence.
    static PromptRegistry with_overrides(const std::filesystem::path& dir);

    const PromptTemplate& get(RoleTag role) const;
    void set(PromptTemplate tmpl);

    // Throws LookupError when a placeholder has no value.
    Prompt render(RoleTag role, const PromptValues& values) const;

    // Combined hash over every template; recorded in traces and summaries.
    std::string registry_hash() const;

    static std::string_view builtin_source(RoleTag role);

private:
    std::map<RoleTag, PromptTemplate> templates_;
};

// Appended to the user text when an answer reply has to be re-asked.
inline constexpr std::string_view kFormatReminder =
    "Your previous reply did not follow the required format. Reply exactly as:\n"
    "Answer: <short answer> | Reason: <one or two sentences of reasoning>";

inline constexpr std::string_view kRequeryReminder =
    "Your previous reply was empty. Reply with a single search query on one line.";

}  // namespace retrorag
