#include "retrorag/text.hpp"

#include <cstdio>

namespace retrorag {

namespace {

// Decodes one code point starting at s[i] and advances i. Invalid bytes are
// returned as U+FFFD and consume a single byte.
char32_t next_codepoint(std::string_view s, std::size_t& i) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    if (b0 < 0x80) {
        ++i;
        return b0;
    }
    int extra = 0;
    char32_t cp = 0;
    if ((b0 & 0xE0) == 0xC0) {
        extra = 1;
        cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
        extra = 2;
        cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
        extra = 3;
        cp = b0 & 0x07;
    } else {
        ++i;
        return 0xFFFD;
    }
    if (i + extra >= s.size()) {
        ++i;
        return 0xFFFD;
    }
    for (int k = 1; k <= extra; ++k) {
        const auto b = static_cast<unsigned char>(s[i + k]);
        if ((b & 0xC0) != 0x80) {
            ++i;
            return 0xFFFD;
        }
        cp = (cp << 6) | (b & 0x3F);
    }
    i += extra + 1;
    return cp;
}

void append_utf8(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

bool in(char32_t cp, char32_t lo, char32_t hi) { return cp >= lo && cp <= hi; }

}  // namespace

bool is_word_codepoint(char32_t cp) {
    if (cp < 0x80) {
        return (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z') || (cp >= '0' && cp <= '9');
    }
    // Latin-1 supplement: only the letters (plus ordinal indicators, micro).
    if (cp < 0x100) {
        return cp == 0xAA || cp == 0xB5 || cp == 0xBA || (cp >= 0xC0 && cp != 0xD7 && cp != 0xF7);
    }
    if (cp == 0xFFFD) return false;
    // Non-word blocks: combining-free punctuation, symbols, spaces, controls.
    if (in(cp, 0x2000, 0x206F)   // general punctuation
        || in(cp, 0x20A0, 0x20CF)   // currency
        || in(cp, 0x2100, 0x214F)   // letterlike symbols
        || in(cp, 0x2190, 0x2BFF)   // arrows, math, technical, box drawing, shapes, dingbats
        || in(cp, 0x2E00, 0x2E7F)   // supplemental punctuation
        || in(cp, 0x3000, 0x303F)   // CJK symbols and punctuation
        || in(cp, 0xFE10, 0xFE1F) || in(cp, 0xFE30, 0xFE6F)
        || in(cp, 0xFF00, 0xFF0F) || in(cp, 0xFF1A, 0xFF20) || in(cp, 0xFF3B, 0xFF40)
        || in(cp, 0xFF5B, 0xFF65)
        || in(cp, 0xFFF0, 0xFFFF)
        || in(cp, 0x1F000, 0x1FAFF)  // emoji and pictographs
        || in(cp, 0xE000, 0xF8FF)    // private use
        || cp == 0x037E || cp == 0x0387 || in(cp, 0x055A, 0x055F) || cp == 0x0589
        || in(cp, 0x05BE, 0x05C6) || in(cp, 0x060C, 0x061F) || in(cp, 0x066A, 0x066D)
        || cp == 0x06D4 || in(cp, 0x0964, 0x0965)) {
        return false;
    }
    return true;
}

char32_t fold_case(char32_t cp) {
    if (cp < 0x80) return (cp >= 'A' && cp <= 'Z') ? cp + 32 : cp;
    if ((in(cp, 0xC0, 0xDE) && cp != 0xD7)) return cp + 32;
    if (in(cp, 0x100, 0x17F)) {
        // Latin Extended-A alternates upper/lower, with an offset run in the middle.
        if (in(cp, 0x139, 0x148) || in(cp, 0x179, 0x17E)) return (cp % 2 == 1) ? cp + 1 : cp;
        if (cp == 0x178) return 0xFF;
        if (cp == 0x130 || cp == 0x131 || cp == 0x138 || cp == 0x149 || cp == 0x17F) return cp;
        return (cp % 2 == 0) ? cp + 1 : cp;
    }
    if (in(cp, 0x391, 0x3AB) && cp != 0x3A2) return cp + 32;   // Greek
    if (in(cp, 0x410, 0x42F)) return cp + 32;                   // Cyrillic
    if (in(cp, 0x400, 0x40F)) return cp + 80;
    if (in(cp, 0x1E00, 0x1EFF)) return (cp % 2 == 0) ? cp + 1 : cp;  // Latin Extended Additional
    if (in(cp, 0xFF21, 0xFF3A)) return cp + 32;                 // fullwidth A-Z
    return cp;
}

std::vector<TokenSpan> tokenize_with_spans(std::string_view text) {
    std::vector<TokenSpan> out;
    std::size_t i = 0;
    TokenSpan current{};
    bool open = false;
    while (i < text.size()) {
        const std::size_t start = i;
        const char32_t cp = next_codepoint(text, i);
        if (is_word_codepoint(cp)) {
            if (!open) {
                current = TokenSpan{{}, start, start};
                open = true;
            }
            append_utf8(current.token, fold_case(cp));
            current.end = i;
        } else if (open) {
            out.push_back(std::move(current));
            open = false;
        }
    }
    if (open) out.push_back(std::move(current));
    return out;
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    for (auto& span : tokenize_with_spans(text)) tokens.push_back(std::move(span.token));
    return tokens;
}

std::string to_lower_utf8(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) append_utf8(out, fold_case(next_codepoint(text, i)));
    return out;
}

std::string_view trim(std::string_view s) {
    constexpr std::string_view ws = " \t\r\n\f\v";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

std::string collapse_whitespace(std::string_view s) {
    std::string out;
    bool pending_space = false;
    for (char c : s) {
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
            pending_space = !out.empty();
        } else {
            if (pending_space) out.push_back(' ');
            pending_space = false;
            out.push_back(c);
        }
    }
    return out;
}

bool starts_with_icase(std::string_view s, std::string_view prefix) {
    if (s.size() < prefix.size()) return false;
    for (std::size_t i = 0; i < prefix.size(); ++i) {
        char a = s[i], b = prefix[i];
        if (a >= 'A' && a <= 'Z') a += 32;
        if (b >= 'A' && b <= 'Z') b += 32;
        if (a != b) return false;
    }
    return true;
}

std::vector<std::string> split_lines(std::string_view s) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start <= s.size()) {
        auto nl = s.find('\n', start);
        if (nl == std::string_view::npos) nl = s.size();
        auto line = s.substr(start, nl - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.emplace_back(line);
        start = nl + 1;
    }
    return lines;
}

std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hash_hex(std::string_view data) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(data)));
    return buf;
}

}  // namespace retrorag
