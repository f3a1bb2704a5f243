#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace retrorag {

// Identifier written into index manifests; bump when token boundaries or
// case folding change.
inline constexpr std::string_view kTokenizerId = "unicode-alnum-lower-v1";

struct TokenSpan {
    std::string token;   // case-folded
    std::size_t begin;   // byte offsets into the source text
    std::size_t end;
};

// Lowercased maximal runs of letters/digits; everything else separates.
std::vector<std::string> tokenize(std::string_view text);
std::vector<TokenSpan> tokenize_with_spans(std::string_view text);

bool is_word_codepoint(char32_t cp);
char32_t fold_case(char32_t cp);
std::string to_lower_utf8(std::string_view text);

std::string_view trim(std::string_view s);
std::string collapse_whitespace(std::string_view s);
bool starts_with_icase(std::string_view s, std::string_view prefix);
std::vector<std::string> split_lines(std::string_view s);

// 64-bit FNV-1a, rendered as 16 lowercase hex digits.
std::uint64_t fnv1a64(std::string_view data);
std::string hash_hex(std::string_view data);

}  // namespace retrorag
