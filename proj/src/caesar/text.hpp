#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace caesar::text {

std::uint64_t fnv1a64(std::string_view data);
std::string hex64(std::uint64_t value);

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);
std::string collapse_whitespace(std::string_view s);

std::vector<std::string> split_whitespace(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

// Whitespace-delimited token count; a hyphenated word counts once.
std::size_t word_count(std::string_view s);

// Provider-independent token estimate: words * 4/3, rounded up.
std::int64_t approx_token_count(std::string_view s);

// Converts a token budget to whitespace words under the same 4/3 model.
std::int64_t tokens_to_words(std::int64_t tokens);

// Lowercased alphanumeric terms in order of appearance (duplicates kept).
std::vector<std::string> terms(std::string_view s);

bool is_stopword(std::string_view term);

// Byte ranges [begin, end) of sentences. A sentence ends after '.', '!' or '?'
// (optionally followed by closing quotes/brackets) when followed by whitespace
// or end of input, or at a blank line.
struct Span {
    std::size_t begin = 0;
    std::size_t end = 0;
};
std::vector<Span> sentence_spans(std::string_view s);

bool starts_with_ci(std::string_view s, std::string_view prefix);

}  // namespace caesar::text
