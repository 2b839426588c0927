#include "caesar/text.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_set>

namespace caesar::text {

std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : data) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t value) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[value & 0xF];
        value >>= 4;
    }
    return out;
}

std::string to_lower(std::string_view s) {
    std::string out(s);
    for (auto& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return out;
}

namespace {
bool is_space(char ch) { return std::isspace(static_cast<unsigned char>(ch)) != 0; }
}  // namespace

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && is_space(s[b])) ++b;
    while (e > b && is_space(s[e - 1])) --e;
    return std::string(s.substr(b, e - b));
}

std::string collapse_whitespace(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending = false;
    for (char ch : s) {
        if (is_space(ch)) {
            pending = !out.empty();
        } else {
            if (pending) out.push_back(' ');
            pending = false;
            out.push_back(ch);
        }
    }
    return out;
}

std::vector<std::string> split_whitespace(std::string_view s) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && is_space(s[i])) ++i;
        std::size_t start = i;
        while (i < s.size() && !is_space(s[i])) ++i;
        if (i > start) out.emplace_back(s.substr(start, i - start));
    }
    return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out.append(sep);
        out.append(parts[i]);
    }
    return out;
}

std::size_t word_count(std::string_view s) {
    std::size_t n = 0;
    bool in_word = false;
    for (char ch : s) {
        if (is_space(ch)) {
            in_word = false;
        } else if (!in_word) {
            in_word = true;
            ++n;
        }
    }
    return n;
}

std::int64_t approx_token_count(std::string_view s) {
    auto words = static_cast<std::int64_t>(word_count(s));
    return (words * 4 + 2) / 3;
}

std::int64_t tokens_to_words(std::int64_t tokens) { return (tokens * 3) / 4; }

std::vector<std::string> terms(std::string_view s) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
        auto u = static_cast<unsigned char>(ch);
        if (std::isalnum(u) || u >= 0x80) {
            cur.push_back(static_cast<char>(std::tolower(u)));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

bool is_stopword(std::string_view term) {
    static const std::unordered_set<std::string_view> stop = {
        "a", "about", "above", "after", "again", "against", "all", "also", "am", "an", "and", "any",
        "are", "as", "at", "be", "because", "been", "before", "being", "below", "between", "both",
        "but", "by", "can", "could", "did", "do", "does", "doing", "down", "during", "each", "few",
        "for", "from", "further", "had", "has", "have", "having", "he", "her", "here", "hers",
        "herself", "him", "himself", "his", "how", "i", "if", "in", "into", "is", "it", "its",
        "itself", "just", "may", "me", "might", "more", "most", "must", "my", "myself", "no", "nor",
        "not", "now", "of", "off", "on", "once", "only", "or", "other", "our", "ours", "ourselves",
        "out", "over", "own", "same", "she", "should", "so", "some", "such", "than", "that", "the",
        "their", "theirs", "them", "themselves", "then", "there", "these", "they", "this", "those",
        "through", "to", "too", "under", "until", "up", "very", "was", "we", "were", "what", "when",
        "where", "which", "while", "who", "whom", "why", "will", "with", "would", "you", "your",
        "yours", "yourself", "yourselves", "s", "t", "new", "one", "like", "use", "used", "using",
    };
    return stop.count(term) != 0;
}

std::vector<Span> sentence_spans(std::string_view s) {
    std::vector<Span> out;
    std::size_t i = 0;
    const std::size_t n = s.size();
    while (i < n) {
        while (i < n && is_space(s[i])) ++i;
        if (i >= n) break;
        std::size_t begin = i;
        std::size_t end = n;
        while (i < n) {
            char ch = s[i];
            if (ch == '\n' && i + 1 < n) {
                // blank line ends a sentence
                std::size_t j = i + 1;
                while (j < n && (s[j] == ' ' || s[j] == '\t' || s[j] == '\r')) ++j;
                if (j < n && s[j] == '\n') {
                    end = i;
                    break;
                }
            }
            if (ch == '.' || ch == '!' || ch == '?') {
                std::size_t j = i + 1;
                while (j < n && (s[j] == '"' || s[j] == '\'' || s[j] == ')' || s[j] == ']')) ++j;
                // citation markers directly after the terminator belong to the sentence
                while (j < n && s[j] == '[') {
                    std::size_t k = j + 1;
                    while (k < n && std::isdigit(static_cast<unsigned char>(s[k]))) ++k;
                    if (k < n && s[k] == ']' && k > j + 1) j = k + 1;
                    else break;
                }
                if (j >= n || is_space(s[j])) {
                    end = j;
                    i = j;
                    break;
                }
            }
            ++i;
        }
        if (end == n) i = n;
        std::size_t e = end;
        while (e > begin && is_space(s[e - 1])) --e;
        if (e > begin) out.push_back({begin, e});
    }
    return out;
}

bool starts_with_ci(std::string_view s, std::string_view prefix) {
    if (s.size() < prefix.size()) return false;
    for (std::size_t i = 0; i < prefix.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(s[i])) != std::tolower(static_cast<unsigned char>(prefix[i]))) {
            return false;
        }
    }
    return true;
}

}  // namespace caesar::text
