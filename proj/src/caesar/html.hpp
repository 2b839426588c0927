#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace caesar::html {

using Attributes = std::map<std::string, std::string>;

// Event-style tokenizer tolerant of malformed markup. Tag and attribute names
// are lowercased; text and attribute values have entities decoded.
struct Handler {
    std::function<void(const std::string& name, const Attributes& attrs, bool self_closing)> on_start;
    std::function<void(const std::string& name)> on_end;
    std::function<void(std::string_view text)> on_text;
};
void tokenize(std::string_view html, const Handler& handler);

std::string decode_entities(std::string_view s);

// Main-text extraction. Drops script/style/nav/header/footer/aside and similar
// elements, then keeps block-level text whose link density is below 0.5 and
// which is at least 20 characters long (headings exempt from the length rule).
// When nothing qualifies, all remaining text is returned. Throws
// Error{InvalidContent} when the document yields no text.
std::string extract_main_text(std::string_view html);

std::string extract_title(std::string_view html);

// Anchors resolved against `base_url` (or a <base href>), fragments stripped,
// canonicalized, http(s) only, de-duplicated in first-appearance order and
// capped at `max_links`.
std::vector<std::string> extract_links(std::string_view html, const std::string& base_url, std::size_t max_links);

}  // namespace caesar::html
