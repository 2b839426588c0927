#include "caesar/html.hpp"

#include <algorithm>
#include <cctype>
#include <optional>
#include <unordered_map>
#include <unordered_set>

#include "caesar/error.hpp"
#include "caesar/text.hpp"
#include "caesar/url.hpp"

namespace caesar::html {

namespace {

void append_utf8(std::string& out, std::uint32_t cp) {
    if (cp == 0 || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) cp = 0xFFFD;
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

const std::unordered_map<std::string_view, std::uint32_t>& named_entities() {
    static const std::unordered_map<std::string_view, std::uint32_t> m = {
        {"amp", '&'},      {"lt", '<'},        {"gt", '>'},       {"quot", '"'},     {"apos", '\''},
        {"nbsp", 0xA0},    {"ndash", 0x2013},  {"mdash", 0x2014}, {"hellip", 0x2026}, {"lsquo", 0x2018},
        {"rsquo", 0x2019}, {"ldquo", 0x201C},  {"rdquo", 0x201D}, {"copy", 0xA9},    {"reg", 0xAE},
        {"trade", 0x2122}, {"middot", 0xB7},   {"bull", 0x2022},  {"laquo", 0xAB},   {"raquo", 0xBB},
        {"deg", 0xB0},     {"times", 0xD7},    {"eacute", 0xE9},  {"euro", 0x20AC},  {"pound", 0xA3},
    };
    return m;
}

bool is_space(char ch) { return std::isspace(static_cast<unsigned char>(ch)) != 0; }
bool is_alpha(char ch) { return std::isalpha(static_cast<unsigned char>(ch)) != 0; }

bool is_raw_text(const std::string& name) {
    return name == "script" || name == "style" || name == "textarea" || name == "title" || name == "xmp";
}

bool is_void(const std::string& name) {
    static const std::unordered_set<std::string> v = {"area", "base", "br", "col", "embed", "hr", "img", "input",
                                                      "link", "meta", "param", "source", "track", "wbr"};
    return v.count(name) != 0;
}

std::size_t find_ci(std::string_view hay, std::string_view needle, std::size_t from) {
    if (needle.empty()) return from;
    for (std::size_t i = from; i + needle.size() <= hay.size(); ++i) {
        if (text::starts_with_ci(hay.substr(i), needle)) return i;
    }
    return std::string_view::npos;
}

// Parses attributes in s[pos, end). Returns attributes; sets self_closing.
Attributes parse_attributes(std::string_view s, bool& self_closing) {
    Attributes attrs;
    std::size_t i = 0;
    self_closing = false;
    while (i < s.size()) {
        while (i < s.size() && (is_space(s[i]) || s[i] == '/')) {
            if (s[i] == '/' && i + 1 == s.size()) self_closing = true;
            ++i;
        }
        if (i >= s.size()) break;
        std::size_t nb = i;
        while (i < s.size() && !is_space(s[i]) && s[i] != '=' && s[i] != '/' ) ++i;
        std::string name = text::to_lower(s.substr(nb, i - nb));
        while (i < s.size() && is_space(s[i])) ++i;
        std::string value;
        if (i < s.size() && s[i] == '=') {
            ++i;
            while (i < s.size() && is_space(s[i])) ++i;
            if (i < s.size() && (s[i] == '"' || s[i] == '\'')) {
                char q = s[i++];
                std::size_t vb = i;
                while (i < s.size() && s[i] != q) ++i;
                value = decode_entities(s.substr(vb, i - vb));
                if (i < s.size()) ++i;
            } else {
                std::size_t vb = i;
                while (i < s.size() && !is_space(s[i])) ++i;
                std::string_view raw = s.substr(vb, i - vb);
                if (!raw.empty() && raw.back() == '/' && i == s.size()) {
                    raw.remove_suffix(1);
                    self_closing = true;
                }
                value = decode_entities(raw);
            }
        }
        if (!name.empty() && !attrs.count(name)) attrs.emplace(std::move(name), std::move(value));
    }
    return attrs;
}

}  // namespace

std::string decode_entities(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        if (s[i] != '&') {
            out.push_back(s[i++]);
            continue;
        }
        std::size_t semi = s.find(';', i + 1);
        if (semi == std::string_view::npos || semi - i > 12) {
            out.push_back(s[i++]);
            continue;
        }
        std::string_view ent = s.substr(i + 1, semi - i - 1);
        std::optional<std::uint32_t> cp;
        if (!ent.empty() && ent[0] == '#') {
            std::uint32_t v = 0;
            bool ok = ent.size() > 1;
            if (ent.size() > 1 && (ent[1] == 'x' || ent[1] == 'X')) {
                ok = ent.size() > 2;
                for (std::size_t k = 2; k < ent.size() && ok; ++k) {
                    if (!std::isxdigit(static_cast<unsigned char>(ent[k]))) ok = false;
                    else v = v * 16 + static_cast<std::uint32_t>(std::isdigit(static_cast<unsigned char>(ent[k]))
                                                                      ? ent[k] - '0'
                                                                      : (std::tolower(ent[k]) - 'a' + 10));
                    if (v > 0x10FFFF) v = 0xFFFD;
                }
            } else {
                for (std::size_t k = 1; k < ent.size() && ok; ++k) {
                    if (!std::isdigit(static_cast<unsigned char>(ent[k]))) ok = false;
                    else v = v * 10 + static_cast<std::uint32_t>(ent[k] - '0');
                    if (v > 0x10FFFF) v = 0xFFFD;
                }
            }
            if (ok) cp = v;
        } else {
            auto it = named_entities().find(ent);
            if (it != named_entities().end()) cp = it->second;
        }
        if (cp) {
            append_utf8(out, *cp);
            i = semi + 1;
        } else {
            out.push_back(s[i++]);
        }
    }
    return out;
}

void tokenize(std::string_view s, const Handler& h) {
    std::size_t i = 0;
    std::size_t text_begin = 0;
    auto flush_text = [&](std::size_t end) {
        if (end > text_begin && h.on_text) h.on_text(decode_entities(s.substr(text_begin, end - text_begin)));
    };
    while (i < s.size()) {
        if (s[i] != '<' || i + 1 >= s.size()) {
            ++i;
            continue;
        }
        char next = s[i + 1];
        if (s.substr(i, 4) == "<!--") {
            flush_text(i);
            std::size_t close = s.find("-->", i + 4);
            i = close == std::string_view::npos ? s.size() : close + 3;
            text_begin = i;
            continue;
        }
        if (next == '!' || next == '?') {
            flush_text(i);
            std::size_t close = s.find('>', i + 2);
            i = close == std::string_view::npos ? s.size() : close + 1;
            text_begin = i;
            continue;
        }
        bool end_tag = next == '/';
        std::size_t name_begin = i + (end_tag ? 2 : 1);
        if (name_begin >= s.size() || !is_alpha(s[name_begin])) {
            ++i;
            continue;
        }
        flush_text(i);
        std::size_t j = name_begin;
        while (j < s.size() && !is_space(s[j]) && s[j] != '>' && s[j] != '/') ++j;
        std::string name = text::to_lower(s.substr(name_begin, j - name_begin));
        // find the closing '>' outside of quotes
        std::size_t k = j;
        char quote = 0;
        while (k < s.size()) {
            if (quote) {
                if (s[k] == quote) quote = 0;
            } else if (s[k] == '"' || s[k] == '\'') {
                quote = s[k];
            } else if (s[k] == '>') {
                break;
            }
            ++k;
        }
        std::string_view attr_src = s.substr(j, (k < s.size() ? k : s.size()) - j);
        i = k < s.size() ? k + 1 : s.size();
        text_begin = i;
        if (end_tag) {
            if (h.on_end) h.on_end(name);
            continue;
        }
        bool self_closing = false;
        Attributes attrs = parse_attributes(attr_src, self_closing);
        if (h.on_start) h.on_start(name, attrs, self_closing || is_void(name));
        if (is_raw_text(name) && !self_closing) {
            std::size_t close = find_ci(s, "</" + name, i);
            std::size_t raw_end = close == std::string_view::npos ? s.size() : close;
            if (raw_end > i && h.on_text) {
                std::string_view raw = s.substr(i, raw_end - i);
                h.on_text(name == "script" || name == "style" ? std::string(raw) : decode_entities(raw));
            }
            if (close == std::string_view::npos) {
                i = s.size();
            } else {
                std::size_t gt = s.find('>', close);
                i = gt == std::string_view::npos ? s.size() : gt + 1;
            }
            text_begin = i;
            if (h.on_end) h.on_end(name);
        }
    }
    flush_text(s.size());
}

namespace {

bool is_dropped(const std::string& name, const Attributes& attrs) {
    static const std::unordered_set<std::string> dropped = {
        "script", "style", "noscript", "template", "svg", "nav", "header", "footer", "aside", "head",
        "iframe", "object", "canvas", "select", "button", "textarea", "math"};
    if (dropped.count(name)) return true;
    auto role = attrs.find("role");
    if (role != attrs.end()) {
        std::string r = text::to_lower(role->second);
        if (r == "navigation" || r == "banner" || r == "contentinfo" || r == "complementary") return true;
    }
    auto hidden = attrs.find("aria-hidden");
    return hidden != attrs.end() && hidden->second == "true";
}

bool is_block(const std::string& name) {
    static const std::unordered_set<std::string> blocks = {
        "address", "article", "aside", "blockquote", "body", "caption", "dd", "details", "dialog", "div",
        "dl", "dt", "fieldset", "figcaption", "figure", "footer", "form", "h1", "h2", "h3", "h4", "h5",
        "h6", "header", "hr", "html", "li", "main", "nav", "ol", "p", "pre", "section", "summary",
        "table", "tbody", "td", "tfoot", "th", "thead", "tr", "ul"};
    return blocks.count(name) != 0;
}

bool is_heading(const std::string& name) {
    return name.size() == 2 && name[0] == 'h' && name[1] >= '1' && name[1] <= '6';
}

struct Block {
    std::string text;
    std::size_t chars = 0;
    std::size_t link_chars = 0;
    bool heading = false;
};

std::size_t visible_chars(std::string_view s) {
    return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [](char ch) { return !is_space(ch); }));
}

}  // namespace

std::string extract_main_text(std::string_view html) {
    std::vector<std::string> stack;
    std::size_t drop_depth = 0;     // number of open dropped elements
    std::vector<bool> stack_drops;  // parallel to stack
    int anchor_depth = 0;
    int heading_depth = 0;
    std::vector<Block> blocks;
    std::string buf;
    std::size_t buf_link_chars = 0;
    bool buf_heading = false;

    auto flush = [&] {
        std::string t = text::collapse_whitespace(buf);
        if (!t.empty()) {
            Block b;
            b.chars = visible_chars(t);
            b.link_chars = std::min(buf_link_chars, b.chars);
            b.heading = buf_heading;
            b.text = std::move(t);
            blocks.push_back(std::move(b));
        }
        buf.clear();
        buf_link_chars = 0;
        buf_heading = heading_depth > 0;
    };

    Handler h;
    h.on_start = [&](const std::string& name, const Attributes& attrs, bool self_closing) {
        if (drop_depth == 0 && is_block(name)) flush();
        if (drop_depth == 0 && name == "br") buf.push_back(' ');
        if (self_closing) return;
        bool drops = is_dropped(name, attrs);
        stack.push_back(name);
        stack_drops.push_back(drops);
        if (drops) ++drop_depth;
        if (name == "a") ++anchor_depth;
        if (is_heading(name)) {
            ++heading_depth;
            buf_heading = true;
        }
    };
    h.on_end = [&](const std::string& name) {
        auto it = std::find(stack.rbegin(), stack.rend(), name);
        if (it == stack.rend()) return;
        std::size_t target = static_cast<std::size_t>(stack.rend() - it) - 1;
        while (stack.size() > target) {
            const std::string& top = stack.back();
            if (drop_depth == 0 && is_block(top)) flush();
            if (stack_drops.back()) --drop_depth;
            if (top == "a" && anchor_depth > 0) --anchor_depth;
            if (is_heading(top) && heading_depth > 0) {
                --heading_depth;
            }
            stack.pop_back();
            stack_drops.pop_back();
        }
        if (buf.empty()) buf_heading = heading_depth > 0;
    };
    h.on_text = [&](std::string_view t) {
        if (drop_depth > 0) return;
        if (!buf.empty() || !t.empty()) {
            buf.append(t);
            if (anchor_depth > 0) buf_link_chars += visible_chars(t);
        }
    };
    tokenize(html, h);
    flush();

    std::vector<std::string> kept;
    for (const auto& b : blocks) {
        double density = b.chars ? static_cast<double>(b.link_chars) / static_cast<double>(b.chars) : 1.0;
        if (density < 0.5 && (b.heading || b.text.size() >= 20)) kept.push_back(b.text);
    }
    if (kept.empty()) {
        for (const auto& b : blocks) kept.push_back(b.text);
    }
    std::string out = text::join(kept, "\n");
    if (out.empty()) throw Error(ErrorCode::InvalidContent, "document contains no extractable text");
    return out;
}

std::string extract_title(std::string_view html) {
    std::string title;
    bool in_title = false;
    bool done = false;
    Handler h;
    h.on_start = [&](const std::string& name, const Attributes&, bool) { in_title = !done && name == "title"; };
    h.on_end = [&](const std::string& name) {
        if (name == "title" && in_title) {
            in_title = false;
            done = true;
        }
    };
    h.on_text = [&](std::string_view t) {
        if (in_title) title.append(t);
    };
    tokenize(html, h);
    return text::collapse_whitespace(title);
}

std::vector<std::string> extract_links(std::string_view html, const std::string& base_url, std::size_t max_links) {
    std::vector<std::string> out;
    if (max_links == 0) return out;
    std::optional<Url> base = parse_url(base_url);
    std::unordered_set<std::string> seen;
    bool base_overridden = false;
    Handler h;
    h.on_start = [&](const std::string& name, const Attributes& attrs, bool) {
        if (out.size() >= max_links) return;
        auto href = attrs.find("href");
        if (href == attrs.end()) return;
        if (name == "base" && !base_overridden) {
            if (base) {
                if (auto b = resolve_url(*base, href->second)) base = *b;
            } else {
                base = parse_url(href->second);
            }
            base_overridden = true;
            return;
        }
        if (name != "a" && name != "area") return;
        std::string ref = text::trim(href->second);
        if (ref.empty() || ref.front() == '#') return;
        std::string lower = text::to_lower(ref.substr(0, 12));
        if (lower.rfind("javascript:", 0) == 0 || lower.rfind("mailto:", 0) == 0 || lower.rfind("tel:", 0) == 0 ||
            lower.rfind("data:", 0) == 0) {
            return;
        }
        std::optional<Url> resolved = base ? resolve_url(*base, ref) : parse_url(ref);
        if (!resolved) return;
        auto canon = canonical_http_url(resolved->to_string());
        if (!canon) return;
        if (seen.insert(*canon).second) out.push_back(std::move(*canon));
    };
    tokenize(html, h);
    return out;
}

}  // namespace caesar::html
