#include "caesar/url.hpp"

#include <cctype>
#include <vector>

#include "caesar/text.hpp"

namespace caesar {

namespace {

bool is_scheme_char(char ch) {
    return std::isalnum(static_cast<unsigned char>(ch)) || ch == '+' || ch == '-' || ch == '.';
}

std::string remove_dot_segments(std::string_view path) {
    std::vector<std::string> out;
    bool absolute = !path.empty() && path.front() == '/';
    std::size_t i = absolute ? 1 : 0;
    bool trailing_slash = false;
    while (i <= path.size()) {
        std::size_t j = path.find('/', i);
        if (j == std::string_view::npos) j = path.size();
        std::string_view seg = path.substr(i, j - i);
        bool last = j == path.size();
        if (seg == ".") {
            trailing_slash = last;
        } else if (seg == "..") {
            if (!out.empty()) out.pop_back();
            trailing_slash = last;
        } else {
            out.emplace_back(seg);
            trailing_slash = false;
        }
        i = j + 1;
    }
    std::string result = absolute ? "/" : "";
    for (std::size_t k = 0; k < out.size(); ++k) {
        if (k) result += "/";
        result += out[k];
    }
    if (trailing_slash && !result.empty() && result.back() != '/') result += "/";
    return result;
}

std::string merge_paths(const Url& base, std::string_view ref_path) {
    if (base.has_authority && base.path.empty()) return "/" + std::string(ref_path);
    auto slash = base.path.rfind('/');
    if (slash == std::string::npos) return std::string(ref_path);
    return base.path.substr(0, slash + 1) + std::string(ref_path);
}

}  // namespace

std::string Url::origin() const {
    std::string out = scheme + "://";
    if (!userinfo.empty()) out += userinfo + "@";
    out += host;
    if (!port.empty()) out += ":" + port;
    return out;
}

std::string Url::path_and_query() const {
    std::string out = path.empty() ? "/" : path;
    if (query) out += "?" + *query;
    return out;
}

std::string Url::to_string() const {
    std::string out;
    if (!scheme.empty()) out += scheme + ":";
    if (has_authority) {
        out += "//";
        if (!userinfo.empty()) out += userinfo + "@";
        out += host;
        if (!port.empty()) out += ":" + port;
    }
    out += path;
    if (query) out += "?" + *query;
    if (fragment) out += "#" + *fragment;
    return out;
}

std::optional<Url> parse_url(std::string_view raw) {
    std::string trimmed = text::trim(raw);
    std::string_view s = trimmed;
    for (char ch : s) {
        if (static_cast<unsigned char>(ch) < 0x20) return std::nullopt;
    }
    Url u;
    // scheme
    std::size_t colon = s.find(':');
    std::size_t first_delim = s.find_first_of("/?#");
    if (colon != std::string_view::npos && colon > 0 &&
        (first_delim == std::string_view::npos || colon < first_delim) &&
        std::isalpha(static_cast<unsigned char>(s[0]))) {
        bool ok = true;
        for (std::size_t i = 0; i < colon; ++i) ok = ok && is_scheme_char(s[i]);
        if (ok) {
            u.scheme = std::string(s.substr(0, colon));
            s.remove_prefix(colon + 1);
        }
    }
    // fragment and query
    if (auto hash = s.find('#'); hash != std::string_view::npos) {
        u.fragment = std::string(s.substr(hash + 1));
        s = s.substr(0, hash);
    }
    if (auto q = s.find('?'); q != std::string_view::npos) {
        u.query = std::string(s.substr(q + 1));
        s = s.substr(0, q);
    }
    if (s.substr(0, 2) == "//") {
        u.has_authority = true;
        s.remove_prefix(2);
        std::size_t slash = s.find('/');
        std::string_view authority = s.substr(0, slash);
        s = slash == std::string_view::npos ? std::string_view{} : s.substr(slash);
        if (auto at = authority.rfind('@'); at != std::string_view::npos) {
            u.userinfo = std::string(authority.substr(0, at));
            authority.remove_prefix(at + 1);
        }
        if (!authority.empty() && authority.front() == '[') {
            auto close = authority.find(']');
            if (close == std::string_view::npos) return std::nullopt;
            u.host = std::string(authority.substr(0, close + 1));
            authority.remove_prefix(close + 1);
            if (!authority.empty()) {
                if (authority.front() != ':') return std::nullopt;
                u.port = std::string(authority.substr(1));
            }
        } else if (auto pc = authority.rfind(':'); pc != std::string_view::npos) {
            u.host = std::string(authority.substr(0, pc));
            u.port = std::string(authority.substr(pc + 1));
        } else {
            u.host = std::string(authority);
        }
        for (char ch : u.port) {
            if (!std::isdigit(static_cast<unsigned char>(ch))) return std::nullopt;
        }
        for (char ch : u.host) {
            if (ch == ' ' || ch == '<' || ch == '>' || ch == '"') return std::nullopt;
        }
    }
    u.path = std::string(s);
    return u;
}

std::optional<Url> resolve_url(const Url& base, std::string_view reference) {
    auto ref = parse_url(reference);
    if (!ref) return std::nullopt;
    Url t;
    if (!ref->scheme.empty()) {
        t = *ref;
        t.path = remove_dot_segments(ref->path);
    } else {
        if (ref->has_authority) {
            t = *ref;
            t.path = remove_dot_segments(ref->path);
        } else {
            t.has_authority = base.has_authority;
            t.userinfo = base.userinfo;
            t.host = base.host;
            t.port = base.port;
            if (ref->path.empty()) {
                t.path = base.path;
                t.query = ref->query ? ref->query : base.query;
            } else {
                if (ref->path.front() == '/') t.path = remove_dot_segments(ref->path);
                else t.path = remove_dot_segments(merge_paths(base, ref->path));
                t.query = ref->query;
            }
        }
        t.scheme = base.scheme;
    }
    t.fragment = ref->fragment;
    return t;
}

Url canonicalize(Url u) {
    u.scheme = text::to_lower(u.scheme);
    u.host = text::to_lower(u.host);
    u.fragment.reset();
    if ((u.scheme == "http" && u.port == "80") || (u.scheme == "https" && u.port == "443")) u.port.clear();
    if (u.has_authority && u.path.empty()) u.path = "/";
    if (u.has_authority) u.path = remove_dot_segments(u.path);
    // spaces are the one character commonly left unescaped in hrefs
    std::string path;
    for (char ch : u.path) {
        if (ch == ' ') path += "%20";
        else path.push_back(ch);
    }
    u.path = std::move(path);
    return u;
}

std::optional<std::string> canonical_http_url(std::string_view text) {
    auto u = parse_url(text);
    if (!u) return std::nullopt;
    Url c = canonicalize(*u);
    if ((c.scheme != "http" && c.scheme != "https") || !c.has_authority || c.host.empty()) return std::nullopt;
    return c.to_string();
}

std::string url_encode(std::string_view s) {
    static const char* hex = "0123456789ABCDEF";
    std::string out;
    for (unsigned char ch : s) {
        if (std::isalnum(ch) || ch == '-' || ch == '_' || ch == '.' || ch == '~') {
            out.push_back(static_cast<char>(ch));
        } else {
            out.push_back('%');
            out.push_back(hex[ch >> 4]);
            out.push_back(hex[ch & 0xF]);
        }
    }
    return out;
}

bool host_in_domain(std::string_view host, std::string_view domain) {
    std::string h = text::to_lower(host);
    std::string d = text::to_lower(domain);
    while (!d.empty() && d.front() == '.') d.erase(0, 1);
    if (d.empty()) return false;
    if (h == d) return true;
    return h.size() > d.size() && h.compare(h.size() - d.size(), d.size(), d) == 0 &&
           h[h.size() - d.size() - 1] == '.';
}

}  // namespace caesar
