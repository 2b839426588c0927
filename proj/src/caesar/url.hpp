#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace caesar {

// Generic URI pieces; `has_authority` distinguishes "scheme://host/..." from "mailto:x".
struct Url {
    std::string scheme;
    bool has_authority = false;
    std::string userinfo;
    std::string host;
    std::string port;
    std::string path;
    std::optional<std::string> query;
    std::optional<std::string> fragment;

    std::string to_string() const;
    std::string origin() const;  // scheme://host[:port]
    std::string path_and_query() const;
};

std::optional<Url> parse_url(std::string_view text);

// RFC 3986 reference resolution. Returns nullopt when either side is unusable.
std::optional<Url> resolve_url(const Url& base, std::string_view reference);

// Lowercases scheme and host, drops the fragment and default ports, keeps the
// query string, and uses "/" for an empty hierarchical path.
Url canonicalize(Url url);

// Canonical absolute http(s) URL, or nullopt.
std::optional<std::string> canonical_http_url(std::string_view text);

std::string url_encode(std::string_view s);

// True when host equals `domain` or is a subdomain of it.
bool host_in_domain(std::string_view host, std::string_view domain);

}  // namespace caesar
