#include "caesar/perceive.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "caesar/config.hpp"
#include "caesar/error.hpp"
#include "caesar/html.hpp"
#include "caesar/pdf.hpp"
#include "caesar/text.hpp"
#include "caesar/url.hpp"

namespace caesar {

using nlohmann::json;

const char* to_string(ContentKind kind) {
    switch (kind) {
        case ContentKind::Html: return "html";
        case ContentKind::Pdf:  return "pdf";
        case ContentKind::Other: return "other";
    }
    return "other";
}

bool FetchPolicy::over_visited(const std::string& url) const {
    auto it = visit_counts.find(url);
    return it != visit_counts.end() && it->second >= max_revisits;
}

bool FetchPolicy::in_bounds(const std::string& url) const {
    if (allowed_domains.empty()) return true;
    auto u = parse_url(url);
    if (!u) return false;
    for (const auto& d : allowed_domains) {
        if (host_in_domain(u->host, d)) return true;
    }
    return false;
}

bool FetchPolicy::excluded(const std::string& url) const {
    return failed.count(url) != 0 || over_visited(url) || !in_bounds(url);
}

const http::Headers& browser_headers() {
    static const http::Headers headers = {
        {"User-Agent",
         "Mozilla/5.0 (Windows NT 10.0; Win64; x64) AppleWebKit/537.36 (KHTML, like Gecko) "
         "Chrome/124.0.0.0 Safari/537.36"},
        {"Accept",
         "text/html,application/xhtml+xml,application/xml;q=0.9,image/avif,image/webp,image/apng,*/*;q=0.8,"
         "application/signed-exchange;v=b3;q=0.7"},
        {"Accept-Language", "en-US,en;q=0.9"},
        {"Accept-Encoding", "gzip, deflate"},
        {"Sec-Ch-Ua", "\"Chromium\";v=\"124\", \"Google Chrome\";v=\"124\", \"Not-A.Brand\";v=\"99\""},
        {"Sec-Ch-Ua-Mobile", "?0"},
        {"Sec-Ch-Ua-Platform", "\"Windows\""},
        {"Sec-Fetch-Dest", "document"},
        {"Sec-Fetch-Mode", "navigate"},
        {"Sec-Fetch-Site", "none"},
        {"Sec-Fetch-User", "?1"},
        {"Upgrade-Insecure-Requests", "1"},
    };
    return headers;
}

// ---------------------------------------------------------------------------
// robots.txt

std::vector<std::pair<bool, std::string>> parse_robots(std::string_view robots_txt) {
    std::vector<std::pair<bool, std::string>> rules;
    std::istringstream in{std::string(robots_txt)};
    std::string line;
    bool group_applies = false;
    bool in_agents = false;  // consecutive user-agent lines form one group header
    while (std::getline(in, line)) {
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        auto colon = line.find(':');
        if (colon == std::string::npos) continue;
        std::string field = text::to_lower(text::trim(line.substr(0, colon)));
        std::string value = text::trim(line.substr(colon + 1));
        if (field == "user-agent") {
            if (!in_agents) group_applies = false;
            in_agents = true;
            if (value == "*") group_applies = true;
            continue;
        }
        in_agents = false;
        if (!group_applies) continue;
        if (field == "disallow" && !value.empty()) rules.emplace_back(false, value);
        if (field == "allow" && !value.empty()) rules.emplace_back(true, value);
    }
    return rules;
}

bool robots_allows(const std::vector<std::pair<bool, std::string>>& rules, std::string_view path) {
    std::size_t best = 0;
    bool allowed = true;
    for (const auto& [allow, prefix] : rules) {
        if (path.substr(0, prefix.size()) == prefix && prefix.size() >= best) {
            // longest match wins; on equal length Allow wins
            if (prefix.size() > best || allow) allowed = allow;
            best = prefix.size();
        }
    }
    return allowed;
}

bool LivePageSource::allowed_by_robots(const std::string& url, double timeout_s) {
    auto u = parse_url(url);
    if (!u) return false;
    std::string origin = canonicalize(*u).origin();
    std::vector<std::pair<bool, std::string>> rules;
    {
        std::lock_guard lock(mu_);
        auto it = robots_.find(origin);
        if (it != robots_.end()) return robots_allows(it->second, u->path_and_query());
    }
    try {
        auto res = http::request("GET", origin + "/robots.txt", browser_headers(), {}, {}, timeout_s);
        if (res.status >= 200 && res.status < 300) rules = parse_robots(res.body);
    } catch (const Error&) {
        // unreachable robots.txt imposes no restriction
    }
    std::lock_guard lock(mu_);
    robots_[origin] = rules;
    return robots_allows(rules, u->path_and_query());
}

RawResponse LivePageSource::get(const std::string& url, double timeout_s) {
    std::string current = url;
    for (int hop = 0; hop <= kMaxRedirects; ++hop) {
        if (honor_robots_ && !allowed_by_robots(current, timeout_s)) {
            throw Error(ErrorCode::FetchFailed, "disallowed by robots.txt: " + current);
        }
        auto res = http::request("GET", current, browser_headers(), {}, {}, timeout_s);
        if (res.status >= 300 && res.status < 400 && !res.header("location").empty()) {
            auto base = parse_url(current);
            auto next = base ? resolve_url(*base, res.header("location")) : std::nullopt;
            auto canon = next ? canonical_http_url(next->to_string()) : std::nullopt;
            if (!canon) throw Error(ErrorCode::FetchFailed, "bad redirect target from " + current);
            current = *canon;
            continue;
        }
        RawResponse out;
        out.status = res.status;
        out.final_url = current;
        out.content_type = res.header("content-type");
        out.body = std::move(res.body);
        return out;
    }
    throw Error(ErrorCode::FetchFailed, "too many redirects starting at " + url);
}

// ---------------------------------------------------------------------------
// Offline corpus

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot read '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string content_type_for(const std::string& file) {
    std::string ext = text::to_lower(std::filesystem::path(file).extension().string());
    if (ext == ".pdf") return "application/pdf";
    if (ext == ".html" || ext == ".htm") return "text/html; charset=utf-8";
    if (ext == ".txt") return "text/plain";
    return "application/octet-stream";
}

}  // namespace

std::unique_ptr<CorpusPageSource> CorpusPageSource::from_manifest(const std::string& manifest_path) {
    std::string raw = read_file(manifest_path);
    json doc = json::parse(raw, nullptr, false);
    if (doc.is_discarded()) throw Error(ErrorCode::Parse, "corpus manifest '" + manifest_path + "' is not valid JSON");
    auto dir = std::filesystem::path(manifest_path).parent_path().string();
    return std::make_unique<CorpusPageSource>(std::move(doc), dir);
}

CorpusPageSource::CorpusPageSource(json manifest, std::string base_dir)
    : manifest_(std::move(manifest)), base_dir_(std::move(base_dir)) {
    if (!manifest_.is_object() || !manifest_.contains("pages") || !manifest_["pages"].is_array()) {
        throw Error(ErrorCode::Parse, "corpus manifest needs a \"pages\" array");
    }
    for (const auto& p : manifest_["pages"]) {
        auto canon = canonical_http_url(p.value("url", ""));
        if (!canon) throw Error(ErrorCode::Parse, "corpus manifest entry has an invalid url: " + p.dump());
        Entry e;
        e.file = p.value("file", "");
        e.status = p.value("status", 200);
        e.redirect = p.value("redirect", "");
        e.content_type = p.value("content_type", e.file.empty() ? std::string("text/html") : content_type_for(e.file));
        pages_[*canon] = std::move(e);
    }
}

RawResponse CorpusPageSource::get(const std::string& url, double) {
    std::string current = canonical_http_url(url).value_or(url);
    for (int hop = 0; hop <= LivePageSource::kMaxRedirects; ++hop) {
        auto it = pages_.find(current);
        RawResponse out;
        out.final_url = current;
        if (it == pages_.end()) {
            out.status = 404;
            return out;
        }
        const Entry& e = it->second;
        if (!e.redirect.empty()) {
            auto base = parse_url(current);
            auto next = base ? resolve_url(*base, e.redirect) : std::nullopt;
            auto canon = next ? canonical_http_url(next->to_string()) : std::nullopt;
            if (!canon) throw Error(ErrorCode::FetchFailed, "bad redirect target in corpus for " + current);
            current = *canon;
            continue;
        }
        out.status = e.status;
        out.content_type = e.content_type;
        if (!e.file.empty()) {
            std::filesystem::path p = e.file;
            if (p.is_relative() && !base_dir_.empty()) p = std::filesystem::path(base_dir_) / p;
            out.body = read_file(p.string());
        }
        return out;
    }
    throw Error(ErrorCode::FetchFailed, "too many redirects starting at " + url);
}

// ---------------------------------------------------------------------------
// Extraction

ContentKind classify_content(std::string_view content_type, std::string_view body, std::string_view url) {
    std::string ct = text::to_lower(content_type);
    if (ct.find("application/pdf") != std::string::npos) return ContentKind::Pdf;
    if (ct.find("text/html") != std::string::npos || ct.find("application/xhtml") != std::string::npos) {
        return ContentKind::Html;
    }
    if (ct.empty() || ct.find("octet-stream") != std::string::npos) {
        if (pdf::looks_like_pdf(body)) return ContentKind::Pdf;
        std::string head = text::to_lower(body.substr(0, 512));
        if (head.find("<html") != std::string::npos || head.find("<!doctype html") != std::string::npos) {
            return ContentKind::Html;
        }
        std::string u = text::to_lower(url);
        if (u.size() > 4 && u.compare(u.size() - 4, 4, ".pdf") == 0) return ContentKind::Pdf;
    }
    return ContentKind::Other;
}

std::string extract_text(std::string_view raw, ContentKind kind) {
    if (text::trim(raw).empty()) throw Error(ErrorCode::InvalidContent, "empty document body");
    switch (kind) {
        case ContentKind::Html:
            if (raw.find('\0') != std::string_view::npos) {
                throw Error(ErrorCode::InvalidContent, "binary data served as HTML");
            }
            return html::extract_main_text(raw);
        case ContentKind::Pdf:
            return pdf::extract_text(raw);
        case ContentKind::Other:
            break;
    }
    throw Error(ErrorCode::InvalidContent, "unsupported content kind");
}

std::size_t utf8_length(std::string_view s) {
    std::size_t n = 0;
    for (unsigned char c : s) {
        if ((c & 0xC0) != 0x80) ++n;
    }
    return n;
}

bool truncate_utf8(std::string& s, std::size_t max_chars) {
    std::size_t count = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        auto c = static_cast<unsigned char>(s[i]);
        if ((c & 0xC0) != 0x80) {
            if (count == max_chars) {
                s.resize(i);
                return true;
            }
            ++count;
        }
    }
    return false;
}

FetchedPage page_from_html(const std::string& url, std::string_view html_text, const FetchLimits& limits) {
    FetchedPage page;
    page.url = url;
    page.content_kind = ContentKind::Html;
    page.byte_size = html_text.size();
    page.fetched_at = utc_timestamp();
    page.text = extract_text(html_text, ContentKind::Html);
    page.truncated = truncate_utf8(page.text, limits.max_page_chars);
    page.title = html::extract_title(html_text);
    page.links = html::extract_links(html_text, url, limits.max_links);
    return page;
}

FetchedPage fetch(const std::string& url, PageSource& source, FetchPolicy& policy, const FetchLimits& limits) {
    auto canon = canonical_http_url(url);
    if (!canon) throw Error(ErrorCode::InvalidArgument, "not an absolute http(s) URL: " + url);
    ++policy.visit_counts[*canon];

    auto fail = [&](ErrorCode code, const std::string& why) -> Error {
        policy.failed.insert(*canon);
        return Error(code, why);
    };

    RawResponse raw;
    try {
        raw = source.get(*canon, policy.timeout_s);
    } catch (const Error& e) {
        throw fail(ErrorCode::FetchFailed, std::string("fetch failed for ") + *canon + ": " + e.what());
    }
    if (raw.status < 200 || raw.status >= 300) {
        throw fail(ErrorCode::FetchFailed, "HTTP " + std::to_string(raw.status) + " for " + *canon);
    }
    std::string final_url = canonical_http_url(raw.final_url).value_or(*canon);

    FetchedPage page;
    page.url = final_url;
    page.byte_size = raw.body.size();
    page.fetched_at = utc_timestamp();
    page.content_kind = classify_content(raw.content_type, raw.body, final_url);
    try {
        page.text = extract_text(raw.body, page.content_kind);
    } catch (const Error& e) {
        throw fail(ErrorCode::InvalidContent, std::string("invalid content at ") + final_url + ": " + e.what());
    }
    page.truncated = truncate_utf8(page.text, limits.max_page_chars);
    if (page.content_kind == ContentKind::Html) {
        page.title = html::extract_title(raw.body);
        page.links = html::extract_links(raw.body, final_url, limits.max_links);
    } else if (page.content_kind == ContentKind::Pdf) {
        std::set<std::string> seen;
        for (const auto& uri : pdf::parse(raw.body).uris) {
            if (page.links.size() >= limits.max_links) break;
            auto c = canonical_http_url(uri);
            if (c && seen.insert(*c).second) page.links.push_back(*c);
        }
    }
    return page;
}

std::vector<std::string> filter_links(const std::vector<std::string>& links, const FetchPolicy& policy) {
    std::vector<std::string> out;
    out.reserve(links.size());
    for (const auto& l : links) {
        if (!policy.excluded(l)) out.push_back(l);
    }
    return out;
}

}  // namespace caesar
