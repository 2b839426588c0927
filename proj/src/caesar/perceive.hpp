#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "caesar/http.hpp"

namespace caesar {

enum class ContentKind { Html, Pdf, Other };

const char* to_string(ContentKind kind);

struct FetchedPage {
    std::string url;  // canonical final URL after redirects
    ContentKind content_kind = ContentKind::Other;
    std::string text;  // cleaned main text, at most max_page_chars characters
    bool truncated = false;
    std::vector<std::string> links;  // absolute, at most max_links_per_page
    std::string title;
    std::string fetched_at;
    std::size_t byte_size = 0;
};

// Link filter state. Membership in `failed` is monotone for a run.
struct FetchPolicy {
    std::vector<std::string> allowed_domains;
    std::set<std::string> failed;  // L_f
    std::map<std::string, std::int64_t> visit_counts;
    std::int64_t max_revisits = 20;
    double timeout_s = 20.0;

    bool over_visited(const std::string& url) const;
    bool in_bounds(const std::string& url) const;
    // failed, over-visited, or outside the allowed domains
    bool excluded(const std::string& url) const;
};

struct RawResponse {
    int status = 0;
    std::string final_url;
    std::string content_type;
    std::string body;
};

// Byte source for pages. Implementations resolve redirects and report the final URL.
class PageSource {
public:
    virtual ~PageSource() = default;
    virtual std::string name() const = 0;
    // Throws Error{Transport} on network failure.
    virtual RawResponse get(const std::string& url, double timeout_s) = 0;
};

// Desktop Chrome request headers.
const http::Headers& browser_headers();

// Live HTTP(S): browser header set, up to 10 redirects, gzip/deflate, robots.txt honored.
class LivePageSource : public PageSource {
public:
    explicit LivePageSource(bool honor_robots = true) : honor_robots_(honor_robots) {}
    std::string name() const override { return "live"; }
    RawResponse get(const std::string& url, double timeout_s) override;

    static constexpr int kMaxRedirects = 10;

private:
    bool allowed_by_robots(const std::string& url, double timeout_s);

    bool honor_robots_;
    std::mutex mu_;
    std::map<std::string, std::vector<std::pair<bool, std::string>>> robots_;  // origin -> (allow, prefix)
};

// Offline corpus: a manifest mapping URLs to files, replayed byte-for-byte.
//
//   {"pages": [{"url": "...", "file": "a.html", "content_type": "text/html",
//               "status": 200, "redirect": "..."}],
//    "search": {...}}
//
// Unknown URLs answer 404. Paths are relative to the manifest's directory.
class CorpusPageSource : public PageSource {
public:
    static std::unique_ptr<CorpusPageSource> from_manifest(const std::string& manifest_path);
    CorpusPageSource(nlohmann::json manifest, std::string base_dir);

    std::string name() const override { return "offline-corpus"; }
    RawResponse get(const std::string& url, double timeout_s) override;

    const nlohmann::json& manifest() const { return manifest_; }
    std::size_t size() const { return pages_.size(); }

private:
    struct Entry {
        std::string file;
        std::string content_type;
        int status = 200;
        std::string redirect;
    };
    nlohmann::json manifest_;
    std::string base_dir_;
    std::map<std::string, Entry> pages_;
};

// Robots exclusion rules for user-agent "*": returns (allow, path prefix) rules.
std::vector<std::pair<bool, std::string>> parse_robots(std::string_view robots_txt);
bool robots_allows(const std::vector<std::pair<bool, std::string>>& rules, std::string_view path);

ContentKind classify_content(std::string_view content_type, std::string_view body, std::string_view url);

// HTML: main text. PDF: page texts in order. Throws Error{InvalidContent}.
std::string extract_text(std::string_view raw, ContentKind kind);

std::size_t utf8_length(std::string_view s);
// Truncates to at most `max_chars` code points; returns true when cut.
bool truncate_utf8(std::string& s, std::size_t max_chars);

struct FetchLimits {
    std::size_t max_page_chars = 100000;
    std::size_t max_links = 2000;
};

// Perceive. Counts the visit, fetches, dispatches on content kind, truncates.
// Failures (network, non-2xx, robots) add the URL to policy.failed and throw
// Error{FetchFailed}; unusable content adds it too and throws Error{InvalidContent}.
FetchedPage fetch(const std::string& url, PageSource& source, FetchPolicy& policy, const FetchLimits& limits);

// Builds a FetchedPage from markup already in hand (synthetic search pages).
FetchedPage page_from_html(const std::string& url, std::string_view html, const FetchLimits& limits);

// L_c: drops failed, over-visited and out-of-bounds URLs; preserves order.
std::vector<std::string> filter_links(const std::vector<std::string>& links, const FetchPolicy& policy);

}  // namespace caesar
