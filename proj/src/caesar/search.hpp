#pragma once

#include <memory>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "caesar/config.hpp"

namespace caesar {

struct SearchResult {
    std::string url;
    std::string title;
    std::string snippet;
    bool operator==(const SearchResult&) const = default;
};

class SearchProvider {
public:
    virtual ~SearchProvider() = default;
    virtual std::string name() const = 0;
    // Throws Error{SearchFailed}.
    virtual std::vector<SearchResult> search(const std::string& query) = 0;
};

// Local map of query -> results.
//
//   {"queries": {"solar sails": [{"url": ..., "title": ..., "snippet": ...}]},
//    "default": [...], "fail": ["query that errors"], "fail_all": false}
//
// Lookup: exact, then case/whitespace-insensitive, then "default" (empty when absent).
class FixtureSearchProvider : public SearchProvider {
public:
    explicit FixtureSearchProvider(const nlohmann::json& fixture);
    static std::unique_ptr<FixtureSearchProvider> from_file(const std::string& path);

    std::string name() const override { return "fixture-search"; }
    std::vector<SearchResult> search(const std::string& query) override;

    std::size_t calls() const { return calls_; }

private:
    nlohmann::json fixture_;
    std::size_t calls_ = 0;
};

// Any JSON web-search API answering GET <base>?q=<query>[&key=<key>]. Results are
// read from the first array found under results / organic / items / web.results /
// data, with url|link, title|name and snippet|description|content fields.
class JsonSearchProvider : public SearchProvider {
public:
    JsonSearchProvider(std::string endpoint, std::string api_key, std::size_t max_results = 10);
    // CAESAR_SEARCH_URL, CAESAR_SEARCH_KEY, CAESAR_SEARCH_MAX.
    static std::unique_ptr<JsonSearchProvider> from_env(const EnvLookup& env);

    std::string name() const override { return "json-search:" + endpoint_; }
    std::vector<SearchResult> search(const std::string& query) override;

    static std::vector<SearchResult> parse_results(const nlohmann::json& doc, std::size_t max_results);

private:
    std::string endpoint_;
    std::string api_key_;
    std::size_t max_results_;
};

std::vector<SearchResult> parse_search_results(const nlohmann::json& arr);

// Minimal HTML: a heading, then one anchor and one snippet paragraph per result.
std::string build_search_page(const std::string& query, const std::vector<SearchResult>& results);

// Node URL for a synthetic search page; ordinal 0 is the bootstrap root.
std::string synthetic_search_url(std::size_t ordinal, const std::string& query);
bool is_synthetic_url(const std::string& url);

// Drops results without an http(s) URL and repeated URLs; order preserved.
std::vector<SearchResult> dedupe_results(const std::vector<SearchResult>& results);

}  // namespace caesar
