#include "caesar/search.hpp"

#include <fstream>
#include <sstream>

#include "caesar/error.hpp"
#include "caesar/http.hpp"
#include "caesar/text.hpp"
#include "caesar/url.hpp"

namespace caesar {

using nlohmann::json;

namespace {

std::string norm_query(const std::string& q) { return text::to_lower(text::collapse_whitespace(text::trim(q))); }

std::string first_string(const json& obj, std::initializer_list<const char*> keys) {
    for (const char* k : keys) {
        auto it = obj.find(k);
        if (it != obj.end() && it->is_string()) return it->get<std::string>();
    }
    return {};
}

std::string html_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace

std::vector<SearchResult> parse_search_results(const json& arr) {
    std::vector<SearchResult> out;
    if (!arr.is_array()) return out;
    for (const auto& r : arr) {
        if (r.is_string()) {
            out.push_back({r.get<std::string>(), {}, {}});
            continue;
        }
        if (!r.is_object()) continue;
        SearchResult s;
        s.url = first_string(r, {"url", "link", "href"});
        s.title = first_string(r, {"title", "name"});
        s.snippet = first_string(r, {"snippet", "description", "content", "body"});
        if (!s.url.empty()) out.push_back(std::move(s));
    }
    return out;
}

// ---------------------------------------------------------------------------

FixtureSearchProvider::FixtureSearchProvider(const json& fixture) : fixture_(fixture) {
    if (!fixture_.is_object()) throw Error(ErrorCode::Parse, "search fixture must be a JSON object");
}

std::unique_ptr<FixtureSearchProvider> FixtureSearchProvider::from_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot read search fixture " + path);
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw Error(ErrorCode::Parse, "malformed search fixture " + path);
    return std::make_unique<FixtureSearchProvider>(doc);
}

std::vector<SearchResult> FixtureSearchProvider::search(const std::string& query) {
    ++calls_;
    if (fixture_.value("fail_all", false)) throw Error(ErrorCode::SearchFailed, "search failed for: " + query);
    if (auto f = fixture_.find("fail"); f != fixture_.end() && f->is_array()) {
        for (const auto& q : *f) {
            if (q.is_string() && norm_query(q.get<std::string>()) == norm_query(query)) {
                throw Error(ErrorCode::SearchFailed, "search failed for: " + query);
            }
        }
    }
    if (auto qs = fixture_.find("queries"); qs != fixture_.end() && qs->is_object()) {
        if (auto hit = qs->find(query); hit != qs->end()) return parse_search_results(*hit);
        const auto want = norm_query(query);
        for (auto it = qs->begin(); it != qs->end(); ++it) {
            if (norm_query(it.key()) == want) return parse_search_results(it.value());
        }
    }
    if (auto d = fixture_.find("default"); d != fixture_.end()) return parse_search_results(*d);
    return {};
}

// ---------------------------------------------------------------------------

JsonSearchProvider::JsonSearchProvider(std::string endpoint, std::string api_key, std::size_t max_results)
    : endpoint_(std::move(endpoint)), api_key_(std::move(api_key)), max_results_(max_results) {}

std::unique_ptr<JsonSearchProvider> JsonSearchProvider::from_env(const EnvLookup& env) {
    auto get = [&](const char* k) -> std::string {
        if (!env) return {};
        auto v = env(k);
        return v ? *v : std::string{};
    };
    std::string url = get("CAESAR_SEARCH_URL");
    if (url.empty()) {
        throw Error(ErrorCode::CredentialMissing, "live search needs CAESAR_SEARCH_URL (and CAESAR_SEARCH_KEY)");
    }
    std::size_t max = 10;
    if (auto m = get("CAESAR_SEARCH_MAX"); !m.empty()) max = static_cast<std::size_t>(std::stoul(m));
    return std::make_unique<JsonSearchProvider>(url, get("CAESAR_SEARCH_KEY"), max);
}

std::vector<SearchResult> JsonSearchProvider::parse_results(const json& doc, std::size_t max_results) {
    const json* arr = nullptr;
    if (doc.is_array()) {
        arr = &doc;
    } else if (doc.is_object()) {
        for (const char* k : {"results", "organic", "organic_results", "items", "data"}) {
            auto it = doc.find(k);
            if (it != doc.end() && it->is_array()) {
                arr = &*it;
                break;
            }
        }
        if (!arr) {
            auto web = doc.find("web");
            if (web != doc.end() && web->is_object()) {
                auto it = web->find("results");
                if (it != web->end() && it->is_array()) arr = &*it;
            }
        }
    }
    if (!arr) throw Error(ErrorCode::SearchFailed, "search response has no result list");
    auto out = parse_search_results(*arr);
    if (out.size() > max_results) out.resize(max_results);
    return out;
}

std::vector<SearchResult> JsonSearchProvider::search(const std::string& query) {
    std::string url = endpoint_ + (endpoint_.find('?') == std::string::npos ? "?" : "&") + "q=" + url_encode(query);
    http::Headers headers = {{"Accept", "application/json"}};
    if (!api_key_.empty()) {
        url += "&key=" + url_encode(api_key_);
        headers.emplace_back("X-API-Key", api_key_);
        headers.emplace_back("Authorization", "Bearer " + api_key_);
    }
    http::Response res;
    try {
        res = http::request("GET", url, headers, {}, {}, 30.0);
    } catch (const Error& e) {
        throw Error(ErrorCode::SearchFailed, std::string("search request failed: ") + e.what());
    }
    if (res.status < 200 || res.status >= 300) {
        throw Error(ErrorCode::SearchFailed, "search endpoint returned HTTP " + std::to_string(res.status));
    }
    json doc = json::parse(res.body, nullptr, false);
    if (doc.is_discarded()) throw Error(ErrorCode::SearchFailed, "search endpoint returned malformed JSON");
    return parse_results(doc, max_results_);
}

// ---------------------------------------------------------------------------

std::string build_search_page(const std::string& query, const std::vector<SearchResult>& results) {
    std::ostringstream os;
    os << "<!DOCTYPE html>\n<html><head><title>Search results for: " << html_escape(query)
       << "</title></head>\n<body>\n<h1>Search results for: " << html_escape(query) << "</h1>\n";
    for (const auto& r : results) {
        std::string title = r.title.empty() ? r.url : r.title;
        os << "<div class=\"result\">\n<a href=\"" << html_escape(r.url) << "\">" << html_escape(title) << "</a>\n<p>"
           << html_escape(r.snippet) << "</p>\n</div>\n";
    }
    os << "</body></html>\n";
    return os.str();
}

std::string synthetic_search_url(std::size_t ordinal, const std::string& query) {
    return "caesar://search/" + std::to_string(ordinal) + "?q=" + url_encode(query);
}

bool is_synthetic_url(const std::string& url) { return text::starts_with_ci(url, "caesar://"); }

std::vector<SearchResult> dedupe_results(const std::vector<SearchResult>& results) {
    std::vector<SearchResult> out;
    std::set<std::string> seen;
    for (const auto& r : results) {
        auto canon = canonical_http_url(r.url);
        if (!canon || !seen.insert(*canon).second) continue;
        SearchResult c = r;
        c.url = *canon;
        out.push_back(std::move(c));
    }
    return out;
}

}  // namespace caesar
