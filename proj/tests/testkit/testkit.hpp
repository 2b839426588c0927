#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "caesar/explore.hpp"
#include "caesar/llm.hpp"
#include "caesar/perceive.hpp"
#include "caesar/search.hpp"

namespace caesar::testkit {

std::string fixture_dir();
std::string demo_manifest();
std::string demo_llm();
std::string demo_config();
std::string cli_path();
std::string source_dir();

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& content);

class TempDir {
public:
    explicit TempDir(const std::string& tag = "caesar");
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::string str() const { return path_.string(); }
    std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

private:
    std::filesystem::path path_;
};

std::string html_page(const std::string& title, const std::vector<std::string>& paragraphs,
                      const std::vector<std::string>& links);

// In-memory site. Unknown URLs answer 404.
class MemoryPageSource : public PageSource {
public:
    std::string name() const override { return "memory"; }
    RawResponse get(const std::string& url, double timeout_s) override;

    void add_html(const std::string& url, const std::string& html);
    void add(const std::string& url, RawResponse response);
    void add_redirect(const std::string& from, const std::string& to);
    std::size_t fetches() const { return fetches_; }

private:
    std::map<std::string, RawResponse> pages_;
    std::map<std::string, std::string> redirects_;
    std::size_t fetches_ = 0;
};

// One act decision in a scripted exploration.
struct ScriptStep {
    enum Kind { Explore, Backtrack, WebSearch, Garbage } kind = Backtrack;
    std::size_t choice = 0;
    std::string query;
};

std::string act_response(const ScriptStep& s);

// Deterministic LLM for exploration scripts: act decisions come from `script` in
// order (a Garbage step answers both the prompt and its re-prompt), the chosen
// link from the same step; everything else gets a fixed or derived answer.
class ScriptedExplorerLlm : public ChatProvider {
public:
    explicit ScriptedExplorerLlm(std::vector<ScriptStep> script);
    std::string name() const override { return "scripted-explorer"; }
    ChatResponse complete(const ChatRequest& request) override;

    std::string role = "ROLE-X";
    std::string expansion;  // empty: no auxiliary searches
    // Insight text for think calls; default derives a short paragraph from the prompt hash.
    std::function<std::string(const ChatRequest&)> insight;
    std::vector<ChatRequest> requests;  // every request, in order
    bool record_requests = true;

private:
    std::vector<ScriptStep> script_;
    std::size_t cursor_ = 0;
    bool garbage_pending_ = false;
    std::size_t last_step_ = 0;
};

// Synthesis responder: counts calls per template and answers from callbacks or defaults.
class SynthLlm : public ChatProvider {
public:
    std::string name() const override { return "synth-test"; }
    ChatResponse complete(const ChatRequest& request) override;

    std::map<TemplateId, std::function<std::string(const ChatRequest&, std::size_t call)>> handlers;
    std::map<TemplateId, std::size_t> counts;
    std::vector<ChatRequest> requests;
};

// Text between "PAGE CONTENT: " and the "INITIAL QUERY:" section of a think prompt.
std::string think_page_content(const std::string& prompt);
std::size_t count_occurrences(const std::string& haystack, const std::string& needle);

std::string random_words(std::mt19937_64& rng, std::size_t n);

}  // namespace caesar::testkit
