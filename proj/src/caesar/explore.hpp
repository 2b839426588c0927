#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "caesar/config.hpp"
#include "caesar/graph.hpp"
#include "caesar/knowledge.hpp"
#include "caesar/llm.hpp"
#include "caesar/perceive.hpp"
#include "caesar/search.hpp"

namespace caesar {

enum class MetaAction { Explore, Backtrack, WebSearch };
const char* to_string(MetaAction a);

struct ParsedAction {
    std::optional<MetaAction> action;
    std::string query;
    std::string reasoning;
};

// Accepts "ACTION: <kw>" lines (markdown emphasis tolerated) or a bare keyword
// on the first non-empty line.
ParsedAction parse_meta_action(const std::string& response);

// "CHOICE: <n>" or the first integer in the response.
std::optional<std::size_t> parse_link_choice(const std::string& response);

// One search query per line; list markers and quotes stripped, blanks and
// duplicates of `query` dropped.
std::vector<std::string> parse_expansion(const std::string& response, const std::string& query, std::size_t max_terms);

struct StepTrace {
    std::int64_t step = 0;
    std::string url;  // v_c
    std::string outcome = "ok";  // ok | invalid | think_failed
    std::optional<MetaAction> action;
    std::string raw_action;  // as parsed, before coercion
    std::string coerced_reason;
    std::optional<std::string> target;  // v_n or v_s
    std::optional<std::string> query;   // Q'
    std::optional<std::string> popped_to;  // v_p after a pop, if any
    std::string insight;
    std::size_t candidate_count = 0;
    std::size_t neighbor_blocks = 0;
    std::int64_t input_tokens = 0;
    std::int64_t output_tokens = 0;
    double elapsed_ms = 0.0;
    std::int64_t budget_after = 0;
    std::vector<std::string> stack_after;
    std::size_t nodes_after = 0;
    std::size_t edges_after = 0;
    std::string note;

    nlohmann::json to_json() const;
};

struct ExploreServices {
    ChatProvider& llm;
    SearchProvider& search;
    PageSource& pages;
    Embedder& embedder;
    TokenLedger& ledger;
    RetryPolicy retry{};
};

// Bootstrap, then the budgeted perceive-think-act loop.
class Explorer {
public:
    static constexpr std::size_t kExpansionTerms = 3;
    static constexpr std::size_t kMaxCandidatesShown = 200;

    Explorer(const Config& config, ExploreServices services);

    // Expands Q, searches, builds v_0, generates the role. Throws Error{SearchFailed}
    // when the primary search fails; nothing is written in that case.
    void bootstrap();
    bool bootstrapped() const { return bootstrapped_; }

    bool done() const { return budget_ <= 0 || stack_.empty(); }
    // One loop iteration. Requires bootstrap() and !done().
    StepTrace step();
    // bootstrap() if needed, then step() until done.
    void run();

    const ExplorationGraph& graph() const { return graph_; }
    const std::vector<std::string>& stack() const { return stack_; }
    std::int64_t budget() const { return budget_; }
    std::int64_t steps_taken() const { return steps_; }
    std::int64_t web_searches_used() const { return searches_used_; }
    const KnowledgeBase& kb() const { return kb_; }
    KnowledgeBase& kb() { return kb_; }
    const EpisodicMemory& memory() const { return memory_; }
    const std::string& role() const { return role_; }
    const std::vector<std::string>& expansion_terms() const { return expansion_; }
    const std::vector<StepTrace>& traces() const { return traces_; }
    const std::vector<std::string>& diagnostics() const { return diagnostics_; }
    const FetchPolicy& policy() const { return policy_; }

    // graph.json, trace.jsonl, kb.jsonl, memory.jsonl, role.txt; returns the file names.
    std::vector<std::string> write_outputs(const std::string& dir) const;

private:
    struct Perceived {
        std::vector<std::string> links;
        std::string text;
    };

    std::optional<Perceived> perceive(StepTrace& trace);
    std::string neighbor_insights(const std::string& url, std::size_t& blocks) const;
    std::string kb_context() const;
    void pop(StepTrace& trace);
    std::string add_search_node(const std::string& parent, const std::string& query,
                                const std::vector<SearchResult>& results, std::int64_t step);

    const Config& config_;
    ExploreServices svc_;
    LlmGateway llm_;
    KnowledgeBase kb_;
    EpisodicMemory memory_;
    ExplorationGraph graph_;
    FetchPolicy policy_;
    FetchLimits limits_;
    std::vector<std::string> stack_;
    std::map<std::string, Perceived> cache_;
    std::vector<std::string> expansion_;
    std::string role_;
    std::int64_t budget_ = 0;
    std::int64_t steps_ = 0;
    std::int64_t searches_used_ = 0;
    std::size_t search_ordinal_ = 0;
    bool bootstrapped_ = false;
    std::vector<StepTrace> traces_;
    std::vector<std::string> diagnostics_;
};

}  // namespace caesar
