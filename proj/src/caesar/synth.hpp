#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "caesar/config.hpp"
#include "caesar/knowledge.hpp"
#include "caesar/llm.hpp"

namespace caesar {

// Global source numbering for a synthesis run: 1-based, in order of first retrieval.
class SourceTable {
public:
    std::size_t id_for(const std::string& url);
    std::optional<std::size_t> find(const std::string& url) const;
    const std::string& url(std::size_t id) const;  // throws for unknown ids
    bool contains(std::size_t id) const { return id >= 1 && id <= urls_.size(); }
    std::size_t size() const { return urls_.size(); }
    const std::vector<std::string>& urls() const { return urls_; }

private:
    std::vector<std::string> urls_;
    std::map<std::string, std::size_t> index_;
};

struct QAInsight {
    std::string question;
    std::string answer;
    std::vector<std::size_t> sources;  // source-table ids, at most C_m
};

struct InsightChain {
    std::vector<QAInsight> items;
    bool degraded = false;
    std::string warning;
    std::vector<std::string> followup_prompts;  // rendered, for auditing the H_c window
};

// claim index (1-based sentence number) -> source ids
using CitationMap = std::map<std::size_t, std::vector<std::size_t>>;

struct Draft {
    int round = 0;
    std::string text;
    CitationMap citations;
    std::string query;  // Q_{k-1}
    bool degraded = false;
};

struct SynthesisResult {
    std::vector<Draft> history;
    std::vector<InsightChain> chains;
    std::vector<std::string> queries;  // Q_0 .. Q_N
    std::string final_text;
    CitationMap final_citations;   // M_f
    CitationMap final_claims;      // markers parsed from final_text
    std::optional<std::string> eli5;
    SourceTable sources;
    std::vector<std::string> diagnostics;
    std::vector<nlohmann::json> trace;
    bool degraded = false;
};

// Keeps markers whose ids are in `allowed`, at most `max_per_claim` distinct ids per
// sentence; other markers are removed from the returned text.
struct CitationParse {
    std::string text;
    CitationMap citations;
};
CitationParse parse_citations(const std::string& text, const std::set<std::size_t>& allowed, std::size_t max_per_claim);

std::set<std::size_t> cited_ids(const CitationMap& map);

// Union by claim index, ids deduplicated in first-seen order; 0 = no per-claim cap.
CitationMap merge_citation_maps(const std::vector<CitationMap>& maps, std::size_t max_per_claim = 0);

std::string format_qa_insights(const std::vector<QAInsight>& items, const SourceTable& sources, std::size_t max_pairs);

InsightChain generate_insight_qa(const KnowledgeBase& kb, const std::string& seed_query, const Config& config,
                                 LlmGateway& llm, SourceTable& sources);

Draft generate_draft(const InsightChain& chain, const Draft* previous, const std::string& query, int round,
                     const Config& config, LlmGateway& llm, const SourceTable& sources, std::string* warning = nullptr);

std::string refine_query(const std::string& draft_text, const std::string& previous_query, LlmGateway& llm,
                         std::string* warning = nullptr);

struct MergeResult {
    std::string text;
    CitationMap citations;  // M_f
    CitationMap claims;
    bool degraded = false;
    std::string warning;
};
MergeResult merge_drafts(const std::vector<Draft>& history, const Config& config, LlmGateway& llm);

// Largest prefix of whole sentences within `limit` words; a single over-long
// first sentence is cut at the limit and closed with a period.
std::string truncate_to_words(const std::string& text, std::size_t limit);

struct Eli5Result {
    std::string text;
    int attempts = 0;
    bool truncated = false;
};
Eli5Result postprocess_eli5(const std::string& final_text, std::optional<std::int64_t> word_limit, LlmGateway& llm);

struct SynthOptions {
    bool eli5 = true;
};

// Insight QA, drafting and refinement for N rounds, merge, then ELI5.
// Throws Error{EmptyKnowledgeBase} for an empty KB.
SynthesisResult synthesize(const KnowledgeBase& kb, const std::string& query, const Config& config, LlmGateway& llm,
                           const SynthOptions& options = {});

std::string render_final_markdown(const SynthesisResult& result, const std::string& query);

// drafts/draft_k.md, qa_chain_k.jsonl, final.md, eli5.txt, synthesis_trace.jsonl.
std::vector<std::string> write_synthesis_outputs(const SynthesisResult& result, const std::string& query,
                                                 const std::string& dir);

}  // namespace caesar
