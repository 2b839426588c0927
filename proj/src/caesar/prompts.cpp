#include "caesar/prompts.hpp"

#include <cctype>

#include "caesar/error.hpp"

namespace caesar {

namespace {

// Bodies of the published prompts are kept verbatim (they are the published,
// abridged forms). Output-format sections appended after them exist so that
// responses can be parsed deterministically.

constexpr std::string_view kThinkInsights = R"(PAGE CONTENT: {page_content}

INITIAL QUERY: {initial_query}

PAST INSIGHTS: {past_insights|No past insights available.}

NEIGHBOR INSIGHTS: {neighbor_insights|No neighbor insights available.}

YOUR TASK:
Analyze this content and extract key insights focusing on:
- Novel patterns or unexpected connections
- Assumptions being made and alternative perspectives
- Interesting questions raised by the content
- How to answer the query
- How this builds upon or challenges past/neighbor insights

Depending on the complexity of the content, provide anywhere from 1 to 6 concise but substantive insights, but do not exceed ~600 words in total length:)";

constexpr std::string_view kActMetaStrategy = R"(CURRENT EXPLORATION CONTEXT:
- Current step: {current_step}/{max_steps}
- Current depth: {current_depth}/{max_depth}
- Web pages visited: {visited_count}
- Current URL: {current_url}

CURRENT EXPLORATION INSIGHTS:
{kb_context|No exploration insights available.}

HISTORICAL NAVIGATION PATTERNS:
{memory_context|No exploration history available.}

Analyze whether the agent should:
1. **EXPLORE** new un-visited pages to discover novel information or knowledge
2. **BACKTRACK** to the immediate previously visited page to try alternative paths
3. **WEB_SEARCH** relevant topics to address current exploration insights

Consider:
- Knowledge gaps vs areas of saturation
- Depth of current exploration branch
- Success patterns from previous decisions
- Risk/reward of new exploration vs consolidation

RESPONSE FORMAT:
ACTION: <EXPLORE | BACKTRACK | WEB_SEARCH>
QUERY: <refined web search query, only when ACTION is WEB_SEARCH>
REASONING: <one or two sentences>)";

constexpr std::string_view kActLinkSelect = R"(INITIAL QUERY: {initial_query}

CURRENT URL: {current_url}

CURRENT EXPLORATION INSIGHTS:
{kb_context|No exploration insights available.}

CANDIDATE LINKS:
{candidate_links}

YOUR TASK:
The agent has decided to EXPLORE. Rank the candidate links by how likely they are to
reveal novel, useful information for the query beyond what is already known, and pick
the single best un-visited link to open next.

RESPONSE FORMAT:
CHOICE: <number of the chosen link>
REASONING: <one sentence>)";

constexpr std::string_view kRoleGeneration = R"(INITIAL QUERY: {initial_query}

INITIAL SEARCH RESULTS:
{search_results|No search results available.}

YOUR TASK:
Write the system prompt for an autonomous web exploration agent that will research this
query. Define a specialized persona with an explicit goal and an exploration philosophy:
which kinds of sources to prioritize, when to drill deeper, and when to change direction.
Respond with the persona text only.)";

constexpr std::string_view kQueryExpansion = R"(INITIAL QUERY: {initial_query}

YOUR TASK:
Expand the query into up to {max_terms} auxiliary web search queries that approach it from
different angles. Respond with one search query per line and nothing else.)";

constexpr std::string_view kQaAnswer = R"(QUESTION: {question}

RETRIEVED INSIGHTS:
{retrieved_insights|No relevant insights available.}

YOUR TASK:
Answer the question using the retrieved insights. Be concise but substantive, and point
out any ambiguity or gap the insights leave open.)";

constexpr std::string_view kQaFollowup = R"(PREVIOUS INSIGHTS: {list_of_qa_insights}

YOUR TASK:
Based on the insights gathered so far, what is the next most important question to ask
to deepen understanding and reveal emergent patterns? The question should:
- Build on previous insights rather than repeat them
- Seek connections between different themes
- Identify gaps or contradictions to explore
- Move toward synthesis and creation rather than enumeration

RESPONSE FORMAT:
Respond with the question only, or with STOP if no further question is worthwhile.)";

constexpr std::string_view kDraftGeneration = R"(KEY INSIGHTS: {list_of_qa_insights}

PREVIOUS ARTIFACT: {artifact_text|No previous artifact available.}

YOUR TASK:
Drawing heavily upon the patterns that emerged from the key insights, and building upon the previous artifact, create a novel, exciting, and thought provoking artifact that creatively answers this query: {starting_query}
- Emergent patterns not visible in individual sources
- Novel discoveries, connections, or applications
- Surprising new directions or perspectives
- Interesting tensions, contradictions, or open questions

IMPORTANT: do NOT mention or reference the previous artifact, the new artifact should make sense by itself as a standalone text.
IMPORTANT: Avoid excessive jargon, ensure artifact text is well-organized (logical, clear, focused), and convincing to a skeptical reader

CITATIONS:
Support claims with inline source markers such as [1] or [2][4], using only the source
numbers listed with the key insights, and at most {max_citations} markers per sentence.)";

constexpr std::string_view kRefineQuery = R"(PREVIOUS QUERY: {previous_query}

PREVIOUS ARTIFACT: {artifact_text}

YOUR TASK:
Based on the previous query and artifact above, identify the most promising direction for deeper exploration. What NEW question or angle would:
- Build on the insights already discovered
- Explore gaps, contradictions, or unexplored connections
- Lead to novel perspectives or applications
- Go deeper rather than broader

The refined query should be concise (1-2 sentences), straightforward, clear, and understandable.

RESPONSE FORMAT:
Respond with the refined query only.)";

constexpr std::string_view kMergeDrafts = R"(ARTIFACT DRAFTS: {list_of_artifact_drafts}

YOUR TASK:
Create a comprehensive merged artifact that:
- Combines the draft artifacts into a single cohesive and complete artifact
- Selectively integrates the most interesting, relevant insights across all draft artifacts
- Discovers emergent patterns not visible in individual artifacts
- Further develops the core strengths while addressing the weaknesses of the draft artifacts

CITATIONS:
Keep the inline source markers such as [1] attached to the claims they support. Do not
invent new source numbers.)";

constexpr std::string_view kEli5Constrained = R"({artifact_text}

For the query answer above, write an "Explain Like I'm 5" (ELI5) explanation:
 - Do NOT mention or reference the original answer, your explanation should be a standalone text
 - Your target audience is a non-expert but college educated reader
 - Capture the main ideas without oversimplifying
 - Clarify any confusing or convoluted parts of the answer

IMPORTANT: Your explanation for each answer MUST be within {word_limit} words, double check to make sure)";

constexpr std::string_view kEli5Unconstrained = R"({artifact_text}

For the query answer above, write an "Explain Like I'm 5" (ELI5) explanation:
 - Do NOT mention or reference the original answer, your explanation should be a standalone text
 - Your target audience is a non-expert but college educated reader
 - Capture the main ideas without oversimplifying
 - Clarify any confusing or convoluted parts of the answer)";

constexpr std::string_view kJudgeRubric = R"(### Your Task

**Role:** You are an expert evaluator that is trying to mimic the behavior and thought process of a human judge. Your task is to score a set of answers from LLM agents using the "New, Useful, and Surprising" (NUS) metrics on a 1-10 scale.

### Scoring Guide Rubric

## 1. New (Global Novelty & Rarity)

**Overview:** Rarity of content. Is this a genuinely new invention or a familiar trope?

* **9-10 (Exceptional):** **Genuine invention.** No reliance on established tropes or archetypes; feels like a "first of its kind" concept.
* **7-8 (High):** **Fresh synthesis.** Combines known ideas in a novel way; avoids common "low-hanging fruit" concepts.
* **5-6 (Moderate):** **Clever remix.** Deviation from cliches is evident, but the idea is clearly built on familiar foundations.
* **3-4 (Low):** **Standard execution.** A competent but uninspired version of a well-known trope or common idea.
* **1-2 (Very Low):** **Generic cliche.** A simple restatement of the prompt or high-frequency training data response.

## 2. Useful (Viability & Alignment)

**Overview:** Logic and value. Is the idea actionable and aligned with the prompt's constraints?

* **9-10 (Exceptional):** **Optimal & Transformative.** Bulletproof logic that provides more insight or efficiency than the user anticipated.
* **7-8 (High):** **High-Value & Complete.** Robust, professional-grade output that addresses all nuances with no logical gaps.
* **5-6 (Moderate):** **Functional but Basic.** Addresses core requests but offers no additional depth; the bare minimum to be "correct."
* **3-4 (Low):** **Flawed or Superficial.** Fails to account for obvious constraints; technically on-topic but difficult to implement.
* **1-2 (Very Low):** **Counter-productive.** Irrelevant, logically broken, or rendered useless by the "New/Surprising" elements.

## 3. Surprising (Local Subversion & Trajectory)

**Overview:** Unpredictability of the path. Did the model take a "lateral leap" or the path of least resistance?

* **9-10 (Exceptional):** **Lateral leap.** Logic is sound but impossible to guess from the prompt; creates a genuine "wow" moment.
* **7-8 (High):** **Clever subversion.** Not the first or second thing a human would brainstorm; chooses a creative "side-path."
* **5-6 (Moderate):** **Minor pivot.** Follows a straightforward trajectory but adds a slight twist that prevents total predictability.
* **3-4 (Low):** **Linear extension.** A simple, logical "next step." If the prompt is A, the response is B.
* **1-2 (Very Low):** **Highly predictable.** The most obvious "default" answer; exactly what was expected with no deviation.

### Query

{query}

### Answers

{answers}

### Output Format

After any reasoning, emit exactly one line per answer label, in this form:
LABEL: new=<1-10> useful=<1-10> surprising=<1-10>)";

struct Entry {
    TemplateId id;
    const char* name;
    std::string_view body;
    Phase phase;
};

constexpr Entry kEntries[] = {
    {TemplateId::ThinkInsights, "think_insights", kThinkInsights, Phase::Explore},
    {TemplateId::ActMetaStrategy, "act_meta_strategy", kActMetaStrategy, Phase::Explore},
    {TemplateId::ActLinkSelect, "act_link_select", kActLinkSelect, Phase::Explore},
    {TemplateId::RoleGeneration, "role_generation", kRoleGeneration, Phase::Explore},
    {TemplateId::QueryExpansion, "query_expansion", kQueryExpansion, Phase::Explore},
    {TemplateId::QaAnswer, "qa_answer", kQaAnswer, Phase::Synthesis},
    {TemplateId::QaFollowup, "qa_followup", kQaFollowup, Phase::Synthesis},
    {TemplateId::DraftGeneration, "draft_generation", kDraftGeneration, Phase::Synthesis},
    {TemplateId::RefineQuery, "refine_query", kRefineQuery, Phase::Synthesis},
    {TemplateId::MergeDrafts, "merge_drafts", kMergeDrafts, Phase::Synthesis},
    {TemplateId::Eli5Constrained, "eli5_constrained", kEli5Constrained, Phase::Synthesis},
    {TemplateId::Eli5Unconstrained, "eli5_unconstrained", kEli5Unconstrained, Phase::Synthesis},
    {TemplateId::JudgeRubric, "judge_rubric", kJudgeRubric, Phase::Judge},
};

const Entry& entry(TemplateId id) {
    for (const auto& e : kEntries) {
        if (e.id == id) return e;
    }
    throw Error(ErrorCode::UnknownTemplate, "unknown template id");
}

bool is_name_char(char ch) {
    return std::isalnum(static_cast<unsigned char>(ch)) || ch == '_';
}

// Locates the placeholder starting at body[pos] == '{'. Returns the index one
// past the closing brace, or npos when the brace does not open a placeholder.
std::size_t scan_placeholder(std::string_view body, std::size_t pos, Placeholder& out) {
    std::size_t i = pos + 1;
    std::size_t name_begin = i;
    while (i < body.size() && is_name_char(body[i])) ++i;
    if (i == name_begin || i >= body.size()) return std::string_view::npos;
    out.name = std::string(body.substr(name_begin, i - name_begin));
    out.fallback.reset();
    if (body[i] == '}') return i + 1;
    if (body[i] != '|') return std::string_view::npos;
    std::size_t close = body.find('}', i + 1);
    if (close == std::string_view::npos) return std::string_view::npos;
    out.fallback = std::string(body.substr(i + 1, close - i - 1));
    return close + 1;
}

}  // namespace

const char* to_string(TemplateId id) { return entry(id).name; }

std::optional<TemplateId> template_from_string(std::string_view name) {
    for (const auto& e : kEntries) {
        if (name == e.name) return e.id;
    }
    return std::nullopt;
}

const std::vector<TemplateId>& all_templates() {
    static const std::vector<TemplateId> ids = [] {
        std::vector<TemplateId> out;
        for (const auto& e : kEntries) out.push_back(e.id);
        return out;
    }();
    return ids;
}

Phase phase_of(TemplateId id) { return entry(id).phase; }

std::string_view template_body(TemplateId id) { return entry(id).body; }

std::vector<Placeholder> placeholders(TemplateId id) {
    std::vector<Placeholder> out;
    std::string_view body = template_body(id);
    for (std::size_t i = 0; i < body.size(); ++i) {
        if (body[i] != '{') continue;
        Placeholder ph;
        std::size_t next = scan_placeholder(body, i, ph);
        if (next == std::string_view::npos) continue;
        out.push_back(std::move(ph));
        i = next - 1;
    }
    return out;
}

std::string render_body(std::string_view body, const Bindings& bindings) {
    std::string out;
    out.reserve(body.size() + 256);
    std::size_t i = 0;
    while (i < body.size()) {
        if (body[i] == '{') {
            Placeholder ph;
            std::size_t next = scan_placeholder(body, i, ph);
            if (next != std::string_view::npos) {
                auto it = bindings.find(ph.name);
                bool have = it != bindings.end();
                if (ph.fallback) {
                    out += (have && !it->second.empty()) ? it->second : *ph.fallback;
                } else if (have) {
                    out += it->second;
                } else {
                    throw Error(ErrorCode::MissingBinding, "missing binding for placeholder '" + ph.name + "'");
                }
                i = next;
                continue;
            }
        }
        out.push_back(body[i]);
        ++i;
    }
    return out;
}

std::string render(TemplateId id, const Bindings& bindings) {
    return render_body(template_body(id), bindings);
}

}  // namespace caesar
