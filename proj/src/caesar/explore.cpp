#include "caesar/explore.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <set>

#include "caesar/error.hpp"
#include "caesar/text.hpp"
#include "caesar/url.hpp"

namespace caesar {

using nlohmann::json;
namespace fs = std::filesystem;

const char* to_string(MetaAction a) {
    switch (a) {
        case MetaAction::Explore: return "explore";
        case MetaAction::Backtrack: return "backtrack";
        case MetaAction::WebSearch: return "web_search";
    }
    return "backtrack";
}

namespace {

std::string strip_markup(std::string_view s) {
    std::string out;
    for (char c : s) {
        if (c != '*' && c != '`' && c != '#' && c != '_') out += c;
    }
    return text::trim(out);
}

std::optional<MetaAction> keyword_action(std::string_view raw) {
    std::string s;
    for (char c : raw) {
        auto u = static_cast<unsigned char>(c);
        if (std::isalpha(u)) s += static_cast<char>(std::toupper(u));
        else if (c == '_' || c == '-' || c == ' ') s += ' ';
        else if (c == '<' || c == '>' || c == '.' || c == '!' || c == '"' || c == '\'') continue;
        else break;
    }
    s = text::collapse_whitespace(text::trim(s));
    if (s == "EXPLORE") return MetaAction::Explore;
    if (s == "BACKTRACK" || s == "BACK TRACK") return MetaAction::Backtrack;
    if (s == "WEB SEARCH" || s == "WEBSEARCH" || s == "SEARCH") return MetaAction::WebSearch;
    return std::nullopt;
}

// Value after "KEY:" when `line` starts with it (case-insensitive).
std::optional<std::string> field(const std::string& line, std::string_view key) {
    if (!text::starts_with_ci(line, key)) return std::nullopt;
    std::string rest = line.substr(key.size());
    rest = text::trim(rest);
    if (rest.empty() || rest[0] != ':') return std::nullopt;
    return text::trim(rest.substr(1));
}

std::vector<std::string> lines_of(const std::string& s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        auto nl = s.find('\n', start);
        if (nl == std::string::npos) nl = s.size();
        out.push_back(s.substr(start, nl - start));
        start = nl + 1;
    }
    return out;
}

}  // namespace

ParsedAction parse_meta_action(const std::string& response) {
    ParsedAction out;
    bool first = true;
    bool in_reasoning = false;
    for (const auto& raw : lines_of(response)) {
        std::string line = strip_markup(raw);
        if (line.empty()) continue;
        if (auto v = field(line, "ACTION")) {
            if (!out.action) out.action = keyword_action(*v);
            in_reasoning = false;
        } else if (auto q = field(line, "QUERY")) {
            if (out.query.empty()) out.query = *q;
            in_reasoning = false;
        } else if (auto r = field(line, "REASONING")) {
            out.reasoning = *r;
            in_reasoning = true;
        } else if (first && !out.action) {
            out.action = keyword_action(line);
        } else if (in_reasoning) {
            out.reasoning += " " + line;
        }
        first = false;
    }
    return out;
}

std::optional<std::size_t> parse_link_choice(const std::string& response) {
    auto digits_at = [](const std::string& s, std::size_t from) -> std::optional<std::size_t> {
        for (std::size_t i = from; i < s.size(); ++i) {
            if (std::isdigit(static_cast<unsigned char>(s[i]))) {
                std::size_t j = i;
                while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
                if (j - i > 9) return std::nullopt;
                return static_cast<std::size_t>(std::stoul(s.substr(i, j - i)));
            }
        }
        return std::nullopt;
    };
    for (const auto& raw : lines_of(response)) {
        std::string line = strip_markup(raw);
        if (auto v = field(line, "CHOICE")) return digits_at(*v, 0);
    }
    return digits_at(response, 0);
}

std::vector<std::string> parse_expansion(const std::string& response, const std::string& query, std::size_t max_terms) {
    std::vector<std::string> out;
    std::set<std::string> seen{text::to_lower(text::collapse_whitespace(text::trim(query)))};
    for (const auto& raw : lines_of(response)) {
        std::string line = text::trim(raw);
        std::size_t i = 0;
        while (i < line.size() && (line[i] == '-' || line[i] == '*' || line[i] == ' ')) ++i;
        std::size_t j = i;
        while (j < line.size() && std::isdigit(static_cast<unsigned char>(line[j]))) ++j;
        if (j > i && j < line.size() && (line[j] == '.' || line[j] == ')')) i = j + 1;
        line = text::trim(line.substr(i));
        if (line.size() >= 2 && (line.front() == '"' || line.front() == '\'') && line.back() == line.front()) {
            line = text::trim(line.substr(1, line.size() - 2));
        }
        if (line.empty()) continue;
        if (!seen.insert(text::to_lower(text::collapse_whitespace(line))).second) continue;
        out.push_back(line);
        if (out.size() >= max_terms) break;
    }
    return out;
}

json StepTrace::to_json() const {
    json j = {{"step", step},
              {"url", url},
              {"outcome", outcome},
              {"action", action ? json(caesar::to_string(*action)) : json(nullptr)},
              {"raw_action", raw_action},
              {"coerced_reason", coerced_reason},
              {"target", target ? json(*target) : json(nullptr)},
              {"query", query ? json(*query) : json(nullptr)},
              {"popped_to", popped_to ? json(*popped_to) : json(nullptr)},
              {"insight", insight},
              {"candidate_count", candidate_count},
              {"neighbor_blocks", neighbor_blocks},
              {"input_tokens", input_tokens},
              {"output_tokens", output_tokens},
              {"elapsed_ms", elapsed_ms},
              {"budget_after", budget_after},
              {"stack_after", stack_after},
              {"nodes_after", nodes_after},
              {"edges_after", edges_after}};
    if (!note.empty()) j["note"] = note;
    return j;
}

// ---------------------------------------------------------------------------

Explorer::Explorer(const Config& config, ExploreServices services)
    : config_(config),
      svc_(services),
      llm_(services.llm, config, services.ledger, services.retry),
      kb_(services.embedder),
      memory_(static_cast<std::size_t>(config.memory_recall_window)) {
    validate(config_);
    policy_.allowed_domains = config_.allowed_domains;
    policy_.max_revisits = config_.max_revisits;
    policy_.timeout_s = config_.fetch_timeout_s;
    limits_.max_page_chars = static_cast<std::size_t>(config_.max_page_chars);
    limits_.max_links = static_cast<std::size_t>(config_.max_links_per_page);
    budget_ = config_.exploration_budget;
}

void Explorer::bootstrap() {
    if (bootstrapped_) return;
    const std::string& q = config_.user_query;
    if (text::trim(q).empty()) throw Error(ErrorCode::InvalidArgument, "user_query is empty");

    try {
        auto res = llm_.complete(TemplateId::QueryExpansion,
                                 {{"initial_query", q}, {"max_terms", std::to_string(kExpansionTerms)}});
        expansion_ = parse_expansion(res.text, q, kExpansionTerms);
    } catch (const Error& e) {
        diagnostics_.push_back(std::string("query expansion failed, searching the query alone: ") + e.what());
    }

    std::vector<SearchResult> all = svc_.search.search(q);  // failure aborts the run
    for (const auto& term : expansion_) {
        try {
            auto more = svc_.search.search(term);
            all.insert(all.end(), more.begin(), more.end());
        } catch (const Error& e) {
            diagnostics_.push_back("auxiliary search failed for \"" + term + "\": " + e.what());
        }
    }
    auto results = dedupe_results(all);
    if (results.size() > limits_.max_links) results.resize(limits_.max_links);

    std::string root_url = synthetic_search_url(search_ordinal_++, q);
    std::string html = build_search_page(q, results);
    FetchedPage page = page_from_html(root_url, html, limits_);
    GraphNode& root = graph_.set_root(root_url, NodeKind::Root);
    root.title = page.title;
    root.status = NodeStatus::Ok;
    cache_[root_url] = {page.links, page.text};
    stack_.push_back(root_url);

    try {
        auto res = llm_.complete(TemplateId::RoleGeneration, {{"initial_query", q}, {"search_results", page.text}});
        role_ = text::trim(res.text);
    } catch (const Error& e) {
        diagnostics_.push_back(std::string("role generation failed: ") + e.what());
    }
    if (role_.empty()) {
        role_ = "You are a research agent exploring the web to answer: " + q +
                ". Prefer primary sources, go deeper when a page is rich, and change direction when it is not.";
        diagnostics_.push_back("role generation returned nothing; using the generic persona");
    }
    bootstrapped_ = true;
}

void Explorer::run() {
    bootstrap();
    while (!done()) step();
}

std::optional<Explorer::Perceived> Explorer::perceive(StepTrace& trace) {
    const std::string url = stack_.back();
    if (auto it = cache_.find(url); it != cache_.end()) return it->second;
    if (is_synthetic_url(url)) {
        trace.note = "synthetic page without content";
        return std::nullopt;
    }
    FetchedPage page;
    try {
        page = fetch(url, svc_.pages, policy_, limits_);
    } catch (const Error& e) {
        trace.note = std::string(to_string(e.code())) + ": " + e.what();
        return std::nullopt;
    }
    std::string final_url = page.url;
    if (final_url != url) {
        if (graph_.has(final_url)) {
            trace.note = "redirects to known node " + final_url;
            return std::nullopt;
        }
        graph_.rename(url, final_url);
        for (auto& s : stack_) {
            if (s == url) s = final_url;
        }
        memory_.rename_url(url, final_url);
        trace.url = final_url;
        trace.note = "redirected from " + url;
    }
    GraphNode& node = graph_.node(final_url);
    node.title = page.title;
    node.status = NodeStatus::Ok;
    Perceived p{std::move(page.links), std::move(page.text)};
    cache_[final_url] = p;
    return p;
}

std::string Explorer::neighbor_insights(const std::string& url, std::size_t& blocks) const {
    blocks = 0;
    const auto limit = static_cast<std::size_t>(config_.neighbor_context);
    std::vector<std::string> picked;
    std::set<std::string> used{url};
    auto take = [&](const std::string& u) {
        if (picked.size() >= limit || !used.insert(u).second) return;
        const auto& n = graph_.node(u);
        if (n.insights.empty()) return;
        picked.push_back("[NEIGHBOR " + std::to_string(picked.size() + 1) + "] " + u + "\n" + n.insights.back());
    };
    // Ancestors along the incoming path, nearest first.
    std::vector<std::string> ancestors;
    std::string cur = url;
    std::set<std::string> guard{url};
    while (true) {
        auto ps = graph_.parents(cur);
        if (ps.empty() || !guard.insert(ps.front()).second) break;
        ancestors.push_back(ps.front());
        cur = ps.front();
    }
    for (const auto& a : ancestors) take(a);
    // Siblings, newest first.
    auto ps = graph_.parents(url);
    if (!ps.empty()) {
        auto sibs = graph_.children(ps.front());
        for (auto it = sibs.rbegin(); it != sibs.rend(); ++it) take(*it);
    }
    blocks = picked.size();
    return text::join(picked, "\n\n");
}

std::string Explorer::kb_context() const {
    if (kb_.empty()) return {};
    auto hits = rerank(config_.user_query,
                       kb_.retrieve(config_.user_query, static_cast<std::size_t>(config_.retrieve_k)),
                       static_cast<std::size_t>(config_.rerank_n));
    std::vector<std::string> parts;
    for (std::size_t i = 0; i < hits.size(); ++i) {
        parts.push_back("[" + std::to_string(i + 1) + "] (" + hits[i].entry.metadata.source_url + ") " +
                        hits[i].entry.text);
    }
    return text::join(parts, "\n");
}

void Explorer::pop(StepTrace& trace) {
    stack_.pop_back();
    if (!stack_.empty()) trace.popped_to = stack_.back();
}

std::string Explorer::add_search_node(const std::string& parent, const std::string& query,
                                      const std::vector<SearchResult>& results, std::int64_t step) {
    auto deduped = dedupe_results(results);
    if (deduped.size() > limits_.max_links) deduped.resize(limits_.max_links);
    std::string url = synthetic_search_url(search_ordinal_++, query);
    FetchedPage page = page_from_html(url, build_search_page(query, deduped), limits_);
    GraphNode& n = graph_.add_child(parent, url, EdgeKind::Search, step);
    n.title = page.title;
    n.status = NodeStatus::Ok;
    cache_[url] = {page.links, page.text};
    return url;
}

StepTrace Explorer::step() {
    if (!bootstrapped_) throw Error(ErrorCode::InvalidArgument, "step() before bootstrap()");
    if (done()) throw Error(ErrorCode::InvalidArgument, "exploration already finished");

    const auto t0 = std::chrono::steady_clock::now();
    const auto in0 = svc_.ledger.total_input();
    const auto out0 = svc_.ledger.total_output();

    StepTrace trace;
    trace.step = ++steps_;
    --budget_;
    trace.url = stack_.back();
    graph_.node(trace.url).visit_count++;

    auto finish = [&]() -> StepTrace {
        trace.input_tokens = svc_.ledger.total_input() - in0;
        trace.output_tokens = svc_.ledger.total_output() - out0;
        trace.elapsed_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        trace.budget_after = budget_;
        trace.stack_after = stack_;
        trace.nodes_after = graph_.size();
        trace.edges_after = graph_.edges().size();
        traces_.push_back(trace);
        return trace;
    };

    // Perceive
    auto perceived = perceive(trace);
    const std::string url = trace.url;
    if (!perceived) {
        graph_.node(url).status = NodeStatus::Invalid;
        trace.outcome = "invalid";
        pop(trace);
        return finish();
    }
    GraphNode& node = graph_.node(url);
    if (!is_synthetic_url(url)) policy_.visit_counts[url] = node.visit_count;

    std::vector<std::string> candidates;
    for (auto& l : filter_links(perceived->links, policy_)) {
        if (!graph_.has(l)) candidates.push_back(std::move(l));
    }
    trace.candidate_count = candidates.size();

    // Think
    std::size_t blocks = 0;
    std::string neighbors = neighbor_insights(url, blocks);
    trace.neighbor_blocks = blocks;
    std::string insight;
    try {
        auto res = llm_.complete(TemplateId::ThinkInsights,
                                 {{"page_content", perceived->text},
                                  {"initial_query", config_.user_query},
                                  {"past_insights", text::join(node.insights, "\n\n")},
                                  {"neighbor_insights", neighbors}},
                                 role_);
        insight = text::trim(res.text);
    } catch (const Error& e) {
        graph_.node(url).status = NodeStatus::Invalid;
        trace.outcome = "think_failed";
        trace.note = e.what();
        diagnostics_.push_back("step " + std::to_string(trace.step) + ": think failed at " + url + ": " + e.what());
        pop(trace);
        return finish();
    }
    trace.insight = insight;
    if (!insight.empty()) {
        graph_.node(url).insights.push_back(insight);
        kb_.add(insight, {url, trace.step, graph_.node(url).depth, "explore"}, config_.chunk_size,
                config_.chunk_overlap);
    }

    // Act
    const std::int64_t depth = graph_.node(url).depth;
    std::string kb_ctx = kb_context();
    auto keywords = extract_keywords(insight);
    std::string mem_ctx = format_memory_context(memory_.recall(keywords));
    Bindings act = {{"current_step", std::to_string(trace.step)},
                    {"max_steps", std::to_string(config_.exploration_budget)},
                    {"current_depth", std::to_string(depth)},
                    {"max_depth", std::to_string(config_.max_depth)},
                    {"visited_count", std::to_string(graph_.size())},
                    {"current_url", url},
                    {"kb_context", kb_ctx},
                    {"memory_context", mem_ctx}};
    ParsedAction parsed;
    try {
        std::string prompt = render(TemplateId::ActMetaStrategy, act);
        auto res = llm_.complete_request(llm_.make_request(TemplateId::ActMetaStrategy, prompt, role_));
        parsed = parse_meta_action(res.text);
        if (!parsed.action) {
            auto again = llm_.complete_request(llm_.make_request(
                TemplateId::ActMetaStrategy,
                prompt + "\n\nYour previous reply could not be parsed. Reply again in the RESPONSE FORMAT above.",
                role_));
            parsed = parse_meta_action(again.text);
        }
    } catch (const Error& e) {
        trace.note = std::string("act failed: ") + e.what();
    }

    MetaAction action = MetaAction::Backtrack;
    if (parsed.action) {
        action = *parsed.action;
        trace.raw_action = to_string(action);
    } else {
        trace.raw_action = "unparseable";
        trace.coerced_reason = "unparseable meta-action";
    }
    if (action == MetaAction::Explore) {
        if (candidates.empty()) {
            action = MetaAction::Backtrack;
            trace.coerced_reason = "no candidate links";
        } else if (depth + 1 > config_.max_depth) {
            action = MetaAction::Backtrack;
            trace.coerced_reason = "max depth reached";
        }
    } else if (action == MetaAction::WebSearch) {
        if (searches_used_ >= config_.max_web_searches) {
            action = MetaAction::Backtrack;
            trace.coerced_reason = "web search budget exhausted";
        } else if (depth + 1 > config_.max_depth) {
            action = MetaAction::Backtrack;
            trace.coerced_reason = "max depth reached";
        }
    }
    trace.action = action;

    EpisodicRecord rec;
    rec.step = trace.step;
    rec.from_url = url;
    rec.reasoning = parsed.reasoning;
    rec.keywords = keywords;

    switch (action) {
        case MetaAction::Explore: {
            std::size_t shown = std::min(candidates.size(), kMaxCandidatesShown);
            std::vector<std::string> listing;
            for (std::size_t i = 0; i < shown; ++i) listing.push_back("[" + std::to_string(i) + "] " + candidates[i]);
            std::size_t choice = 0;
            try {
                auto res = llm_.complete(TemplateId::ActLinkSelect,
                                         {{"initial_query", config_.user_query},
                                          {"current_url", url},
                                          {"kb_context", kb_ctx},
                                          {"candidate_links", text::join(listing, "\n")}},
                                         role_);
                auto c = parse_link_choice(res.text);
                if (c && *c < shown) choice = *c;
            } catch (const Error& e) {
                trace.note = std::string("link selection failed, taking the first candidate: ") + e.what();
            }
            const std::string& next = candidates[choice];
            graph_.add_child(url, next, EdgeKind::Link, trace.step);
            stack_.push_back(next);
            trace.target = next;
            rec.action = MoveAction::Explore;
            rec.to_url = next;
            break;
        }
        case MetaAction::WebSearch: {
            ++searches_used_;
            std::string q2 = text::trim(parsed.query);
            if (q2.empty()) q2 = config_.user_query;
            trace.query = q2;
            rec.action = MoveAction::WebSearch;
            try {
                auto results = svc_.search.search(q2);
                std::string v_s = add_search_node(url, q2, results, trace.step);
                stack_.push_back(v_s);
                trace.target = v_s;
                rec.to_url = v_s;
            } catch (const Error& e) {
                trace.note = std::string("web search failed: ") + e.what();
                diagnostics_.push_back("step " + std::to_string(trace.step) + ": " + trace.note);
            }
            break;
        }
        case MetaAction::Backtrack: {
            pop(trace);
            rec.action = MoveAction::Backtrack;
            rec.to_url = trace.popped_to;
            break;
        }
    }
    try {
        memory_.record(std::move(rec));
    } catch (const Error& e) {
        diagnostics_.push_back("step " + std::to_string(trace.step) + ": memory rejected move: " + e.what());
    }
    return finish();
}

std::vector<std::string> Explorer::write_outputs(const std::string& dir) const {
    fs::create_directories(dir);
    graph_.save((fs::path(dir) / "graph.json").string());
    {
        std::ofstream out(fs::path(dir) / "trace.jsonl", std::ios::binary | std::ios::trunc);
        for (const auto& t : traces_) out << t.to_json().dump() << '\n';
        if (!out) throw Error(ErrorCode::Io, "cannot write trace.jsonl");
    }
    kb_.save_jsonl((fs::path(dir) / "kb.jsonl").string());
    memory_.save_jsonl((fs::path(dir) / "memory.jsonl").string());
    {
        std::ofstream out(fs::path(dir) / "role.txt", std::ios::binary | std::ios::trunc);
        out << role_ << '\n';
        if (!out) throw Error(ErrorCode::Io, "cannot write role.txt");
    }
    return {"graph.json", "trace.jsonl", "kb.jsonl", "memory.jsonl", "role.txt"};
}

}  // namespace caesar
