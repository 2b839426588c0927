// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <array>
#include <functional>
#include <numeric>
#include <iostream>
#include <regex>
#include <sstream>

#include "caesar/error.hpp"
#include "caesar/explore.hpp"
#include "caesar/graph_export.hpp"
#include "caesar/judge.hpp"
#include "caesar/knowledge.hpp"
#include "caesar/mwu.hpp"
#include "caesar/pipeline.hpp"
#include "caesar/prompts.hpp"
#include "caesar/synth.hpp"
#include "caesar/text.hpp"
#include "testkit.hpp"

using namespace caesar;
using nlohmann::json;
using testkit::ScriptStep;
namespace fs = std::filesystem;

namespace {

// Tolerances
constexpr double kRunSecondsMax = 10.0;
constexpr double kMwuExactTol = 1e-12;
constexpr double kNormalVsExactTol = 0.01;
constexpr double kBiasTol = 1e-9;
constexpr double kLinearityTol = 0.05;
constexpr std::size_t kEli5Limit = 450;

struct Check {
    bool ok = true;
    std::ostringstream detail;
    std::size_t violations = 0;

    void expect(bool cond, const std::string& what) {
        if (cond) return;
        ++violations;
        if (ok) detail << what;
        ok = false;
    }
};

int failures = 0;

void criterion(const std::string& name, const std::function<std::string(Check&)>& body) {
    Check c;
    std::string info;
    auto t0 = std::chrono::steady_clock::now();
    try {
        info = body(c);
    } catch (const std::exception& e) {
        c.ok = false;
        c.detail << "exception: " << e.what();
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!c.ok) ++failures;
    std::cout << (c.ok ? "PASS" : "FAIL") << "  " << name << "  [" << std::fixed;
    std::cout.precision(2);
    std::cout << secs << "s]";
    if (!c.ok) std::cout << "  " << c.violations << " violation(s); first: " << c.detail.str();
    else if (!info.empty()) std::cout << "  " << info;
    std::cout << std::endl;
}

// ---------------------------------------------------------------------------
// Shared scaffolding

const std::string kQuery = "how do solar sails steer";

std::string page_url(const std::string& name) { return "https://site.test/" + name; }

json results(const std::vector<std::string>& names) {
    json arr = json::array();
    for (const auto& n : names) arr.push_back({{"url", page_url(n)}, {"title", n}, {"snippet", "about " + n}});
    return arr;
}

// Routes exploration templates to one provider and everything else to another.
class Router : public ChatProvider {
public:
    Router(ChatProvider& explore, ChatProvider& synth) : explore_(explore), synth_(synth) {}
    std::string name() const override { return "router"; }
    ChatResponse complete(const ChatRequest& r) override {
        return phase_of(r.template_id) == Phase::Explore ? explore_.complete(r) : synth_.complete(r);
    }

private:
    ChatProvider& explore_;
    ChatProvider& synth_;
};

// Reports the same token counts for every call.
class ConstantCost : public ChatProvider {
public:
    explicit ConstantCost(std::unique_ptr<ChatProvider> inner) : inner_(std::move(inner)) {}
    std::string name() const override { return "constant-cost"; }
    ChatResponse complete(const ChatRequest& r) override {
        auto res = inner_->complete(r);
        res.input_token_count = 120;
        res.output_token_count = 30;
        return res;
    }

private:
    std::unique_ptr<ChatProvider> inner_;
};

class OwnedRouter : public ChatProvider {
public:
    OwnedRouter(std::unique_ptr<testkit::ScriptedExplorerLlm> e, std::unique_ptr<testkit::SynthLlm> s)
        : explore(std::move(e)), synth(std::move(s)), router_(*explore, *synth) {}
    std::string name() const override { return "owned-router"; }
    ChatResponse complete(const ChatRequest& r) override { return router_.complete(r); }

    std::unique_ptr<testkit::ScriptedExplorerLlm> explore;
    std::unique_ptr<testkit::SynthLlm> synth;

private:
    Router router_;
};

struct Site {
    testkit::MemoryPageSource pages;
    std::map<std::string, std::vector<std::string>> links;  // url -> hrefs (absolute)

    void add(const std::string& name, const std::vector<std::string>& to, const std::string& body = "") {
        std::vector<std::string> hrefs;
        for (const auto& t : to) hrefs.push_back(page_url(t));
        links[page_url(name)] = hrefs;
        std::string para = body.empty() ? "Notes on " + name + " and how sails use light pressure to turn." : body;
        pages.add_html(page_url(name), testkit::html_page(name, {para}, hrefs));
    }
};

std::vector<std::string> read_lines(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string line;
    while (std::getline(in, line)) out.push_back(line);
    return out;
}

int run_cli(const std::string& args) {
    std::string cmd = "'" + testkit::cli_path() + "' " + args + " >/dev/null 2>&1";
    int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

// Every [n] in final.md resolves through its Sources table to a URL in kb.jsonl and graph.json.
void check_citations(Check& c, const std::string& dir, std::size_t& markers) {
    std::string md = testkit::read_file(fs::path(dir) / "final.md");
    auto sources = json::parse(testkit::read_file(fs::path(dir) / "citations.json"))["sources"];
    auto graph = ExplorationGraph::load((fs::path(dir) / "graph.json").string());
    std::set<std::string> kb_urls;
    for (const auto& e : read_jsonl((fs::path(dir) / "kb.jsonl").string())) {
        kb_urls.insert(e["metadata"]["source_url"].get<std::string>());
    }
    std::map<std::string, std::string> table;
    static const std::regex row(R"(^\| (\d+) \| (.+) \|$)");
    auto body_end = md.find("\n## Sources");
    for (const auto& line : read_lines(md.substr(body_end == std::string::npos ? md.size() : body_end))) {
        std::smatch m;
        if (std::regex_match(line, m, row)) table[m[1].str()] = m[2].str();
    }
    std::string body = md.substr(0, body_end);
    static const std::regex marker(R"(\[(\d+)\])");
    for (auto it = std::sregex_iterator(body.begin(), body.end(), marker); it != std::sregex_iterator(); ++it) {
        ++markers;
        std::string id = (*it)[1].str();
        auto t = table.find(id);
        c.expect(t != table.end(), dir + ": marker [" + id + "] missing from the Sources table");
        if (t == table.end()) continue;
        c.expect(sources.contains(id) && sources[id] == t->second, dir + ": table row " + id + " disagrees with citations.json");
        c.expect(kb_urls.count(t->second) == 1, dir + ": [" + id + "] " + t->second + " not in kb.jsonl");
        c.expect(graph.has(t->second), dir + ": [" + id + "] " + t->second + " not in graph.json");
    }
}

std::vector<std::string> hermetic_runs;  // run directories for the citation check

// ---------------------------------------------------------------------------
// Exploration oracle: the exploration loop replayed over an abstract site.

struct OracleState {
    std::vector<std::string> nodes;
    std::vector<std::tuple<std::string, std::string, EdgeKind>> edges;
    std::vector<std::string> stack;
    std::int64_t budget = 0;
};

class Oracle {
public:
    Oracle(std::map<std::string, std::vector<std::string>> site, json search, std::vector<ScriptStep> script,
           std::int64_t budget, std::int64_t max_searches)
        : site_(std::move(site)), search_(std::move(search)), script_(std::move(script)), max_searches_(max_searches) {
        s.budget = budget;
        std::string root = synthetic_search_url(0, kQuery);
        links_[root] = search_links(kQuery);
        add_node(root);
        s.stack.push_back(root);
    }

    bool done() const { return s.budget <= 0 || s.stack.empty(); }

    void step() {
        --s.budget;
        std::string url = s.stack.back();
        auto page = links_.find(url);
        if (page == links_.end()) {
            auto real = site_.find(url);
            if (real == site_.end()) {  // 404
                s.stack.pop_back();
                return;
            }
            page = links_.emplace(url, real->second).first;
        }
        std::vector<std::string> cand;
        for (const auto& l : page->second) {
            if (!known_.count(l) && std::find(cand.begin(), cand.end(), l) == cand.end()) cand.push_back(l);
        }
        ScriptStep st = cursor_ < script_.size() ? script_[cursor_++] : ScriptStep{ScriptStep::Backtrack};
        auto kind = st.kind == ScriptStep::Garbage ? ScriptStep::Backtrack : st.kind;
        if (kind == ScriptStep::Explore && cand.empty()) kind = ScriptStep::Backtrack;
        if (kind == ScriptStep::WebSearch && searches_ >= max_searches_) kind = ScriptStep::Backtrack;
        switch (kind) {
            case ScriptStep::Explore: {
                std::size_t shown = std::min<std::size_t>(cand.size(), 200);
                std::string next = cand[st.choice < shown ? st.choice : 0];
                add_node(next);
                s.edges.emplace_back(url, next, EdgeKind::Link);
                s.stack.push_back(next);
                break;
            }
            case ScriptStep::WebSearch: {
                ++searches_;
                std::string q = st.query.empty() ? kQuery : st.query;
                std::string v = synthetic_search_url(ordinal_++, q);
                links_[v] = search_links(q);
                add_node(v);
                s.edges.emplace_back(url, v, EdgeKind::Search);
                s.stack.push_back(v);
                break;
            }
            default:
                s.stack.pop_back();
        }
    }

    OracleState s;

private:
    std::vector<std::string> search_links(const std::string& q) const {
        json r = search_.contains("queries") && search_["queries"].contains(q) ? search_["queries"][q]
                                                                                : search_.value("default", json::array());
        std::vector<std::string> out;
        for (const auto& x : r) {
            std::string u = x["url"];
            if (std::find(out.begin(), out.end(), u) == out.end()) out.push_back(u);
        }
        return out;
    }
    void add_node(const std::string& u) {
        s.nodes.push_back(u);
        known_.insert(u);
    }

    std::map<std::string, std::vector<std::string>> site_;
    json search_;
    std::vector<ScriptStep> script_;
    std::int64_t max_searches_;
    std::size_t cursor_ = 0;
    std::int64_t searches_ = 0;
    std::size_t ordinal_ = 1;
    std::set<std::string> known_;
    std::map<std::string, std::vector<std::string>> links_;
};

OracleState engine_state(const Explorer& ex) {
    OracleState s;
    for (const auto& n : ex.graph().nodes()) s.nodes.push_back(n.url);
    for (const auto& e : ex.graph().edges()) s.edges.emplace_back(e.from, e.to, e.kind);
    s.stack = ex.stack();
    s.budget = ex.budget();
    return s;
}

std::string diff_state(const OracleState& a, const OracleState& b) {
    if (a.nodes != b.nodes) return "nodes differ";
    if (a.edges != b.edges) return "edges differ";
    if (a.stack != b.stack) return "stack differs";
    if (a.budget != b.budget) return "budget differs";
    return {};
}

struct ExploreCase {
    std::string name;
    Site site;
    json search;
    std::vector<ScriptStep> script;
    std::int64_t budget = 10;
    std::int64_t max_searches = 30;
    // Hand table: expected stack (page names, "root", or "s<n>") after each step.
    std::vector<std::vector<std::string>> hand_stacks;
    std::vector<std::pair<std::size_t, std::size_t>> hand_counts;  // (nodes, edges) after each step
    std::map<std::string, std::string> search_names;              // "s1" -> query
};

ScriptStep E(std::size_t c = 0) { return {ScriptStep::Explore, c, ""}; }
ScriptStep B() { return {ScriptStep::Backtrack, 0, ""}; }
ScriptStep W(const std::string& q) { return {ScriptStep::WebSearch, 0, q}; }
ScriptStep G() { return {ScriptStep::Garbage, 0, ""}; }

std::vector<ExploreCase> explore_cases() {
    std::vector<ExploreCase> cs;
    {
        ExploreCase c;
        c.name = "chain E,E,B,B";
        c.site.add("p1", {"p2"});
        c.site.add("p2", {"p3"});
        c.site.add("p3", {});
        c.search = {{"default", results({"p1"})}};
        c.script = {E(), E(), B(), B()};
        c.budget = 4;
        c.hand_stacks = {{"root", "p1"}, {"root", "p1", "p2"}, {"root", "p1"}, {"root"}};
        c.hand_counts = {{2, 1}, {3, 2}, {3, 2}, {3, 2}};
        cs.push_back(std::move(c));
    }
    {
        ExploreCase c;
        c.name = "invalid page and web search";
        c.site.add("p1", {"p2"});
        c.site.add("p2", {});
        c.site.add("p3", {});
        c.search = {{"queries", {{kQuery, results({"p1", "p4"})}, {"vanes", results({"p2", "p3"})}}}};
        c.script = {E(1), E(0), W("vanes"), E(1), B(), B(), B()};
        c.budget = 8;
        c.search_names = {{"s1", "vanes"}};
        c.hand_stacks = {{"root", "p4"},        {"root"},       {"root", "p1"},     {"root", "p1", "s1"},
                         {"root", "p1", "s1", "p3"}, {"root", "p1", "s1"}, {"root", "p1"}, {"root"}};
        c.hand_counts = {{2, 1}, {2, 1}, {3, 2}, {4, 3}, {5, 4}, {5, 4}, {5, 4}, {5, 4}};
        cs.push_back(std::move(c));
    }
    {
        ExploreCase c;
        c.name = "garbage replies and out-of-range choices";
        c.site.add("p1", {"p2", "p3"});
        c.site.add("p2", {"p1", "p3"});
        c.site.add("p3", {"p1"});
        c.search = {{"default", results({"p1", "p2", "p3"})}};
        c.script = {E(7), G(), E(2), E(0), G(), E(5), B(), B(), B()};
        c.budget = 12;
        cs.push_back(std::move(c));
    }
    {
        ExploreCase c;
        c.name = "web search cap";
        c.site.add("p1", {"p2"});
        c.site.add("p2", {});
        c.search = {{"default", results({"p1", "p2"})}};
        c.script = {W("a"), W("b"), W("c"), E(0), W(""), B(), B(), B(), B()};
        c.budget = 10;
        c.max_searches = 2;
        cs.push_back(std::move(c));
    }
    {
        ExploreCase c;
        c.name = "long mixed walk";
        std::mt19937_64 rng(2024);
        for (int i = 0; i < 20; ++i) {
            std::vector<std::string> to;
            for (int k = 0; k < 4; ++k) to.push_back("p" + std::to_string(rng() % 24));  // p20..p23 are missing
            c.site.add("p" + std::to_string(i), to);
        }
        c.search = {{"queries", {{"alt", results({"p7", "p8", "p22"})}}}, {"default", results({"p0", "p1", "p21"})}};
        for (int i = 0; i < 45; ++i) {
            auto r = rng() % 10;
            if (r < 5) c.script.push_back(E(rng() % 4));
            else if (r < 7) c.script.push_back(B());
            else if (r < 9) c.script.push_back(W(rng() % 2 ? "alt" : "fresh"));
            else c.script.push_back(G());
        }
        c.budget = 40;
        c.max_searches = 6;
        cs.push_back(std::move(c));
    }
    return cs;
}

// ---------------------------------------------------------------------------
// Randomized cap scripts

struct CapWorld {
    Config cfg;
    Site site;
    std::unique_ptr<FixtureSearchProvider> search;
    HashEmbedder embedder;
    TokenLedger ledger;
    std::unique_ptr<testkit::ScriptedExplorerLlm> llm;
};

}  // namespace

int main() {
    std::cout << "caesar acceptance suite" << std::endl;
    testkit::TempDir work("acceptance");

    criterion("hermetic end-to-end determinism (3 runs, T=25 N=3 T_hat=5)", [&](Check& c) {
        std::vector<std::map<std::string, std::string>> outputs;
        double slowest = 0;
        for (int run = 0; run < 3; ++run) {
            auto cfg = load_config_file(testkit::demo_config());
            c.expect(cfg.exploration_budget == 25 && cfg.refinement_rounds == 3 && cfg.insight_budget == 5,
                     "demo config is not T=25 N=3 T_hat=5");
            ProviderSpec spec;
            spec.corpus_manifest = testkit::demo_manifest();
            spec.llm_fixture = testkit::demo_llm();
            auto providers = make_providers(spec, cfg);
            std::string dir = (work / ("determinism_" + std::to_string(run))).string();
            PipelineOptions opt;
            opt.retry = {1, std::chrono::milliseconds(0)};
            auto t0 = std::chrono::steady_clock::now();
            auto out = run_pipeline(cfg, providers, dir, opt);
            double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            slowest = std::max(slowest, secs);
            c.expect(out.exit_code() == 0, "run " + std::to_string(run) + " exit code " + std::to_string(out.exit_code()));
            c.expect(secs < kRunSecondsMax, "run took " + std::to_string(secs) + " s");
            std::map<std::string, std::string> files;
            for (const char* f : {"graph.json", "kb.jsonl", "final.md"}) files[f] = testkit::read_file(fs::path(dir) / f);
            c.expect(!files["final.md"].empty() && !files["kb.jsonl"].empty(), "empty outputs");
            outputs.push_back(std::move(files));
            hermetic_runs.push_back(dir);
        }
        for (int run = 1; run < 3; ++run) {
            for (const auto& [f, content] : outputs[0]) {
                c.expect(outputs[run].at(f) == content, f + " differs between run 0 and run " + std::to_string(run));
            }
        }
        std::ostringstream info;
        info << "graph.json/kb.jsonl/final.md identical; slowest run " << slowest << " s";
        return info.str();
    });

    criterion("exploration trace equivalence (5 scripts, zero tolerance)", [&](Check& c) {
        std::size_t steps = 0, hand_rows = 0;
        for (auto& k : explore_cases()) {
            Config cfg;
            cfg.user_query = kQuery;
            cfg.exploration_budget = k.budget;
            cfg.max_web_searches = k.max_searches;
            FixtureSearchProvider search(k.search);
            HashEmbedder emb;
            TokenLedger ledger;
            testkit::ScriptedExplorerLlm llm(k.script);
            llm.record_requests = false;
            Explorer ex(cfg, ExploreServices{llm, search, k.site.pages, emb, ledger, {1, std::chrono::milliseconds(0)}});
            ex.bootstrap();
            Oracle oracle(k.site.links, k.search, k.script, k.budget, k.max_searches);
            auto d = diff_state(engine_state(ex), oracle.s);
            c.expect(d.empty(), k.name + ": after bootstrap " + d);
            std::map<std::string, std::string> names = {{"root", synthetic_search_url(0, kQuery)}};
            std::size_t ord = 1;
            for (const auto& [sn, q] : k.search_names) names[sn] = synthetic_search_url(ord++, q);
            std::size_t i = 0;
            while (!ex.done()) {
                c.expect(!oracle.done(), k.name + ": oracle finished first at step " + std::to_string(i + 1));
                if (oracle.done()) break;
                ex.step();
                oracle.step();
                ++steps;
                auto dd = diff_state(engine_state(ex), oracle.s);
                c.expect(dd.empty(), k.name + ": step " + std::to_string(i + 1) + " " + dd);
                if (i < k.hand_stacks.size()) {
                    std::vector<std::string> want;
                    for (const auto& n : k.hand_stacks[i]) want.push_back(names.count(n) ? names[n] : page_url(n));
                    c.expect(ex.stack() == want, k.name + ": step " + std::to_string(i + 1) + " stack != hand table");
                    c.expect(ex.graph().size() == k.hand_counts[i].first &&
                                 ex.graph().edges().size() == k.hand_counts[i].second,
                             k.name + ": step " + std::to_string(i + 1) + " node/edge counts != hand table");
                    c.expect(ex.budget() == k.budget - static_cast<std::int64_t>(i + 1),
                             k.name + ": budget != hand table");
                    ++hand_rows;
                }
                ++i;
            }
            c.expect(oracle.done(), k.name + ": engine finished before the oracle");
            c.expect(i >= k.hand_stacks.size(), k.name + ": fewer steps than the hand table");
        }
        return std::to_string(steps) + " steps matched, " + std::to_string(hand_rows) + " hand-table rows";
    });

    criterion("budget and cap enforcement (100 random seeds)", [&](Check& c) {
        std::size_t total_steps = 0, max_searches = 0, max_cand = 0, max_page = 0, max_blocks = 0, max_pairs = 0,
                    max_cites = 0, max_chain = 0, max_chain30 = 0;
        for (std::uint64_t seed = 1; seed <= 100; ++seed) {
            std::mt19937_64 rng(seed);
            CapWorld w;
            w.cfg.user_query = kQuery;
            w.cfg.exploration_budget = 5 + static_cast<std::int64_t>(rng() % 116);
            // Odd seeds keep the default T_hat=30; even seeds go past H_c=50 to load the history window.
            if (seed % 2 == 0) w.cfg.insight_budget = 1 + static_cast<std::int64_t>(rng() % 70);
            const int n_pages = 30;
            for (int i = 0; i < n_pages; ++i) {
                std::vector<std::string> to;
                for (int k = 0; k < 5; ++k) to.push_back("p" + std::to_string(rng() % (n_pages + 6)));
                if (rng() % 4 == 0) to.push_back("wide");
                if (rng() % 4 == 0) to.push_back("long");
                w.site.add("p" + std::to_string(i), to);
            }
            std::vector<std::string> wide;
            for (int i = 0; i < 2500; ++i) wide.push_back("x" + std::to_string(i));
            w.site.add("wide", wide);
            std::string big;
            while (big.size() < 250000) big += "solar sail photon pressure tilt vane orbit steering attitude control ";
            w.site.add("long", {"p1"}, big);
            w.search = std::make_unique<FixtureSearchProvider>(
                json{{"default", results({"p0", "wide", "long", "p1", "p2", "p3", "p4", "p5"})}});
            std::vector<ScriptStep> script;
            for (std::int64_t i = 0; i < w.cfg.exploration_budget + 10; ++i) {
                auto r = rng() % 100;
                if (r < 45) script.push_back(E(rng() % 8));
                else if (r < 60) script.push_back(B());
                else if (r < 95) script.push_back(W("q" + std::to_string(rng() % 5)));
                else script.push_back(G());
            }
            w.llm = std::make_unique<testkit::ScriptedExplorerLlm>(script);
            Explorer ex(w.cfg, ExploreServices{*w.llm, *w.search, w.site.pages, w.embedder, w.ledger,
                                               {1, std::chrono::milliseconds(0)}});
            ex.run();
            const std::string tag = "seed " + std::to_string(seed) + ": ";
            total_steps += ex.traces().size();
            c.expect(static_cast<std::int64_t>(ex.traces().size()) <= w.cfg.exploration_budget, tag + "iterations > T");
            c.expect(ex.web_searches_used() <= w.cfg.max_web_searches, tag + "web searches > S_m");
            std::size_t search_edges = 0;
            for (const auto& e : ex.graph().edges()) search_edges += e.kind == EdgeKind::Search;
            c.expect(search_edges <= static_cast<std::size_t>(w.cfg.max_web_searches), tag + "search nodes > S_m");
            max_searches = std::max(max_searches, search_edges);
            for (const auto& t : ex.traces()) {
                c.expect(t.candidate_count <= static_cast<std::size_t>(w.cfg.max_links_per_page), tag + "links > L_m");
                c.expect(t.neighbor_blocks <= static_cast<std::size_t>(w.cfg.neighbor_context), tag + "blocks > N_c");
                max_cand = std::max(max_cand, t.candidate_count);
            }
            for (const auto& r : w.llm->requests) {
                if (r.template_id != TemplateId::ThinkInsights) continue;
                auto page = testkit::think_page_content(r.user);
                c.expect(page.size() <= static_cast<std::size_t>(w.cfg.max_page_chars), tag + "page text > P_m");
                auto blocks = testkit::count_occurrences(r.user, "[NEIGHBOR ");
                c.expect(blocks <= static_cast<std::size_t>(w.cfg.neighbor_context), tag + "neighbor blocks in prompt > N_c");
                max_page = std::max(max_page, page.size());
                max_blocks = std::max(max_blocks, blocks);
            }
            if (ex.kb().empty()) continue;

            TokenLedger ledger;
            testkit::SynthLlm synth;
            synth.handlers[TemplateId::QaFollowup] = [](const ChatRequest&, std::size_t k) {
                return "what else steers sail " + std::to_string(k);
            };
            auto marks = [&rng](const ChatRequest&, std::size_t) {
                std::string s;
                for (int sent = 0; sent < 4; ++sent) {
                    s += "Claim number " + std::to_string(sent) + " about sails";
                    auto n = rng() % 13;
                    for (std::size_t m = 0; m < n; ++m) s += " [" + std::to_string(1 + rng() % 15) + "]";
                    s += ". ";
                }
                return s;
            };
            synth.handlers[TemplateId::DraftGeneration] = marks;
            synth.handlers[TemplateId::MergeDrafts] = marks;
            LlmGateway gw(synth, w.cfg, ledger, {1, std::chrono::milliseconds(0)});
            auto r = synthesize(ex.kb(), kQuery, w.cfg, gw);
            c.expect(r.history.size() == static_cast<std::size_t>(w.cfg.refinement_rounds), tag + "drafts != N");
            static const std::regex pair_re(R"((^|\s)Q\d+: )");
            for (const auto& ch : r.chains) {
                c.expect(ch.items.size() <= static_cast<std::size_t>(w.cfg.insight_budget), tag + "QA chain > T_hat");
                max_chain = std::max(max_chain, ch.items.size());
                if (w.cfg.insight_budget == 30) max_chain30 = std::max(max_chain30, ch.items.size());
                for (const auto& p : ch.followup_prompts) {
                    auto n = static_cast<std::size_t>(
                        std::distance(std::sregex_iterator(p.begin(), p.end(), pair_re), std::sregex_iterator()));
                    c.expect(n <= static_cast<std::size_t>(w.cfg.max_qa_history), tag + "QA history > H_c");
                    max_pairs = std::max(max_pairs, n);
                }
            }
            auto check_map = [&](const CitationMap& m) {
                for (const auto& [claim, ids] : m) {
                    c.expect(ids.size() <= static_cast<std::size_t>(w.cfg.max_citations_per_claim), tag + "citations > C_m");
                    max_cites = std::max(max_cites, ids.size());
                }
            };
            for (const auto& d : r.history) check_map(d.citations);
            check_map(r.final_citations);
            check_map(r.final_claims);
            static const std::regex marker(R"(\[(\d+)\])");
            for (const auto& sp : text::sentence_spans(r.final_text)) {
                std::string s = r.final_text.substr(sp.begin, sp.end - sp.begin);
                std::set<std::string> ids;
                for (auto it = std::sregex_iterator(s.begin(), s.end(), marker); it != std::sregex_iterator(); ++it) {
                    ids.insert((*it)[1].str());
                }
                c.expect(ids.size() <= static_cast<std::size_t>(w.cfg.max_citations_per_claim),
                         tag + "final sentence with > C_m markers");
            }
        }
        std::ostringstream info;
        info << total_steps << " steps; maxima: searches " << max_searches << "/30, links " << max_cand
             << "/2000, page chars " << max_page << "/100000, neighbor blocks " << max_blocks << "/5, QA history "
             << max_pairs << "/50, citations " << max_cites << "/5, chain at T_hat=30 " << max_chain30 << ", chain overall " << max_chain;
        return info.str();
    });

    criterion("retrieval oracle equivalence (50 KBs, k=50, n=10)", [&](Check& c) {
        std::mt19937_64 rng(77);
        std::size_t total = 0;
        auto word = [&rng]() { return "w" + std::to_string(rng() % 400); };
        for (int kbi = 0; kbi < 50; ++kbi) {
            HashEmbedder emb(256);
            KnowledgeBase kb(emb);
            std::size_t n = 1 + rng() % 1000;
            for (std::size_t i = 0; i < n; ++i) {
                std::string t;
                std::size_t len = 3 + rng() % 30;
                for (std::size_t k = 0; k < len; ++k) t += (k ? " " : "") + word();
                kb.add(t, {"https://kb.test/" + std::to_string(i % 37), static_cast<std::int64_t>(i), 0}, 400, 80);
            }
            total += kb.size();
            std::string q;
            std::size_t ql = 2 + rng() % 8;
            for (std::size_t k = 0; k < ql; ++k) q += (k ? " " : "") + word();
            if (kbi % 5 == 0) q += " " + q;  // repeated query terms

            HashEmbedder oracle_emb(256);
            auto qv = oracle_emb.embed(q);
            auto snap = kb.snapshot();
            std::vector<std::pair<double, std::size_t>> scored;
            for (std::size_t i = 0; i < snap.size(); ++i) {
                double s = 0;
                for (std::size_t d = 0; d < 256; ++d) s += qv[d] * snap[i].embedding[d];
                scored.emplace_back(s, i);
            }
            std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
            scored.resize(std::min<std::size_t>(50, scored.size()));
            auto got = kb.retrieve(q, 50);
            c.expect(got.size() == scored.size(), "KB " + std::to_string(kbi) + ": size mismatch");
            for (std::size_t i = 0; i < std::min(got.size(), scored.size()); ++i) {
                c.expect(got[i].entry.entry_id == snap[scored[i].second].entry_id && got[i].score == scored[i].first,
                         "KB " + std::to_string(kbi) + ": rank " + std::to_string(i) + " differs");
            }
            // Lexical overlap oracle: every token here is a non-stopword "w<n>".
            std::map<std::string, int> qcount;
            for (const auto& t : text::split_whitespace(q)) ++qcount[t];
            std::vector<std::pair<int, std::size_t>> lex;
            for (std::size_t i = 0; i < got.size(); ++i) {
                auto toks = text::split_whitespace(got[i].entry.text);
                std::set<std::string> present(toks.begin(), toks.end());
                int s = 0;
                for (const auto& [t, k] : qcount) s += present.count(t) ? k : 0;
                lex.emplace_back(s, i);
            }
            std::stable_sort(lex.begin(), lex.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
            lex.resize(std::min<std::size_t>(10, lex.size()));
            auto rr = rerank(q, got, 10);
            c.expect(rr.size() == lex.size(), "KB " + std::to_string(kbi) + ": rerank size mismatch");
            for (std::size_t i = 0; i < std::min(rr.size(), lex.size()); ++i) {
                c.expect(rr[i].entry.entry_id == got[lex[i].second].entry.entry_id,
                         "KB " + std::to_string(kbi) + ": rerank rank " + std::to_string(i) + " differs");
            }
        }
        return std::to_string(total) + " entries across 50 KBs";
    });

    criterion("chunking round-trip (200 texts, 400/80)", [&](Check& c) {
        std::mt19937_64 rng(4242);
        const char* seps[] = {" ", "  ", "\n", "\t", " \n "};
        std::size_t chunks_seen = 0;
        for (int t = 0; t < 200; ++t) {
            std::size_t tokens = t == 0 ? 0 : rng() % 5001;
            std::size_t n_words = static_cast<std::size_t>(text::tokens_to_words(static_cast<std::int64_t>(tokens)));
            std::vector<std::string> words;
            std::string textv;
            for (std::size_t i = 0; i < n_words; ++i) {
                words.push_back("t" + std::to_string(i) + "x" + std::to_string(rng() % 9));
                textv += (i ? seps[rng() % 5] : "") + words.back();
            }
            const std::string tag = "text " + std::to_string(t) + " (" + std::to_string(tokens) + " tokens): ";
            // token-level windows
            auto ranges = chunk_ranges(tokens, 400, 80);
            if (tokens == 0) c.expect(ranges.empty(), tag + "chunks for empty input");
            for (std::size_t i = 0; i < ranges.size(); ++i) {
                c.expect(ranges[i].end - ranges[i].begin <= 400, tag + "window > 400");
                c.expect(ranges[i].begin < ranges[i].end, tag + "empty window");
                if (i == 0) c.expect(ranges[i].begin == 0, tag + "first window does not start at 0");
                if (i > 0) {
                    c.expect(ranges[i - 1].end - ranges[i].begin == 80, tag + "overlap != 80");
                    c.expect(ranges[i].end > ranges[i - 1].end, tag + "window inside predecessor");
                }
            }
            if (!ranges.empty()) c.expect(ranges.back().end == tokens, tag + "coverage gap at the end");
            // word-level chunks of the text
            auto chunks = chunk_text(textv, 400, 80);
            chunks_seen += chunks.size();
            std::vector<std::string> rebuilt;
            std::vector<std::string> prev;
            for (std::size_t i = 0; i < chunks.size(); ++i) {
                auto cw = text::split_whitespace(chunks[i]);
                c.expect(text::approx_token_count(chunks[i]) <= 400, tag + "chunk > 400 tokens");
                if (i == 0) {
                    rebuilt = cw;
                } else {
                    c.expect(cw.size() >= 60 && prev.size() >= 60 &&
                                 std::equal(cw.begin(), cw.begin() + 60, prev.end() - 60),
                             tag + "overlap is not 60 words (80 tokens)");
                    if (cw.size() >= 60) rebuilt.insert(rebuilt.end(), cw.begin() + 60, cw.end());
                }
                prev = cw;
            }
            c.expect(rebuilt == words, tag + "reassembly differs from the original");
        }
        return std::to_string(chunks_seen) + " chunks checked";
    });

    criterion("Mann-Whitney correctness (exact n,m<=8; normal vs exact 15x15)", [&](Check& c) {
        std::mt19937_64 rng(31337);
        std::size_t cases = 0;
        std::vector<double> a12 = {1, 2}, b34 = {3, 4};
        auto r0 = mann_whitney_u(a12, b34);
        c.expect(r0.u == 0.0, "[1,2] vs [3,4]: U != 0");
        c.expect(std::abs(r0.p_value - 1.0 / 3.0) <= kMwuExactTol, "[1,2] vs [3,4]: p != 1/3");
        for (std::size_t n = 1; n <= 8; ++n) {
            for (std::size_t m = 1; m <= 8; ++m) {
                for (int rep = 0; rep < 3; ++rep) {
                    std::vector<double> pool(n + m);
                    std::iota(pool.begin(), pool.end(), 1.0);
                    std::shuffle(pool.begin(), pool.end(), rng);
                    std::vector<double> a(pool.begin(), pool.begin() + n), b(pool.begin() + n, pool.end());
                    double u_obs = 0;
                    for (double x : a)
                        for (double y : b) u_obs += x > y;
                    // enumerate every split of ranks 1..n+m
                    std::uint64_t le = 0, ge = 0, total = 0;
                    const std::size_t nn = n + m;
                    for (std::uint32_t mask = 0; mask < (1u << nn); ++mask) {
                        if (static_cast<std::size_t>(__builtin_popcount(mask)) != n) continue;
                        std::size_t u = 0, below = 0;
                        for (std::size_t r = 0; r < nn; ++r) {
                            if (mask & (1u << r)) u += below;
                            else ++below;
                        }
                        ++total;
                        le += u <= u_obs;
                        ge += u >= u_obs;
                    }
                    double p = std::min(1.0, 2.0 * static_cast<double>(std::min(le, ge)) / static_cast<double>(total));
                    auto r = mann_whitney_u(a, b);
                    const std::string tag = "n=" + std::to_string(n) + " m=" + std::to_string(m) + ": ";
                    c.expect(r.method == MwuMethod::Exact, tag + "exact method not used");
                    c.expect(r.u == u_obs, tag + "U differs");
                    c.expect(std::abs(r.p_value - p) <= kMwuExactTol, tag + "p differs from enumeration");
                    ++cases;
                }
            }
        }
        double worst = 0;
        for (int k = 0; k < 20; ++k) {
            std::vector<double> pool(30);
            std::iota(pool.begin(), pool.end(), 1.0);
            std::shuffle(pool.begin(), pool.end(), rng);
            std::vector<double> a(pool.begin(), pool.begin() + 15), b(pool.begin() + 15, pool.end());
            double pe = mann_whitney_u(a, b, Alternative::TwoSided, MwuMethod::Exact).p_value;
            double pn = mann_whitney_u(a, b, Alternative::TwoSided, MwuMethod::NormalApprox).p_value;
            worst = std::max(worst, std::abs(pe - pn));
            c.expect(std::abs(pe - pn) <= kNormalVsExactTol, "15x15 case " + std::to_string(k) + ": |p_n - p_e| > 0.01");
        }
        std::ostringstream info;
        info << cases << " exact cases; worst normal-vs-exact gap " << std::scientific << worst;
        return info.str();
    });

    criterion("self-preference bias recovery (+2.00 planted, 0 symmetric)", [&](Check& c) {
        std::mt19937_64 rng(9);
        std::size_t grids = 0;
        for (int g = 0; g < 20; ++g) {
            const int families = 2 + g % 4, per_family = 1 + g % 3, trials = 3 + g % 5;
            std::map<std::string, std::string> agent_family;
            std::vector<std::string> agents;
            for (int f = 0; f < families; ++f) {
                for (int a = 0; a < per_family; ++a) {
                    std::string id = "f" + std::to_string(f) + "a" + std::to_string(a);
                    agent_family[id] = "fam" + std::to_string(f);
                    agents.push_back(id);
                }
            }
            std::map<std::pair<std::string, int>, std::array<int, 3>> base;
            for (const auto& a : agents)
                for (int t = 0; t < trials; ++t)
                    base[{a, t}] = {1 + static_cast<int>(rng() % 8), 1 + static_cast<int>(rng() % 8),
                                    1 + static_cast<int>(rng() % 8)};
            for (bool planted : {true, false}) {
                std::vector<TrialSet> ts;
                for (int f = 0; f < families; ++f) {
                    for (int t = 0; t < trials; ++t) {
                        TrialSet s;
                        s.judge_id = "judge" + std::to_string(f);
                        s.trial = t;
                        for (const auto& a : agents) {
                            auto v = base[{a, t}];
                            int plus = planted && agent_family[a] == "fam" + std::to_string(f) ? 2 : 0;
                            // +2 on the total, spread as +1 new, +1 useful
                            s.scores[a] = {a, v[0] + plus / 2, v[1] + plus / 2, v[2]};
                        }
                        ts.push_back(std::move(s));
                    }
                }
                for (int f = 0; f < families; ++f) {
                    double b = self_preference_bias(ts, agent_family, "judge" + std::to_string(f), "fam" + std::to_string(f),
                                                    Dimension::Total);
                    double want = planted ? 2.0 : 0.0;
                    c.expect(std::abs(b - want) <= kBiasTol, "grid " + std::to_string(g) + ": bias " + std::to_string(b));
                    c.expect(format_bias(b) == (planted ? "+2.00" : "+0.00"), "grid " + std::to_string(g) + ": format");
                }
                ++grids;
            }
        }
        c.expect(format_bias(2.4701) == "+2.47", "format +2.47");
        return std::to_string(grids) + " grids";
    });

    criterion("ELI5 word limit (450, over-length responder)", [&](Check& c) {
        std::mt19937_64 rng(450);
        std::size_t longest_in = 0, longest_out = 0;
        for (int k = 0; k < 60; ++k) {
            std::string reply;
            std::size_t words = 451 + rng() % 2500;
            longest_in = std::max(longest_in, words);
            bool punctuate = k % 6 != 0;
            const char* ends[] = {".", "!", "?"};
            std::size_t in_sentence = 0, target = 1 + rng() % 40;
            for (std::size_t i = 0; i < words; ++i) {
                reply += (i ? " " : "") + std::string(i % 7 ? "sail" : "Photons");
                if (punctuate && ++in_sentence == target) {
                    reply += ends[rng() % 3];
                    in_sentence = 0;
                    target = 1 + rng() % 40;
                }
            }
            Config cfg;
            TokenLedger ledger;
            testkit::SynthLlm llm;
            llm.handlers[TemplateId::Eli5Constrained] = [&](const ChatRequest&, std::size_t) { return reply; };
            LlmGateway gw(llm, cfg, ledger, {1, std::chrono::milliseconds(0)});
            auto r = postprocess_eli5("The final answer.", static_cast<std::int64_t>(kEli5Limit), gw);
            auto wc = text::word_count(r.text);
            longest_out = std::max(longest_out, wc);
            c.expect(wc <= kEli5Limit, "case " + std::to_string(k) + ": " + std::to_string(wc) + " words");
            c.expect(!r.text.empty() && std::string(".!?").find(r.text.back()) != std::string::npos,
                     "case " + std::to_string(k) + ": does not end at a sentence boundary");
            c.expect(r.attempts == 3, "case " + std::to_string(k) + ": expected 3 attempts");
        }
        return "60 responders up to " + std::to_string(longest_in) + " words; longest output " +
               std::to_string(longest_out);
    });

    criterion("cost linearity in T (10, 20, 40; constant-cost provider)", [&](Check& c) {
        std::vector<double> ts = {10, 20, 40}, cost;
        for (double T : ts) {
            Config cfg;
            cfg.user_query = kQuery;
            cfg.exploration_budget = static_cast<std::int64_t>(T);
            cfg.insight_budget = 5;
            auto site = std::make_unique<Site>();
            for (int i = 0; i < 200; ++i) {
                site->add("p" + std::to_string(i), {"p" + std::to_string(i + 1), "p" + std::to_string(i + 2),
                                                    "p" + std::to_string(i + 3)});
            }
            std::vector<ScriptStep> script;
            for (int i = 0; i < 60; ++i) script.push_back(i % 3 == 2 ? B() : E(0));
            auto ex_llm = std::make_unique<testkit::ScriptedExplorerLlm>(script);
            ex_llm->record_requests = false;
            auto syn_llm = std::make_unique<testkit::SynthLlm>();
            syn_llm->handlers[TemplateId::QaFollowup] = [](const ChatRequest&, std::size_t k) {
                return "follow " + std::to_string(k);
            };
            Providers p;
            p.llm = std::make_unique<ConstantCost>(std::make_unique<OwnedRouter>(std::move(ex_llm), std::move(syn_llm)));
            p.search = std::make_unique<FixtureSearchProvider>(json{{"default", results({"p0", "p50", "p100"})}});
            struct SitePages : PageSource {
                std::unique_ptr<Site> site;
                std::string name() const override { return "site"; }
                RawResponse get(const std::string& url, double t) override { return site->pages.get(url, t); }
            };
            auto pages = std::make_unique<SitePages>();
            pages->site = std::move(site);
            p.pages = std::move(pages);
            p.embedder = std::make_unique<HashEmbedder>(256);
            std::string dir = (work / ("cost_T" + std::to_string(static_cast<int>(T)))).string();
            PipelineOptions opt;
            opt.retry = {1, std::chrono::milliseconds(0)};
            auto out = run_pipeline(cfg, p, dir, opt);
            c.expect(out.exit_code() == 0, "T=" + std::to_string(T) + " exit code " + std::to_string(out.exit_code()));
            auto tokens = json::parse(testkit::read_file(fs::path(dir) / "tokens.json"));
            cost.push_back(tokens["total_tokens"].get<double>());
            hermetic_runs.push_back(dir);
        }
        // least-squares line C = a + b*T
        double mt = 0, mc = 0;
        for (std::size_t i = 0; i < 3; ++i) {
            mt += ts[i] / 3;
            mc += cost[i] / 3;
        }
        double sxy = 0, sxx = 0;
        for (std::size_t i = 0; i < 3; ++i) {
            sxy += (ts[i] - mt) * (cost[i] - mc);
            sxx += (ts[i] - mt) * (ts[i] - mt);
        }
        double b = sxy / sxx, a = mc - b * mt;
        double worst = 0;
        for (std::size_t i = 0; i < 3; ++i) {
            double dev = std::abs(cost[i] - (a + b * ts[i])) / cost[i];
            worst = std::max(worst, dev);
            c.expect(dev <= kLinearityTol, "T=" + std::to_string(ts[i]) + " deviates " + std::to_string(dev));
        }
        double ratio = (cost[2] - cost[1]) / (cost[1] - cost[0]);
        c.expect(std::abs(ratio / 2.0 - 1.0) <= kLinearityTol, "marginal cost ratio " + std::to_string(ratio) + " != 2");
        std::ostringstream info;
        info.precision(4);
        info << "totals " << cost[0] << ", " << cost[1] << ", " << cost[2] << "; per-step " << b << " tokens, fixed "
             << a << "; worst deviation " << worst * 100 << "%; marginal ratio " << ratio;
        return info.str();
    });

    criterion("citation soundness (every hermetic run)", [&](Check& c) {
        std::size_t markers = 0;
        c.expect(!hermetic_runs.empty(), "no hermetic runs to check");
        for (const auto& dir : hermetic_runs) check_citations(c, dir, markers);
        c.expect(markers > 0, "no citation markers in any final.md");
        return std::to_string(markers) + " markers in " + std::to_string(hermetic_runs.size()) + " runs resolved";
    });

    criterion("graph export validity (DOT, GraphML, external parsers)", [&](Check& c) {
        c.expect(!hermetic_runs.empty(), "no run directory");
        if (hermetic_runs.empty()) return std::string();
        const std::string dir = hermetic_runs.front();
        auto dot_path = (work / "graph.dot").string(), gml_path = (work / "graph.graphml").string();
        c.expect(run_cli("graph export '" + dir + "' --format dot --out '" + dot_path + "'") == 0, "dot export failed");
        c.expect(run_cli("graph export '" + dir + "' --format graphml --out '" + gml_path + "'") == 0,
                 "graphml export failed");
        auto graph = ExplorationGraph::load(dir + "/graph.json");
        auto cited_v = load_cited_urls(dir);
        std::set<std::string> cited(cited_v.begin(), cited_v.end());
        std::set<std::string> nodes;
        std::set<std::pair<std::string, std::string>> edges;
        for (const auto& n : graph.nodes()) nodes.insert(n.url);
        for (const auto& e : graph.edges()) edges.insert({e.from, e.to});
        auto dot = parse_dot(testkit::read_file(dot_path));
        auto gml = parse_graphml(testkit::read_file(gml_path));
        for (const auto* pg : {&dot, &gml}) {
            std::set<std::string> got;
            for (const auto& [u, attrs] : pg->nodes) got.insert(u);
            c.expect(got == nodes, "round-trip node set differs");
            c.expect(pg->edges == edges, "round-trip edge set differs");
            c.expect(pg->nodes.count(graph.root()) && pg->nodes.at(graph.root()).at("color") == "red", "root is not red");
            for (const auto& u : cited) {
                if (u == graph.root()) continue;
                c.expect(pg->nodes.count(u) && pg->nodes.at(u).at("color") == "cyan", "cited node " + u + " not cyan");
            }
        }
        c.expect(!cited.empty(), "run has no cited nodes to color");
#ifdef CAESAR_PYTHON
        std::string cmd = std::string("'") + CAESAR_PYTHON + "' '" + testkit::source_dir() +
                          "/tools/check_graph_export.py' '" + dir + "/graph.json' '" + dot_path + "' '" + gml_path +
                          "' '" + dir + "/citations.json' > '" + (work / "py.txt").string() + "' 2>&1";
        int rc = std::system(cmd.c_str());
        std::string py = testkit::read_file(work / "py.txt");
        c.expect(WIFEXITED(rc) && WEXITSTATUS(rc) == 0, "pydot/networkx check: " + py);
        while (!py.empty() && py.back() == '\n') py.pop_back();
        return "pydot + networkx: " + py;
#else
        c.expect(false, "no Python interpreter configured for the external parser check");
        return std::string();
#endif
    });

    std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " criterion(s) FAILED") << std::endl;
    return failures == 0 ? 0 : 1;
}
