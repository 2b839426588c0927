#include <doctest.h>

#include <regex>

#include "caesar/error.hpp"
#include "caesar/synth.hpp"
#include "caesar/text.hpp"
#include "testkit.hpp"

using namespace caesar;
using testkit::SynthLlm;

namespace {

struct Fixture {
    Config cfg;
    HashEmbedder embedder;
    KnowledgeBase kb{embedder};
    TokenLedger ledger;
    SynthLlm llm;
    LlmGateway gw{llm, cfg, ledger, {1, std::chrono::milliseconds(0)}};

    void fill(int urls, int per_url = 1) {
        std::mt19937_64 rng(5);
        for (int u = 0; u < urls; ++u) {
            for (int k = 0; k < per_url; ++k) {
                kb.add("sail steering note " + testkit::random_words(rng, 10), {"https://s.test/" + std::to_string(u), u, 1},
                       cfg.chunk_size, cfg.chunk_overlap);
            }
        }
    }
};

std::string words(std::size_t n, const std::string& w = "word") {
    std::string s;
    for (std::size_t i = 0; i < n; ++i) s += (i ? " " : "") + w;
    return s;
}

// "Sentence k has eight words in it here." repeated.
std::string sentences(std::size_t count) {
    std::string s;
    for (std::size_t i = 0; i < count; ++i) s += (i ? " " : "") + std::string("This sentence has exactly eight words in it.");
    return s;
}

}  // namespace

TEST_CASE("citation markers are filtered, capped and mapped to claims") {
    auto p = parse_citations("First claim [1]. Second claim [2, 3][9]. Third [1][2][3][4][5][6][7].", {1, 2, 3, 4, 5, 6, 7}, 5);
    CHECK(p.text == "First claim [1]. Second claim [2][3]. Third [1][2][3][4][5].");
    CHECK(p.citations.at(1) == std::vector<std::size_t>{1});
    CHECK(p.citations.at(2) == std::vector<std::size_t>{2, 3});
    CHECK(p.citations.at(3).size() == 5);
    auto q = parse_citations("Unsupported claim [9]. Fine [2].", {2}, 5);
    CHECK(q.text == "Unsupported claim. Fine [2].");
    CHECK(q.citations.count(1) == 0);
    CHECK(q.citations.at(2) == std::vector<std::size_t>{2});
}

TEST_CASE("citation map union") {
    CitationMap b1 = {{1, {1}}}, b2 = {{1, {2}}}, b3 = {{2, {1, 3}}};
    auto m = merge_citation_maps({b1, b2, b3});
    CHECK(cited_ids(m) == std::set<std::size_t>{1, 2, 3});
    CHECK(m.at(1) == std::vector<std::size_t>{1, 2});
}

TEST_CASE("STOP from the follow-up generator ends the chain after one pair") {
    Fixture f;
    f.fill(3);
    SourceTable sources;
    auto chain = generate_insight_qa(f.kb, "how do sails steer", f.cfg, f.gw, sources);
    CHECK(chain.items.size() == 1);
    CHECK_FALSE(chain.degraded);
}

TEST_CASE("chain length stops at the insight budget") {
    Fixture f;
    f.fill(3);
    f.cfg.insight_budget = 4;
    f.llm.handlers[TemplateId::QaFollowup] = [](const ChatRequest&, std::size_t k) { return "question " + std::to_string(k); };
    SourceTable sources;
    auto chain = generate_insight_qa(f.kb, "q", f.cfg, f.gw, sources);
    CHECK(chain.items.size() == 4);
    CHECK(f.llm.counts[TemplateId::QaFollowup] == 3);
    CHECK(chain.items[2].question == "question 1");
}

TEST_CASE("QA sources are capped at C_m and drawn from the KB") {
    Fixture f;
    f.fill(7, 2);
    f.cfg.insight_budget = 6;
    f.llm.handlers[TemplateId::QaFollowup] = [](const ChatRequest&, std::size_t k) {
        return "sail steering note " + std::to_string(k);
    };
    SourceTable sources;
    auto chain = generate_insight_qa(f.kb, "sail steering note", f.cfg, f.gw, sources);
    auto kb_urls = f.kb.source_urls();
    std::set<std::string> allowed(kb_urls.begin(), kb_urls.end());
    CHECK(allowed.size() == 7);
    for (const auto& it : chain.items) {
        CHECK(it.sources.size() <= 5);
        CHECK_FALSE(it.sources.empty());
        for (auto id : it.sources) CHECK(allowed.count(sources.url(id)) == 1);
    }
}

TEST_CASE("QA history in follow-up prompts is capped at H_c") {
    Fixture f;
    f.fill(2);
    f.cfg.insight_budget = 60;
    f.cfg.max_qa_history = 50;
    f.llm.handlers[TemplateId::QaFollowup] = [](const ChatRequest&, std::size_t k) { return "follow " + std::to_string(k); };
    SourceTable sources;
    auto chain = generate_insight_qa(f.kb, "q", f.cfg, f.gw, sources);
    CHECK(chain.items.size() == 60);
    std::regex pair_re(R"((^|\s)Q\d+: )");
    std::size_t max_pairs = 0;
    for (const auto& p : chain.followup_prompts) {
        auto n = static_cast<std::size_t>(std::distance(std::sregex_iterator(p.begin(), p.end(), pair_re), std::sregex_iterator()));
        max_pairs = std::max(max_pairs, n);
    }
    CHECK(max_pairs == 50);
}

TEST_CASE("empty KB is rejected") {
    Fixture f;
    SourceTable sources;
    try {
        generate_insight_qa(f.kb, "q", f.cfg, f.gw, sources);
        FAIL("expected EmptyKnowledgeBase");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::EmptyKnowledgeBase);
        CHECK(std::string(e.what()) == "knowledge base empty");
    }
    CHECK_THROWS_AS(synthesize(f.kb, "q", f.cfg, f.gw), Error);
}

TEST_CASE("first draft uses the empty previous-artifact form") {
    Fixture f;
    SourceTable sources;
    sources.id_for("https://a/");
    InsightChain chain;
    chain.items.push_back({"q", "a", {1}});
    auto d = generate_draft(chain, nullptr, "query", 1, f.cfg, f.gw, sources);
    CHECK_FALSE(d.degraded);
    CHECK(d.text == "A draft claim [1].");
    CHECK(f.llm.requests.back().user.find("PREVIOUS ARTIFACT: No previous artifact available.") != std::string::npos);
}

TEST_CASE("draft citations stay within the chain's sources") {
    Fixture f;
    SourceTable sources;
    for (int i = 0; i < 5; ++i) sources.id_for("https://s/" + std::to_string(i));
    InsightChain chain;
    chain.items.push_back({"q1", "a1", {1, 2}});
    chain.items.push_back({"q2", "a2", {3}});
    f.llm.handlers[TemplateId::DraftGeneration] = [](const ChatRequest&, std::size_t) {
        return std::string("One [1]. Two [2, 4]. Three [5][3]. Four [3].");
    };
    auto d = generate_draft(chain, nullptr, "q", 1, f.cfg, f.gw, sources);
    for (auto id : cited_ids(d.citations)) CHECK((id >= 1 && id <= 3));
    CHECK(d.text == "One [1]. Two [2]. Three [3]. Four [3].");
}

TEST_CASE("failed draft carries the previous one forward") {
    Fixture f;
    SourceTable sources;
    sources.id_for("https://a/");
    InsightChain chain;
    chain.items.push_back({"q", "a", {1}});
    Draft prev;
    prev.round = 1;
    prev.text = "Earlier [1].";
    prev.citations = {{1, {1}}};
    f.llm.handlers[TemplateId::DraftGeneration] = [](const ChatRequest&, std::size_t) -> std::string {
        throw Error(ErrorCode::ProviderStatus, "down");
    };
    std::string warning;
    auto d = generate_draft(chain, &prev, "q", 2, f.cfg, f.gw, sources, &warning);
    CHECK(d.degraded);
    CHECK(d.text == prev.text);
    CHECK(d.citations == prev.citations);
    CHECK(warning.find("round 2") != std::string::npos);
}

TEST_CASE("query refinement passthrough and fallback") {
    Fixture f;
    f.llm.handlers[TemplateId::RefineQuery] = [](const ChatRequest&, std::size_t k) {
        return k == 0 ? std::string("Q-NEXT") : std::string("   ");
    };
    CHECK(refine_query("draft", "Q0", f.gw) == "Q-NEXT");
    CHECK(refine_query("draft", "Q1", f.gw) == "Q1");
    CHECK(refine_query("", "Q2", f.gw) == "Q2");
}

TEST_CASE("merge of a single draft keeps its citation map") {
    Fixture f;
    Draft d;
    d.text = "Only claim [1].";
    d.citations = {{1, {1}}};
    auto m = merge_drafts({d}, f.cfg, f.gw);
    CHECK(m.citations == d.citations);
    CHECK_FALSE(m.degraded);
}

TEST_CASE("merge prompt includes every draft and M_f is the union") {
    Fixture f;
    std::vector<Draft> h(3);
    h[0].text = "DRAFT-TEXT-ONE [1].";
    h[0].citations = {{1, {1}}};
    h[1].text = "DRAFT-TEXT-TWO [2].";
    h[1].citations = {{1, {2}}};
    h[2].text = "Intro. DRAFT-TEXT-THREE [1][3].";
    h[2].citations = {{2, {1, 3}}};
    f.llm.handlers[TemplateId::MergeDrafts] = [](const ChatRequest&, std::size_t) {
        return std::string("Merged [1][2]. Invented [7]. Kept [3].");
    };
    auto m = merge_drafts(h, f.cfg, f.gw);
    const auto& prompt = f.llm.requests.back().user;
    for (const char* t : {"DRAFT-TEXT-ONE", "DRAFT-TEXT-TWO", "DRAFT-TEXT-THREE"}) CHECK(prompt.find(t) != std::string::npos);
    CHECK(cited_ids(m.citations) == std::set<std::size_t>{1, 2, 3});
    CHECK(m.text == "Merged [1][2]. Invented. Kept [3].");
}

TEST_CASE("ELI5 within the limit is accepted unchanged") {
    Fixture f;
    std::string reply = words(400);
    f.llm.handlers[TemplateId::Eli5Constrained] = [&](const ChatRequest&, std::size_t) { return reply; };
    auto r = postprocess_eli5("final", 450, f.gw);
    CHECK(r.text == reply);
    CHECK(r.attempts == 1);
    CHECK_FALSE(r.truncated);
    CHECK(f.llm.requests.back().user.find("MUST be within 450 words") != std::string::npos);
}

TEST_CASE("over-long ELI5 is retried then truncated at a sentence boundary") {
    Fixture f;
    std::string reply = sentences(75);  // 600 words
    REQUIRE(text::word_count(reply) == 600);
    f.llm.handlers[TemplateId::Eli5Constrained] = [&](const ChatRequest&, std::size_t) { return reply; };
    auto r = postprocess_eli5("final", 450, f.gw);
    CHECK(r.attempts == 3);
    CHECK(r.truncated);
    CHECK(text::word_count(r.text) == 448);
    CHECK(r.text.back() == '.');
    CHECK(reply.compare(0, r.text.size(), r.text) == 0);
}

TEST_CASE("ELI5 without a limit makes one call and returns it verbatim") {
    Fixture f;
    f.llm.handlers[TemplateId::Eli5Unconstrained] = [](const ChatRequest&, std::size_t) { return std::string(" As is. "); };
    auto r = postprocess_eli5("final", std::nullopt, f.gw);
    CHECK(r.text == " As is. ");
    CHECK(f.llm.counts[TemplateId::Eli5Unconstrained] == 1);
    CHECK(f.llm.counts[TemplateId::Eli5Constrained] == 0);
}

TEST_CASE("truncation rule") {
    CHECK(truncate_to_words("One two. Three four five.", 3) == "One two.");
    CHECK(truncate_to_words("One two three four five", 3) == "One two three.");
    CHECK(truncate_to_words("Short.", 10) == "Short.");
}

TEST_CASE("three rounds give three drafts and two consumed refinements") {
    Fixture f;
    f.fill(4);
    f.llm.handlers[TemplateId::DraftGeneration] = [](const ChatRequest&, std::size_t k) {
        return "D" + std::to_string(k + 1) + " claim [1].";
    };
    f.llm.handlers[TemplateId::RefineQuery] = [](const ChatRequest&, std::size_t k) { return "Q" + std::to_string(k + 1); };
    auto r = synthesize(f.kb, "Q0", f.cfg, f.gw);
    REQUIRE(r.history.size() == 3);
    CHECK(r.history[0].text == "D1 claim [1].");
    CHECK(r.history[1].text == "D2 claim [1].");
    CHECK(r.history[1].query == "Q1");
    CHECK(r.history[2].query == "Q2");
    CHECK(r.queries == std::vector<std::string>{"Q0", "Q1", "Q2", "Q3"});
    int consumed = 0, refines = 0;
    for (const auto& t : r.trace) {
        if (t["stage"] == "refine") {
            ++refines;
            consumed += t["consumed"].get<bool>();
        }
    }
    CHECK(refines == 3);
    CHECK(consumed == 2);
    CHECK(r.chains[1].items.front().question == "Q1");
    CHECK(r.eli5.has_value());
    CHECK_FALSE(r.degraded);
}

TEST_CASE("one round reduces to QA, draft, merge and ELI5") {
    Fixture f;
    f.fill(2);
    f.cfg.refinement_rounds = 1;
    auto r = synthesize(f.kb, "Q0", f.cfg, f.gw);
    CHECK(r.history.size() == 1);
    CHECK(f.llm.counts[TemplateId::MergeDrafts] == 1);
    CHECK(f.llm.counts[TemplateId::DraftGeneration] == 1);
    CHECK(r.final_citations == r.history[0].citations);
}

TEST_CASE("every final marker resolves to a KB source URL") {
    Fixture f;
    f.fill(6);
    f.cfg.insight_budget = 3;
    f.llm.handlers[TemplateId::QaFollowup] = [](const ChatRequest&, std::size_t k) { return "sail note " + std::to_string(k); };
    f.llm.handlers[TemplateId::DraftGeneration] = [](const ChatRequest&, std::size_t) {
        return std::string("A [1][2]. B [3]. C [4][40].");
    };
    f.llm.handlers[TemplateId::MergeDrafts] = [](const ChatRequest&, std::size_t) {
        return std::string("M [1]. N [2][3]. O [4]. P [12].");
    };
    auto r = synthesize(f.kb, "sail note", f.cfg, f.gw);
    auto md = render_final_markdown(r, "sail note");
    auto urls = f.kb.source_urls();
    std::set<std::string> kb_urls(urls.begin(), urls.end());
    std::regex marker(R"(\[(\d+)\])");
    auto body_end = md.find("## Sources");
    std::string body = md.substr(0, body_end);
    std::size_t markers = 0;
    for (auto it = std::sregex_iterator(body.begin(), body.end(), marker); it != std::sregex_iterator(); ++it) {
        ++markers;
        std::size_t id = std::stoul((*it)[1].str());
        REQUIRE(r.sources.contains(id));
        CHECK(kb_urls.count(r.sources.url(id)) == 1);
        CHECK(md.find("| " + std::to_string(id) + " | " + r.sources.url(id) + " |") != std::string::npos);
    }
    CHECK(markers > 0);
    CHECK(body.find("[12]") == std::string::npos);
}

TEST_CASE("synthesis outputs are deterministic") {
    std::string first;
    for (int run = 0; run < 2; ++run) {
        Fixture f;
        f.fill(5);
        auto r = synthesize(f.kb, "q", f.cfg, f.gw);
        testkit::TempDir dir;
        auto files = write_synthesis_outputs(r, "q", dir.str());
        for (const char* name : {"final.md", "eli5.txt", "synthesis_trace.jsonl", "citations.json", "drafts/draft_3.md",
                                 "qa_chain_1.jsonl"}) {
            CHECK(std::find(files.begin(), files.end(), name) != files.end());
        }
        auto md = testkit::read_file(dir / "final.md");
        if (run == 0) first = md;
        else CHECK(md == first);
    }
}

TEST_CASE("merged citation map respects C_m per claim") {
    Fixture f;
    std::vector<Draft> h(2);
    h[0].text = "A [1][2][3].";
    h[0].citations = {{1, {1, 2, 3}}};
    h[1].text = "B [4][5][6].";
    h[1].citations = {{1, {4, 5, 6}}};
    auto m = merge_drafts(h, f.cfg, f.gw);
    CHECK(m.citations.at(1) == std::vector<std::size_t>{1, 2, 3, 4, 5});
    CHECK(merge_citation_maps({h[0].citations, h[1].citations}, 2).at(1) == std::vector<std::size_t>{1, 2});
}
