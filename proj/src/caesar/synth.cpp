#include "caesar/synth.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include "caesar/error.hpp"
#include "caesar/text.hpp"

namespace caesar {

using nlohmann::json;
namespace fs = std::filesystem;

std::size_t SourceTable::id_for(const std::string& url) {
    auto [it, fresh] = index_.try_emplace(url, urls_.size() + 1);
    if (fresh) urls_.push_back(url);
    return it->second;
}

std::optional<std::size_t> SourceTable::find(const std::string& url) const {
    auto it = index_.find(url);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

const std::string& SourceTable::url(std::size_t id) const {
    if (!contains(id)) throw Error(ErrorCode::InvalidArgument, "unknown source id " + std::to_string(id));
    return urls_[id - 1];
}

// ---------------------------------------------------------------------------
// Citations

namespace {

const std::regex& marker_re() {
    static const std::regex re(R"(\[(\d{1,6}(?:\s*,\s*\d{1,6})*)\])");
    return re;
}

std::vector<std::size_t> marker_ids(const std::string& inner) {
    std::vector<std::size_t> ids;
    std::string cur;
    for (char c : inner + ",") {
        if (std::isdigit(static_cast<unsigned char>(c))) {
            cur += c;
        } else if (c == ',') {
            if (!cur.empty()) ids.push_back(static_cast<std::size_t>(std::stoul(cur)));
            cur.clear();
        }
    }
    return ids;
}

// Rewrites the markers of one claim; appends kept ids to `kept`.
std::string rewrite_markers(const std::string& s, const std::set<std::size_t>& allowed, std::size_t cap,
                            std::vector<std::size_t>& kept) {
    std::string out;
    auto begin = std::sregex_iterator(s.begin(), s.end(), marker_re());
    std::size_t last = 0;
    for (auto it = begin; it != std::sregex_iterator(); ++it) {
        const auto& m = *it;
        auto pos = static_cast<std::size_t>(m.position(0));
        out.append(s, last, pos - last);
        std::string rep;
        for (auto id : marker_ids(m[1].str())) {
            if (!allowed.count(id)) continue;
            if (std::find(kept.begin(), kept.end(), id) != kept.end()) {
                rep += "[" + std::to_string(id) + "]";
                continue;
            }
            if (kept.size() >= cap) continue;
            kept.push_back(id);
            rep += "[" + std::to_string(id) + "]";
        }
        last = pos + static_cast<std::size_t>(m.length(0));
        // Drop the marker together with a single space before it, unless another marker follows.
        if (rep.empty() && !out.empty() && out.back() == ' ' && (last >= s.size() || s[last] != '[')) out.pop_back();
        out += rep;
    }
    out.append(s, last, std::string::npos);
    return out;
}

}  // namespace

CitationParse parse_citations(const std::string& input, const std::set<std::size_t>& allowed, std::size_t max_per_claim) {
    CitationParse out;
    auto spans = text::sentence_spans(input);
    std::size_t cursor = 0;
    std::size_t claim = 0;
    static const std::set<std::size_t> none;
    for (const auto& sp : spans) {
        if (sp.begin > cursor) {
            std::vector<std::size_t> dropped;
            out.text += rewrite_markers(input.substr(cursor, sp.begin - cursor), none, 0, dropped);
        }
        ++claim;
        std::vector<std::size_t> kept;
        out.text += rewrite_markers(input.substr(sp.begin, sp.end - sp.begin), allowed, max_per_claim, kept);
        if (!kept.empty()) out.citations[claim] = std::move(kept);
        cursor = sp.end;
    }
    if (cursor < input.size()) {
        std::vector<std::size_t> dropped;
        out.text += rewrite_markers(input.substr(cursor), none, 0, dropped);
    }
    return out;
}

std::set<std::size_t> cited_ids(const CitationMap& map) {
    std::set<std::size_t> out;
    for (const auto& [claim, ids] : map) out.insert(ids.begin(), ids.end());
    return out;
}

CitationMap merge_citation_maps(const std::vector<CitationMap>& maps, std::size_t max_per_claim) {
    CitationMap out;
    for (const auto& m : maps) {
        for (const auto& [claim, ids] : m) {
            auto& dst = out[claim];
            for (auto id : ids) {
                if (max_per_claim && dst.size() >= max_per_claim) break;
                if (std::find(dst.begin(), dst.end(), id) == dst.end()) dst.push_back(id);
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Insight QA

std::string format_qa_insights(const std::vector<QAInsight>& items, const SourceTable& sources, std::size_t max_pairs) {
    std::size_t start = items.size() > max_pairs ? items.size() - max_pairs : 0;
    std::ostringstream os;
    for (std::size_t i = start; i < items.size(); ++i) {
        const auto& it = items[i];
        if (i > start) os << "\n\n";
        os << "Q" << (i + 1) << ": " << it.question << "\nA" << (i + 1) << ": " << it.answer;
        if (!it.sources.empty()) {
            os << "\nSources:";
            for (auto id : it.sources) {
                os << " [" << id << "] " << (sources.contains(id) ? sources.url(id) : std::string("?"));
            }
        }
    }
    return os.str();
}

InsightChain generate_insight_qa(const KnowledgeBase& kb, const std::string& seed_query, const Config& config,
                                 LlmGateway& llm, SourceTable& sources) {
    if (kb.empty()) throw Error(ErrorCode::EmptyKnowledgeBase, "knowledge base empty");
    InsightChain chain;
    std::string q = text::trim(seed_query);
    const auto cap = static_cast<std::size_t>(config.max_citations_per_claim);
    const auto history = static_cast<std::size_t>(config.max_qa_history);
    for (std::int64_t t = 0; t < config.insight_budget; ++t) {
        auto hits = rerank(q, kb.retrieve(q, static_cast<std::size_t>(config.retrieve_k)),
                           static_cast<std::size_t>(config.rerank_n));
        std::vector<std::string> blocks;
        std::vector<std::size_t> ids;
        for (const auto& h : hits) {
            std::size_t id = sources.id_for(h.entry.metadata.source_url);
            blocks.push_back("[" + std::to_string(id) + "] " + h.entry.text);
            if (std::find(ids.begin(), ids.end(), id) == ids.end()) ids.push_back(id);
        }
        if (ids.size() > cap) ids.resize(cap);
        std::string answer;
        try {
            answer = text::trim(
                llm.complete(TemplateId::QaAnswer, {{"question", q}, {"retrieved_insights", text::join(blocks, "\n")}})
                    .text);
        } catch (const Error& e) {
            chain.degraded = true;
            chain.warning = std::string("answer failed: ") + e.what();
            break;
        }
        chain.items.push_back({q, answer, ids});
        if (t + 1 >= config.insight_budget) break;

        std::string prompt =
            render(TemplateId::QaFollowup, {{"list_of_qa_insights", format_qa_insights(chain.items, sources, history)}});
        chain.followup_prompts.push_back(prompt);
        std::string next;
        try {
            next = text::trim(llm.complete_request(llm.make_request(TemplateId::QaFollowup, prompt, {})).text);
        } catch (const Error& e) {
            chain.degraded = true;
            chain.warning = std::string("follow-up failed: ") + e.what();
            break;
        }
        std::string upper = next;
        std::transform(upper.begin(), upper.end(), upper.begin(), [](unsigned char c) { return std::toupper(c); });
        while (!upper.empty() && (upper.back() == '.' || upper.back() == '!')) upper.pop_back();
        if (next.empty() || upper == "STOP") break;
        q = next;
    }
    if (chain.items.empty() && !chain.degraded) {
        chain.degraded = true;
        chain.warning = "insight budget is zero";
    }
    return chain;
}

// ---------------------------------------------------------------------------
// Drafts

Draft generate_draft(const InsightChain& chain, const Draft* previous, const std::string& query, int round,
                     const Config& config, LlmGateway& llm, const SourceTable& sources, std::string* warning) {
    Draft d;
    d.round = round;
    d.query = query;
    std::set<std::size_t> allowed;
    for (const auto& it : chain.items) allowed.insert(it.sources.begin(), it.sources.end());
    try {
        if (chain.items.empty()) throw Error(ErrorCode::InvalidArgument, "empty insight chain");
        auto res = llm.complete(
            TemplateId::DraftGeneration,
            {{"list_of_qa_insights",
              format_qa_insights(chain.items, sources, static_cast<std::size_t>(config.max_qa_history))},
             {"artifact_text", previous ? previous->text : std::string()},
             {"starting_query", query},
             {"max_citations", std::to_string(config.max_citations_per_claim)}});
        std::string body = text::trim(res.text);
        if (body.empty()) throw Error(ErrorCode::ProviderStatus, "empty draft");
        auto parsed = parse_citations(body, allowed, static_cast<std::size_t>(config.max_citations_per_claim));
        d.text = std::move(parsed.text);
        d.citations = std::move(parsed.citations);
    } catch (const Error& e) {
        if (warning) *warning = "round " + std::to_string(round) + " draft failed: " + e.what();
        d.degraded = true;
        if (previous) {
            d.text = previous->text;
            d.citations = previous->citations;
        }
    }
    return d;
}

std::string refine_query(const std::string& draft_text, const std::string& previous_query, LlmGateway& llm,
                         std::string* warning) {
    if (text::trim(draft_text).empty()) {
        if (warning) *warning = "no draft to refine against; query unchanged";
        return previous_query;
    }
    try {
        auto res = llm.complete(TemplateId::RefineQuery, {{"previous_query", previous_query}, {"artifact_text", draft_text}});
        std::string q = text::trim(res.text);
        if (!q.empty()) return q;
        if (warning) *warning = "empty refinement; query unchanged";
    } catch (const Error& e) {
        if (warning) *warning = std::string("refinement failed; query unchanged: ") + e.what();
    }
    return previous_query;
}

MergeResult merge_drafts(const std::vector<Draft>& history, const Config& config, LlmGateway& llm) {
    if (history.empty()) throw Error(ErrorCode::InvalidArgument, "merge needs at least one draft");
    MergeResult out;
    std::vector<CitationMap> maps;
    for (const auto& d : history) maps.push_back(d.citations);
    const auto allowed = cited_ids(merge_citation_maps(maps));
    out.citations = merge_citation_maps(maps, static_cast<std::size_t>(config.max_citations_per_claim));

    std::ostringstream drafts;
    for (std::size_t i = 0; i < history.size(); ++i) {
        if (i) drafts << "\n\n";
        drafts << "DRAFT " << (i + 1) << ":\n" << history[i].text;
    }
    try {
        auto res = llm.complete(TemplateId::MergeDrafts, {{"list_of_artifact_drafts", drafts.str()}});
        std::string body = text::trim(res.text);
        if (body.empty()) throw Error(ErrorCode::ProviderStatus, "empty merge");
        auto parsed = parse_citations(body, allowed, static_cast<std::size_t>(config.max_citations_per_claim));
        out.text = std::move(parsed.text);
        out.claims = std::move(parsed.citations);
    } catch (const Error& e) {
        out.degraded = true;
        out.warning = std::string("merge failed, keeping the last draft: ") + e.what();
        out.text = history.back().text;
        out.citations = history.back().citations;
        out.claims = history.back().citations;
    }
    return out;
}

// ---------------------------------------------------------------------------
// ELI5

std::string truncate_to_words(const std::string& input, std::size_t limit) {
    if (text::word_count(input) <= limit) return input;
    std::string best;
    for (const auto& sp : text::sentence_spans(input)) {
        std::string prefix = text::trim(input.substr(0, sp.end));
        if (text::word_count(prefix) > limit) break;
        best = prefix;
    }
    if (!best.empty() || limit == 0) return best;
    auto words = text::split_whitespace(input);
    words.resize(limit);
    std::string cut = text::join(words, " ");
    while (!cut.empty() && std::string(",;:-").find(cut.back()) != std::string::npos) cut.pop_back();
    if (cut.empty() || (cut.back() != '.' && cut.back() != '!' && cut.back() != '?')) cut += '.';
    return cut;
}

Eli5Result postprocess_eli5(const std::string& final_text, std::optional<std::int64_t> word_limit, LlmGateway& llm) {
    Eli5Result out;
    if (!word_limit) {
        out.attempts = 1;
        out.text = llm.complete(TemplateId::Eli5Unconstrained, {{"artifact_text", final_text}}).text;
        return out;
    }
    const auto limit = static_cast<std::size_t>(std::max<std::int64_t>(0, *word_limit));
    std::string prompt =
        render(TemplateId::Eli5Constrained, {{"artifact_text", final_text}, {"word_limit", std::to_string(limit)}});
    std::string last;
    for (int attempt = 0; attempt < 3; ++attempt) {
        std::string p = prompt;
        if (attempt > 0) {
            p += "\n\nYour previous explanation had " + std::to_string(text::word_count(last)) +
                 " words. Rewrite it within " + std::to_string(limit) + " words.";
        }
        ++out.attempts;
        try {
            last = text::trim(llm.complete_request(llm.make_request(TemplateId::Eli5Constrained, p, {})).text);
        } catch (const Error&) {
            if (last.empty()) last = final_text;
            break;
        }
        if (text::word_count(last) <= limit) {
            out.text = last;
            return out;
        }
    }
    out.text = truncate_to_words(last, limit);
    out.truncated = true;
    return out;
}

// ---------------------------------------------------------------------------

SynthesisResult synthesize(const KnowledgeBase& kb, const std::string& query, const Config& config, LlmGateway& llm,
                           const SynthOptions& options) {
    if (kb.empty()) throw Error(ErrorCode::EmptyKnowledgeBase, "knowledge base empty");
    SynthesisResult r;
    r.queries.push_back(query);
    const Draft* prev = nullptr;
    for (int k = 1; k <= config.refinement_rounds; ++k) {
        const std::string& qk = r.queries.back();
        InsightChain chain = generate_insight_qa(kb, qk, config, llm, r.sources);
        r.trace.push_back({{"stage", "qa"},
                           {"round", k},
                           {"query", qk},
                           {"length", chain.items.size()},
                           {"degraded", chain.degraded}});
        if (chain.degraded) {
            r.degraded = true;
            r.diagnostics.push_back("round " + std::to_string(k) + " insight chain: " + chain.warning);
        }
        std::string warning;
        Draft d = generate_draft(chain, prev, qk, k, config, llm, r.sources, &warning);
        if (d.degraded) {
            r.degraded = true;
            r.diagnostics.push_back(warning);
        }
        json cmap = json::object();
        for (const auto& [claim, ids] : d.citations) cmap[std::to_string(claim)] = ids;
        r.trace.push_back({{"stage", "draft"}, {"round", k}, {"words", text::word_count(d.text)},
                           {"citations", cmap}, {"degraded", d.degraded}});
        r.chains.push_back(std::move(chain));
        r.history.push_back(std::move(d));
        prev = &r.history.back();

        std::string rwarn;
        std::string next = refine_query(prev->text, qk, llm, &rwarn);
        if (!rwarn.empty()) r.diagnostics.push_back("round " + std::to_string(k) + ": " + rwarn);
        r.trace.push_back({{"stage", "refine"}, {"round", k}, {"query", next}, {"consumed", k < config.refinement_rounds}});
        r.queries.push_back(next);
    }

    MergeResult m = merge_drafts(r.history, config, llm);
    if (m.degraded) {
        r.degraded = true;
        r.diagnostics.push_back(m.warning);
    }
    r.final_text = std::move(m.text);
    r.final_citations = std::move(m.citations);
    r.final_claims = std::move(m.claims);
    r.trace.push_back({{"stage", "merge"}, {"words", text::word_count(r.final_text)}, {"degraded", m.degraded}});

    if (options.eli5 && !text::trim(r.final_text).empty()) {
        try {
            auto e = postprocess_eli5(r.final_text, config.eli5_word_limit, llm);
            r.eli5 = e.text;
            r.trace.push_back({{"stage", "eli5"},
                               {"attempts", e.attempts},
                               {"truncated", e.truncated},
                               {"words", text::word_count(e.text)}});
        } catch (const Error& e) {
            r.degraded = true;
            r.diagnostics.push_back(std::string("eli5 failed: ") + e.what());
        }
    }
    return r;
}

std::string render_final_markdown(const SynthesisResult& result, const std::string& query) {
    std::ostringstream os;
    std::string body = text::trim(result.final_text);
    if (!text::starts_with_ci(body, "# ")) os << "# " << text::collapse_whitespace(query) << "\n\n";
    os << body << "\n";
    auto ids = cited_ids(result.final_citations);
    auto claims = cited_ids(result.final_claims);
    ids.insert(claims.begin(), claims.end());
    os << "\n## Sources\n\n| # | URL |\n|---|-----|\n";
    for (auto id : ids) {
        if (result.sources.contains(id)) os << "| " << id << " | " << result.sources.url(id) << " |\n";
    }
    return os.str();
}

std::vector<std::string> write_synthesis_outputs(const SynthesisResult& r, const std::string& query,
                                                 const std::string& dir) {
    std::vector<std::string> files;
    fs::create_directories(fs::path(dir) / "drafts");
    auto write = [&](const std::string& rel, const std::string& content) {
        std::ofstream out(fs::path(dir) / rel, std::ios::binary | std::ios::trunc);
        out << content;
        if (!out) throw Error(ErrorCode::Io, "cannot write " + rel);
        files.push_back(rel);
    };
    for (std::size_t k = 0; k < r.history.size(); ++k) {
        const auto& d = r.history[k];
        write("drafts/draft_" + std::to_string(k + 1) + ".md", d.text + "\n");
        std::string lines;
        if (k < r.chains.size()) {
            for (const auto& it : r.chains[k].items) {
                json j = {{"question", it.question}, {"answer", it.answer}, {"sources", it.sources}};
                json urls = json::array();
                for (auto id : it.sources) urls.push_back(r.sources.url(id));
                j["source_urls"] = urls;
                lines += j.dump() + "\n";
            }
        }
        write("qa_chain_" + std::to_string(k + 1) + ".jsonl", lines);
    }
    write("final.md", render_final_markdown(r, query));
    if (r.eli5) write("eli5.txt", *r.eli5 + "\n");
    std::string trace;
    for (const auto& t : r.trace) trace += t.dump() + "\n";
    json table = json::object();
    for (std::size_t i = 0; i < r.sources.size(); ++i) table[std::to_string(i + 1)] = r.sources.urls()[i];
    trace += json({{"stage", "sources"}, {"table", table}}).dump() + "\n";
    write("synthesis_trace.jsonl", trace);

    auto ids = cited_ids(r.final_citations);
    auto claim_ids = cited_ids(r.final_claims);
    ids.insert(claim_ids.begin(), claim_ids.end());
    json cited = json::array();
    for (auto id : ids) cited.push_back(r.sources.url(id));
    auto map_json = [](const CitationMap& m) {
        json j = json::object();
        for (const auto& [claim, v] : m) j[std::to_string(claim)] = v;
        return j;
    };
    json cj = {{"sources", table},
               {"final_citations", map_json(r.final_citations)},
               {"final_claims", map_json(r.final_claims)},
               {"cited_urls", cited}};
    write("citations.json", cj.dump(2) + "\n");
    return files;
}

}  // namespace caesar
