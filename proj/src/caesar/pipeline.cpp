#include "caesar/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "caesar/error.hpp"
#include "caesar/explore.hpp"
#include "caesar/graph.hpp"
#include "caesar/graph_export.hpp"
#include "caesar/judge.hpp"
#include "caesar/synth.hpp"
#include "caesar/text.hpp"

namespace caesar {

using nlohmann::json;
namespace fs = std::filesystem;

RunMode run_mode_from_string(const std::string& s) {
    auto l = text::to_lower(s);
    if (l == "live") return RunMode::Live;
    if (l == "offline") return RunMode::Offline;
    throw Error(ErrorCode::InvalidArgument, "mode must be live or offline, got: " + s);
}

const char* to_string(RunStatus s) {
    switch (s) {
        case RunStatus::Complete: return "complete";
        case RunStatus::Degraded: return "degraded";
        case RunStatus::Aborted: return "aborted";
    }
    return "aborted";
}

std::map<std::string, std::string> Providers::identifiers() const {
    std::map<std::string, std::string> out;
    if (llm) out["llm"] = llm->name();
    if (search) out["search"] = search->name();
    if (pages) out["pages"] = pages->name();
    if (embedder) out["embedder"] = embedder->name();
    return out;
}

namespace {

json read_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot read " + path);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::Parse, "malformed JSON in " + path);
    return j;
}

void write_text(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
}

std::unique_ptr<ChatProvider> make_llm(const std::string& fixture, const EnvLookup& env) {
    if (!fixture.empty()) return ScriptedProvider::from_file(fixture);
    return std::make_unique<OpenAiProvider>(OpenAiSettings::from_env(env));
}

}  // namespace

Providers make_providers(const ProviderSpec& spec, const Config& config) {
    Providers p;
    EnvLookup env = spec.env ? spec.env : process_env();
    if (spec.mode == RunMode::Offline) {
        if (spec.corpus_manifest.empty()) {
            throw Error(ErrorCode::InvalidArgument, "offline mode requires a corpus manifest (--corpus)");
        }
        if (!fs::exists(spec.corpus_manifest)) {
            throw Error(ErrorCode::InvalidArgument, "corpus manifest not found: " + spec.corpus_manifest);
        }
        auto corpus = CorpusPageSource::from_manifest(spec.corpus_manifest);
        if (!spec.search_fixture.empty()) {
            p.search = FixtureSearchProvider::from_file(spec.search_fixture);
        } else {
            auto it = corpus->manifest().find("search");
            p.search = std::make_unique<FixtureSearchProvider>(it != corpus->manifest().end() ? *it : json::object());
        }
        p.pages = std::move(corpus);
        p.embedder = std::make_unique<HashEmbedder>(static_cast<std::size_t>(config.embedding_dim));
    } else {
        p.pages = std::make_unique<LivePageSource>(spec.honor_robots);
        if (!spec.search_fixture.empty()) p.search = FixtureSearchProvider::from_file(spec.search_fixture);
        else p.search = JsonSearchProvider::from_env(env);
        auto which = env ? env("CAESAR_EMBEDDER") : std::nullopt;
        if (which && text::to_lower(*which) == "openai") p.embedder = OpenAiEmbedder::from_env(env);
        else p.embedder = std::make_unique<HashEmbedder>(static_cast<std::size_t>(config.embedding_dim));
    }
    p.llm = make_llm(spec.llm_fixture, env);
    return p;
}

Providers make_llm_providers(const std::string& llm_fixture, const EnvLookup& env) {
    Providers p;
    p.llm = make_llm(llm_fixture, env ? env : process_env());
    return p;
}

// ---------------------------------------------------------------------------

RunDirectory::RunDirectory(std::string path, const Config& config, std::map<std::string, std::string> providers,
                           std::uint64_t seed)
    : path_(std::move(path)) {
    fs::create_directories(path_);
    manifest_.run_id = new_run_id();
    manifest_.created_at = utc_timestamp();
    manifest_.config_snapshot = to_json(config);
    manifest_.providers = std::move(providers);
    manifest_.output_dir = fs::absolute(path_).string();
    manifest_.seed = seed;
    manifest_.status = "incomplete";
    write_manifest();
}

void RunDirectory::add_artifacts(const std::vector<std::string>& files) {
    for (const auto& f : files) {
        if (std::find(manifest_.artifacts.begin(), manifest_.artifacts.end(), f) == manifest_.artifacts.end()) {
            manifest_.artifacts.push_back(f);
        }
    }
    write_manifest();
}

void RunDirectory::finish(RunStatus status, const std::vector<std::string>& diagnostics) {
    manifest_.status = status == RunStatus::Complete ? "complete" : to_string(status);
    manifest_.diagnostics = diagnostics;
    write_manifest();
}

void RunDirectory::write_manifest() const {
    write_text(fs::path(path_) / "manifest.json", to_json(manifest_).dump(2) + "\n");
}

// ---------------------------------------------------------------------------

namespace {

struct PhaseOne {
    RunOutcome outcome;
    std::unique_ptr<Explorer> explorer;
};

PhaseOne explore_into(const Config& config, Providers& providers, RunDirectory& dir, TokenLedger& ledger,
                      const PipelineOptions& options) {
    PhaseOne r;
    r.outcome.run_dir = dir.path();
    r.explorer = std::make_unique<Explorer>(
        config, ExploreServices{*providers.llm, *providers.search, *providers.pages, *providers.embedder, ledger,
                                options.retry});
    try {
        r.explorer->bootstrap();
    } catch (const Error& e) {
        r.outcome.status = RunStatus::Aborted;
        r.outcome.diagnostics.push_back(std::string("bootstrap failed: ") + e.what());
        return r;
    }
    while (!r.explorer->done()) r.explorer->step();
    dir.add_artifacts(r.explorer->write_outputs(dir.path()));
    for (const auto& d : r.explorer->diagnostics()) r.outcome.diagnostics.push_back(d);
    return r;
}

void write_stats(RunDirectory& dir, const ExplorationGraph& graph, const std::vector<StepTrace>& traces,
                 const std::vector<std::string>& cited) {
    std::vector<json> trace;
    for (const auto& t : traces) trace.push_back(t.to_json());
    auto stats = compute_stats(graph, trace, cited);
    write_text(fs::path(dir.path()) / "stats.json", stats.to_json().dump(2) + "\n");
    dir.add_artifacts({"stats.json"});
}

void write_tokens(RunDirectory& dir, const TokenLedger& ledger) {
    write_text(fs::path(dir.path()) / "tokens.json", ledger.summary().dump(2) + "\n");
    dir.add_artifacts({"tokens.json"});
}

}  // namespace

RunOutcome run_explore(const Config& config, Providers& providers, const std::string& out_dir,
                       const PipelineOptions& options) {
    validate(config);
    RunDirectory dir(out_dir, config, providers.identifiers(), options.seed);
    TokenLedger ledger;
    auto one = explore_into(config, providers, dir, ledger, options);
    if (one.outcome.status != RunStatus::Aborted) {
        write_stats(dir, one.explorer->graph(), one.explorer->traces(), {});
        if (one.explorer->kb().empty()) {
            one.outcome.status = RunStatus::Degraded;
            one.outcome.diagnostics.push_back("knowledge base empty after exploration");
        }
    }
    write_tokens(dir, ledger);
    dir.finish(one.outcome.status, one.outcome.diagnostics);
    return one.outcome;
}

RunOutcome run_pipeline(const Config& config, Providers& providers, const std::string& out_dir,
                        const PipelineOptions& options) {
    validate(config);
    RunDirectory dir(out_dir, config, providers.identifiers(), options.seed);
    TokenLedger ledger;
    auto one = explore_into(config, providers, dir, ledger, options);
    RunOutcome out = one.outcome;
    if (out.status == RunStatus::Aborted) {
        write_tokens(dir, ledger);
        dir.finish(out.status, out.diagnostics);
        return out;
    }
    const auto& explorer = *one.explorer;
    std::vector<std::string> cited;
    if (!options.synthesize) {
        // phase 2 skipped on request
    } else if (explorer.kb().empty()) {
        out.status = RunStatus::Degraded;
        out.diagnostics.push_back("synthesis skipped: knowledge base empty");
    } else {
        LlmGateway llm(*providers.llm, config, ledger, options.retry);
        try {
            auto result = synthesize(explorer.kb(), config.user_query, config, llm);
            dir.add_artifacts(write_synthesis_outputs(result, config.user_query, dir.path()));
            for (const auto& d : result.diagnostics) out.diagnostics.push_back(d);
            if (result.degraded) out.status = RunStatus::Degraded;
            auto ids = cited_ids(result.final_citations);
            auto claim_ids = cited_ids(result.final_claims);
            ids.insert(claim_ids.begin(), claim_ids.end());
            for (auto id : ids) cited.push_back(result.sources.url(id));
        } catch (const Error& e) {
            out.status = RunStatus::Degraded;
            out.diagnostics.push_back(std::string("synthesis failed: ") + e.what());
        }
    }
    try {
        write_stats(dir, explorer.graph(), explorer.traces(), cited);
    } catch (const Error& e) {
        out.status = RunStatus::Degraded;
        out.diagnostics.push_back(std::string("graph stats: ") + e.what());
    }
    write_tokens(dir, ledger);
    dir.finish(out.status, out.diagnostics);
    return out;
}

RunOutcome run_synthesize(const Config& config, ChatProvider& llm_provider, const std::string& kb_source,
                          const std::string& out_dir, const PipelineOptions& options) {
    validate(config);
    RunOutcome out;
    out.run_dir = out_dir;
    fs::path kb_path = kb_source;
    if (fs::is_directory(kb_path)) kb_path /= "kb.jsonl";
    HashEmbedder probe(static_cast<std::size_t>(config.embedding_dim));
    // Entries carry their own vectors; queries must be embedded in the same space.
    std::unique_ptr<Embedder> embedder = std::make_unique<HashEmbedder>(static_cast<std::size_t>(config.embedding_dim));
    KnowledgeBase kb(*embedder);
    try {
        KnowledgeBase::load_jsonl(kb_path.string(), kb);
    } catch (const Error& e) {
        out.status = RunStatus::Aborted;
        out.diagnostics.push_back(e.what());
        return out;
    }
    if (kb.empty()) {
        out.status = RunStatus::Aborted;
        out.diagnostics.push_back("knowledge base empty");
        return out;
    }
    auto entries = kb.snapshot();
    if (!entries.empty() && entries.front().embedding.size() != probe.dimension()) {
        out.status = RunStatus::Aborted;
        out.diagnostics.push_back("kb.jsonl embeddings have dimension " + std::to_string(entries.front().embedding.size()) +
                                  " but embedding_dim is " + std::to_string(probe.dimension()));
        return out;
    }
    std::string query = config.user_query;
    if (text::trim(query).empty()) {
        auto manifest = fs::path(kb_path).parent_path() / "manifest.json";
        if (fs::exists(manifest)) {
            query = read_json_file(manifest.string()).value("config", json::object()).value("user_query", "");
        }
    }
    if (text::trim(query).empty()) {
        out.status = RunStatus::Aborted;
        out.diagnostics.push_back("no query: set --query or user_query");
        return out;
    }
    Config cfg = config;
    cfg.user_query = query;
    RunDirectory dir(out_dir, cfg, {{"llm", llm_provider.name()}, {"embedder", probe.name()}}, options.seed);
    TokenLedger ledger;
    LlmGateway llm(llm_provider, cfg, ledger, options.retry);
    try {
        auto result = synthesize(kb, query, cfg, llm);
        dir.add_artifacts(write_synthesis_outputs(result, query, dir.path()));
        out.diagnostics = result.diagnostics;
        if (result.degraded) out.status = RunStatus::Degraded;
    } catch (const Error& e) {
        out.status = e.code() == ErrorCode::EmptyKnowledgeBase ? RunStatus::Aborted : RunStatus::Degraded;
        out.diagnostics.push_back(e.what());
    }
    write_tokens(dir, ledger);
    dir.finish(out.status, out.diagnostics);
    return out;
}

// ---------------------------------------------------------------------------

namespace {

struct AnswerSet {
    std::string query_id;
    std::string query;
    std::map<std::string, std::string> answers;
};

AnswerSet load_answers(const JudgeRequest& req) {
    AnswerSet s;
    s.query_id = req.query_id;
    s.query = req.query;
    fs::path p = req.answers;
    if (fs::is_directory(p)) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(p)) {
            if (!e.is_regular_file()) continue;
            auto ext = e.path().extension().string();
            if (ext == ".txt" || ext == ".md") files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            std::ifstream in(f, std::ios::binary);
            std::stringstream ss;
            ss << in.rdbuf();
            s.answers[f.stem().string()] = ss.str();
        }
        if (s.query.empty()) {
            auto qf = p / "query.txt";
            if (fs::exists(qf)) {
                s.answers.erase("query");
                std::ifstream in(qf, std::ios::binary);
                std::stringstream ss;
                ss << in.rdbuf();
                s.query = text::trim(ss.str());
            }
        } else {
            s.answers.erase("query");
        }
    } else {
        json j = read_json_file(p.string());
        s.query_id = j.value("query_id", s.query_id);
        if (s.query.empty()) s.query = j.value("query", std::string());
        for (auto it = j.at("answers").begin(); it != j.at("answers").end(); ++it) {
            s.answers[it.key()] = it.value().get<std::string>();
        }
    }
    if (s.query.empty()) throw Error(ErrorCode::InvalidArgument, "judge: no query text (query.txt, batch or --query)");
    return s;
}

}  // namespace

RunOutcome run_judge(const Config& config, const JudgeRequest& req, const std::string& out_dir,
                     const RetryPolicy& retry) {
    RunOutcome out;
    out.run_dir = out_dir;
    AnswerSet answers;
    json panel;
    try {
        answers = load_answers(req);
        panel = read_json_file(req.panel);
    } catch (const std::exception& e) {
        out.status = RunStatus::Aborted;
        out.diagnostics.push_back(e.what());
        return out;
    }
    fs::create_directories(out_dir);
    const fs::path panel_dir = fs::path(req.panel).parent_path();
    EnvLookup env = req.env ? req.env : process_env();
    std::map<std::string, std::string> families;
    if (auto f = panel.find("agent_families"); f != panel.end()) {
        for (auto it = f->begin(); it != f->end(); ++it) families[it.key()] = it.value().get<std::string>();
    }

    std::vector<TrialSet> all;
    std::vector<std::pair<std::string, std::string>> judges;  // id, family
    TokenLedger ledger;
    try {
        for (const auto& js : panel.at("judges")) {
            std::string id = js.at("id").get<std::string>();
            std::string family = js.value("family", std::string());
            std::unique_ptr<ChatProvider> provider;
            if (js.contains("fixture")) {
                fs::path fx = js.at("fixture").get<std::string>();
                if (fx.is_relative()) fx = panel_dir / fx;
                provider = ScriptedProvider::from_file(fx.string());
            } else {
                auto settings = OpenAiSettings::from_env(env);
                if (js.contains("model")) settings.model = js.at("model").get<std::string>();
                if (js.contains("base_url")) settings.base_url = js.at("base_url").get<std::string>();
                provider = std::make_unique<OpenAiProvider>(settings);
            }
            LlmGateway llm(*provider, config, ledger, retry);
            auto batch = judge_batch(answers.query_id, answers.query, answers.answers, id, llm, req.trials, req.seed);
            for (auto& w : batch.warnings) out.diagnostics.push_back(w);
            if (batch.trials.size() < static_cast<std::size_t>(req.trials)) out.status = RunStatus::Degraded;
            all.insert(all.end(), batch.trials.begin(), batch.trials.end());
            judges.emplace_back(id, family);
        }
    } catch (const std::exception& e) {
        out.status = RunStatus::Aborted;
        out.diagnostics.push_back(std::string("judge: ") + e.what());
        return out;
    }

    write_text(fs::path(out_dir) / "scores.csv", scores_csv(all));
    json means = json::object();
    for (const auto& [agent, m] : aggregate(all)) {
        means[agent] = {{"new", m.new_score}, {"useful", m.useful}, {"surprising", m.surprising},
                        {"total", m.total}, {"count", m.count}};
    }
    json biases = json::object();
    std::vector<BiasCell> cells;
    Dimension dim = dimension_from_string(req.bias_dimension);
    for (const auto& [id, family] : judges) {
        if (family.empty()) continue;
        try {
            double b = self_preference_bias(all, families, id, family, dim);
            biases[id] = {{"family", family}, {"bias", b}, {"formatted", format_bias(b)}};
            cells.push_back({id, answers.query_id, b});
        } catch (const Error& e) {
            biases[id] = {{"family", family}, {"bias", nullptr}, {"reason", e.what()}};
            cells.push_back({id, answers.query_id, std::nullopt});
        }
    }
    json pairs = json::array();
    for (const auto& p : pairwise_mwu(all)) {
        pairs.push_back({{"a", p.a}, {"b", p.b}, {"u", p.result.u}, {"p_value", p.result.p_value},
                         {"method", to_string(p.result.method)}});
    }
    json summary = {{"query_id", answers.query_id},
                    {"trials", req.trials},
                    {"seed", req.seed},
                    {"bias_dimension", to_string(dim)},
                    {"means", means},
                    {"biases", biases},
                    {"mwu", pairs},
                    {"tokens", ledger.summary()},
                    {"warnings", out.diagnostics}};
    write_text(fs::path(out_dir) / "summary.json", summary.dump(2) + "\n");
    if (!cells.empty()) write_text(fs::path(out_dir) / "bias.md", format_bias_table(cells));
    return out;
}

// ---------------------------------------------------------------------------

std::vector<json> read_jsonl(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot read " + path);
    std::vector<json> out;
    std::string line;
    while (std::getline(in, line)) {
        if (text::trim(line).empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) throw Error(ErrorCode::Parse, "malformed line in " + path);
        out.push_back(std::move(j));
    }
    return out;
}

std::vector<std::string> load_cited_urls(const std::string& run_dir) {
    fs::path p = fs::path(run_dir) / "citations.json";
    if (!fs::exists(p)) return {};
    return read_json_file(p.string()).value("cited_urls", std::vector<std::string>{});
}

RunOutcome run_graph_stats(const std::string& run_dir, const std::string& out_file) {
    RunOutcome out;
    out.run_dir = run_dir;
    try {
        auto graph = ExplorationGraph::load((fs::path(run_dir) / "graph.json").string());
        std::vector<json> trace;
        if (fs::exists(fs::path(run_dir) / "trace.jsonl")) trace = read_jsonl((fs::path(run_dir) / "trace.jsonl").string());
        auto stats = compute_stats(graph, trace, load_cited_urls(run_dir));
        write_text(out_file.empty() ? fs::path(run_dir) / "stats.json" : fs::path(out_file), stats.to_json().dump(2) + "\n");
    } catch (const std::exception& e) {
        out.status = RunStatus::Aborted;
        out.diagnostics.push_back(e.what());
    }
    return out;
}

RunOutcome run_graph_export(const std::string& run_dir, const std::string& format, const std::string& out_file) {
    RunOutcome out;
    out.run_dir = run_dir;
    try {
        auto fmt = export_format_from_string(format);
        auto graph = ExplorationGraph::load((fs::path(run_dir) / "graph.json").string());
        auto cited_list = load_cited_urls(run_dir);
        std::set<std::string> cited(cited_list.begin(), cited_list.end());
        fs::path dst = out_file.empty()
                           ? fs::path(run_dir) / (fmt == ExportFormat::Dot ? "graph.dot" : "graph.graphml")
                           : fs::path(out_file);
        write_text(dst, export_graph(graph, fmt, cited));
    } catch (const std::exception& e) {
        out.status = RunStatus::Aborted;
        out.diagnostics.push_back(e.what());
    }
    return out;
}

RunOutcome run_graph_embeddings(const std::string& run_dir, const std::string& out_file) {
    RunOutcome out;
    out.run_dir = run_dir;
    try {
        fs::path kb_path = fs::is_directory(run_dir) ? fs::path(run_dir) / "kb.jsonl" : fs::path(run_dir);
        HashEmbedder unused;
        KnowledgeBase kb(unused);
        KnowledgeBase::load_jsonl(kb_path.string(), kb);
        fs::path dst = out_file.empty() ? kb_path.parent_path() / "embeddings.tsv" : fs::path(out_file);
        write_text(dst, embeddings_tsv(kb.snapshot()));
    } catch (const std::exception& e) {
        out.status = RunStatus::Aborted;
        out.diagnostics.push_back(e.what());
    }
    return out;
}

}  // namespace caesar
