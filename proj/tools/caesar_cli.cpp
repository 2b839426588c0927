// caesar command-line front end. Links only against the C interface.
#include <caesar/caesar.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include <CLI11.hpp>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitAbort = 2;
constexpr std::uint64_t kDefaultSeed = 0x5EED;

int fail(caesar_status st, const std::string& context) {
    std::fprintf(stderr, "caesar: %s: %s (%s)\n", context.c_str(), caesar_last_error(), caesar_status_string(st));
    return kExitAbort;
}

struct ConfigHandle {
    caesar_config* ptr = nullptr;
    ~ConfigHandle() { caesar_config_free(ptr); }
};

struct ProvidersHandle {
    caesar_providers* ptr = nullptr;
    ~ProvidersHandle() { caesar_providers_free(ptr); }
};

struct OutcomeHandle {
    caesar_outcome* ptr = nullptr;
    ~OutcomeHandle() { caesar_outcome_free(ptr); }
};

struct CommonFlags {
    std::string config_path;
    std::string query;
    std::string mode = "offline";
    std::string out;
    std::uint64_t seed = kDefaultSeed;
    std::optional<long long> rounds;
    std::optional<long long> budget;
    std::optional<long long> insight_budget;
    std::optional<long long> word_limit;
    std::string corpus;
    std::string llm_fixture;
    std::string search_fixture;
};

caesar_status set_int(caesar_config* cfg, const char* key, long long v) {
    return caesar_config_set(cfg, key, std::to_string(v).c_str());
}

caesar_status set_string(caesar_config* cfg, const char* key, const std::string& v) {
    std::string lit = "\"";
    for (char c : v) {
        if (c == '"' || c == '\\') lit += '\\';
        if (c == '\n') { lit += "\\n"; continue; }
        lit += c;
    }
    lit += '"';
    return caesar_config_set(cfg, key, lit.c_str());
}

// Loads --config (or defaults) with environment overrides, then applies flag overrides.
int build_config(const CommonFlags& f, ConfigHandle& cfg) {
    caesar_status st = f.config_path.empty() ? caesar_config_load("", &cfg.ptr)
                                             : caesar_config_load_file(f.config_path.c_str(), &cfg.ptr);
    if (st != CAESAR_OK) return fail(st, "config");
    if (!f.query.empty() && (st = set_string(cfg.ptr, "user_query", f.query)) != CAESAR_OK) return fail(st, "--query");
    if (f.budget && (st = set_int(cfg.ptr, "exploration_budget", *f.budget)) != CAESAR_OK) return fail(st, "--budget");
    if (f.rounds && (st = set_int(cfg.ptr, "refinement_rounds", *f.rounds)) != CAESAR_OK) return fail(st, "--rounds");
    if (f.insight_budget && (st = set_int(cfg.ptr, "insight_budget", *f.insight_budget)) != CAESAR_OK) {
        return fail(st, "--insight-budget");
    }
    if (f.word_limit && (st = set_int(cfg.ptr, "eli5_word_limit", *f.word_limit)) != CAESAR_OK) {
        return fail(st, "--word-limit");
    }
    return kExitOk;
}

const char* opt(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

int report(caesar_outcome* outcome) {
    int code = caesar_outcome_exit_code(outcome);
    for (size_t i = 0; i < caesar_outcome_diagnostic_count(outcome); ++i) {
        std::fprintf(stderr, "caesar: %s\n", caesar_outcome_diagnostic(outcome, i));
    }
    return code;
}

void add_common(CLI::App* cmd, CommonFlags& f, bool synthesis_flags, bool exploration_flags) {
    cmd->add_option("--config", f.config_path, "JSON configuration file")->check(CLI::ExistingFile);
    cmd->add_option("--query", f.query, "Research query");
    cmd->add_option("--out", f.out, "Output run directory")->required();
    cmd->add_option("--seed", f.seed, "Seed for all randomized choices")->capture_default_str();
    cmd->add_option("--llm-fixture", f.llm_fixture, "Scripted LLM responses (JSON) instead of a live endpoint");
    if (exploration_flags) {
        cmd->add_option("--mode", f.mode, "live or offline")
            ->check(CLI::IsMember({"live", "offline"}))
            ->capture_default_str();
        cmd->add_option("--budget", f.budget, "Exploration steps (T)");
        cmd->add_option("--corpus", f.corpus, "Offline corpus manifest");
        cmd->add_option("--search-fixture", f.search_fixture, "Search fixture (JSON)");
    }
    if (synthesis_flags) {
        cmd->add_option("--rounds", f.rounds, "Refinement rounds (N)");
        cmd->add_option("--insight-budget", f.insight_budget, "QA chain length cap");
        cmd->add_option("--word-limit", f.word_limit, "ELI5 word limit");
    }
}

int cmd_pipeline(const CommonFlags& f, bool synthesize) {
    ConfigHandle cfg;
    if (int rc = build_config(f, cfg); rc != kExitOk) return rc;
    ProvidersHandle prov;
    caesar_status st = caesar_providers_create(cfg.ptr, f.mode.c_str(), opt(f.corpus), opt(f.search_fixture),
                                               opt(f.llm_fixture), &prov.ptr);
    if (st != CAESAR_OK) return fail(st, "providers");
    OutcomeHandle out;
    st = synthesize ? caesar_run(cfg.ptr, prov.ptr, f.out.c_str(), f.seed, &out.ptr)
                    : caesar_explore(cfg.ptr, prov.ptr, f.out.c_str(), f.seed, &out.ptr);
    if (st != CAESAR_OK) return fail(st, synthesize ? "run" : "explore");
    int code = report(out.ptr);
    std::printf("%s\n", f.out.c_str());
    return code;
}

int cmd_synthesize(const CommonFlags& f, const std::string& kb) {
    ConfigHandle cfg;
    if (int rc = build_config(f, cfg); rc != kExitOk) return rc;
    ProvidersHandle prov;
    caesar_status st = caesar_providers_create_llm(opt(f.llm_fixture), &prov.ptr);
    if (st != CAESAR_OK) return fail(st, "providers");
    OutcomeHandle out;
    st = caesar_synthesize(cfg.ptr, prov.ptr, kb.c_str(), f.out.c_str(), f.seed, &out.ptr);
    if (st != CAESAR_OK) return fail(st, "synthesize");
    int code = report(out.ptr);
    std::printf("%s\n", f.out.c_str());
    return code;
}

int cmd_init_config(const std::string& path, bool force) {
    if (!force && std::filesystem::exists(path)) {
        std::fprintf(stderr, "caesar: %s exists (use --force to overwrite)\n", path.c_str());
        return kExitAbort;
    }
    ConfigHandle cfg;
    caesar_status st = caesar_config_default(&cfg.ptr);
    if (st != CAESAR_OK) return fail(st, "init-config");
    char* text = nullptr;
    if ((st = caesar_config_to_json(cfg.ptr, &text)) != CAESAR_OK) return fail(st, "init-config");
    std::ofstream o(path, std::ios::binary | std::ios::trunc);
    o << text << "\n";
    caesar_string_free(text);
    if (!o) {
        std::fprintf(stderr, "caesar: cannot write %s\n", path.c_str());
        return kExitAbort;
    }
    std::printf("%s\n", path.c_str());
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"caesar: graph-guided web exploration and iterative report synthesis"};
    app.require_subcommand(1);
    app.set_version_flag("--version", caesar_version());

    CommonFlags run_flags, explore_flags, synth_flags;
    auto* run = app.add_subcommand("run", "Explore the web, then synthesize a cited report");
    add_common(run, run_flags, true, true);
    auto* explore = app.add_subcommand("explore", "Exploration phase only");
    add_common(explore, explore_flags, false, true);
    auto* synth = app.add_subcommand("synthesize", "Synthesis phase over an existing knowledge base");
    add_common(synth, synth_flags, true, false);
    std::string kb_source;
    synth->add_option("--kb", kb_source, "kb.jsonl or a run directory containing it")->required();

    auto* judge = app.add_subcommand("judge", "Score anonymized answers with an LLM judge panel");
    std::string answers, panel, judge_query, judge_out, judge_config, dimension = "total";
    int trials = 3;
    std::uint64_t judge_seed = kDefaultSeed;
    judge->add_option("--answers", answers, "Directory of per-agent answers, or a JSON batch")->required();
    judge->add_option("--panel", panel, "Judge panel (JSON)")->required()->check(CLI::ExistingFile);
    judge->add_option("--query", judge_query, "Query shown to the judges");
    judge->add_option("--trials", trials, "Trials per judge")->capture_default_str()->check(CLI::PositiveNumber);
    judge->add_option("--seed", judge_seed, "Anonymization seed")->capture_default_str();
    judge->add_option("--dimension", dimension, "Bias dimension: new, useful, surprising or total")
        ->check(CLI::IsMember({"new", "useful", "surprising", "total"}))
        ->capture_default_str();
    judge->add_option("--config", judge_config, "JSON configuration file")->check(CLI::ExistingFile);
    judge->add_option("--out", judge_out, "Output directory")->required();

    auto* graph = app.add_subcommand("graph", "Knowledge graph tools");
    graph->require_subcommand(1);
    std::string stats_run, stats_out, export_run, export_out, export_format = "dot", emb_run, emb_out;
    auto* stats = graph->add_subcommand("stats", "Structural statistics (stats.json)");
    stats->add_option("run_dir", stats_run, "Run directory")->required()->check(CLI::ExistingDirectory);
    stats->add_option("--out", stats_out, "Output file (default <run_dir>/stats.json)");
    auto* gexport = graph->add_subcommand("export", "DOT or GraphML export");
    gexport->add_option("run_dir", export_run, "Run directory")->required()->check(CLI::ExistingDirectory);
    gexport->add_option("--format", export_format, "dot or graphml")->capture_default_str();
    gexport->add_option("--out", export_out, "Output file (default <run_dir>/graph.<ext>)");
    auto* emb = graph->add_subcommand("embeddings", "Knowledge base embeddings as TSV");
    emb->add_option("run_dir", emb_run, "Run directory")->required()->check(CLI::ExistingDirectory);
    emb->add_option("--out", emb_out, "Output file (default <run_dir>/embeddings.tsv)");

    auto* init = app.add_subcommand("init-config", "Write a configuration file with default settings");
    std::string init_path = "caesar.json";
    bool force = false;
    init->add_option("path", init_path, "Destination")->capture_default_str();
    init->add_flag("--force", force, "Overwrite an existing file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitAbort;
    }

    if (*run) return cmd_pipeline(run_flags, true);
    if (*explore) return cmd_pipeline(explore_flags, false);
    if (*synth) return cmd_synthesize(synth_flags, kb_source);
    if (*init) return cmd_init_config(init_path, force);
    if (*judge) {
        ConfigHandle cfg;
        caesar_status st = judge_config.empty() ? caesar_config_load("", &cfg.ptr)
                                                : caesar_config_load_file(judge_config.c_str(), &cfg.ptr);
        if (st != CAESAR_OK) return fail(st, "config");
        OutcomeHandle out;
        st = caesar_judge(cfg.ptr, answers.c_str(), panel.c_str(), opt(judge_query), trials, judge_seed,
                          dimension.c_str(), judge_out.c_str(), &out.ptr);
        if (st != CAESAR_OK) return fail(st, "judge");
        return report(out.ptr);
    }
    OutcomeHandle out;
    caesar_status st = CAESAR_OK;
    if (*stats) st = caesar_graph_stats(stats_run.c_str(), opt(stats_out), &out.ptr);
    else if (*gexport) st = caesar_graph_export(export_run.c_str(), export_format.c_str(), opt(export_out), &out.ptr);
    else if (*emb) st = caesar_graph_embeddings(emb_run.c_str(), opt(emb_out), &out.ptr);
    if (st != CAESAR_OK) return fail(st, "graph");
    return report(out.ptr);
}
