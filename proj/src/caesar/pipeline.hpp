#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "caesar/config.hpp"
#include "caesar/knowledge.hpp"
#include "caesar/llm.hpp"
#include "caesar/perceive.hpp"
#include "caesar/search.hpp"

namespace caesar {

enum class RunMode { Live, Offline };
RunMode run_mode_from_string(const std::string& s);

struct ProviderSpec {
    RunMode mode = RunMode::Offline;
    std::string corpus_manifest;  // offline: pages plus an optional "search" section
    std::string search_fixture;   // overrides the manifest's search section
    std::string llm_fixture;      // scripted LLM; empty = OpenAI-compatible endpoint from env
    bool honor_robots = true;
    EnvLookup env;
};

struct Providers {
    std::unique_ptr<ChatProvider> llm;
    std::unique_ptr<SearchProvider> search;
    std::unique_ptr<PageSource> pages;
    std::unique_ptr<Embedder> embedder;

    std::map<std::string, std::string> identifiers() const;
};

// Offline without a corpus manifest throws Error{InvalidArgument} before anything is read.
Providers make_providers(const ProviderSpec& spec, const Config& config);

// LLM only, for synthesis over an existing knowledge base.
Providers make_llm_providers(const std::string& llm_fixture, const EnvLookup& env = {});

enum class RunStatus { Complete = 0, Degraded = 1, Aborted = 2 };
const char* to_string(RunStatus s);

struct RunOutcome {
    RunStatus status = RunStatus::Complete;
    std::vector<std::string> diagnostics;
    std::string run_dir;

    int exit_code() const { return static_cast<int>(status); }
};

// Manifest-first run directory: manifest.json is written on open and rewritten
// as artifacts land.
class RunDirectory {
public:
    RunDirectory(std::string path, const Config& config, std::map<std::string, std::string> providers,
                 std::uint64_t seed);
    const std::string& path() const { return path_; }
    RunManifest& manifest() { return manifest_; }
    void add_artifacts(const std::vector<std::string>& files);
    void finish(RunStatus status, const std::vector<std::string>& diagnostics);
    void write_manifest() const;

private:
    std::string path_;
    RunManifest manifest_;
};

struct PipelineOptions {
    std::uint64_t seed = 0x5EED;
    RetryPolicy retry{};
    bool synthesize = true;
};

// Phase 1 then Phase 2 into `out_dir`.
RunOutcome run_pipeline(const Config& config, Providers& providers, const std::string& out_dir,
                        const PipelineOptions& options = {});

// Phase 1 only.
RunOutcome run_explore(const Config& config, Providers& providers, const std::string& out_dir,
                       const PipelineOptions& options = {});

// Phase 2 over an existing kb.jsonl (a file, or a run directory containing one).
RunOutcome run_synthesize(const Config& config, ChatProvider& llm, const std::string& kb_source,
                          const std::string& out_dir, const PipelineOptions& options = {});

struct JudgeRequest {
    std::string answers;  // directory of <agent>.txt/.md files, or a JSON batch file
    std::string panel;    // JSON panel file
    std::string query;    // overrides the batch's query
    std::string query_id = "q1";
    int trials = 3;
    std::uint64_t seed = 0x5EED;
    std::string bias_dimension = "total";
    EnvLookup env;
};

RunOutcome run_judge(const Config& config, const JudgeRequest& request, const std::string& out_dir,
                     const RetryPolicy& retry = {});

// stats.json for a run directory; cited URLs come from citations.json when present.
RunOutcome run_graph_stats(const std::string& run_dir, const std::string& out_file);
RunOutcome run_graph_export(const std::string& run_dir, const std::string& format, const std::string& out_file);
RunOutcome run_graph_embeddings(const std::string& run_dir, const std::string& out_file);

std::vector<std::string> load_cited_urls(const std::string& run_dir);
std::vector<nlohmann::json> read_jsonl(const std::string& path);

}  // namespace caesar
