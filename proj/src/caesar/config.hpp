#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace caesar {

enum class ReasoningEffort { Low, Medium, High };

const char* to_string(ReasoningEffort effort);
ReasoningEffort reasoning_effort_from_string(const std::string& s);

// Run configuration. Defaults are the published hyperparameter table plus the
// chunking settings of the reference vector store.
struct Config {
    // Exploration phase
    std::int64_t exploration_budget = 1000;      // T
    std::int64_t max_page_chars = 100000;        // P_m
    std::int64_t max_links_per_page = 2000;      // L_m
    std::int64_t max_revisits = 20;              // R_m
    std::int64_t max_web_searches = 30;          // S_m
    std::int64_t max_depth = 10000;              // D_m
    std::int64_t neighbor_context = 5;           // N_c
    double explore_temperature = 0.9;            // tau_e
    ReasoningEffort explore_reasoning = ReasoningEffort::Low;

    // Synthesis phase
    std::int64_t insight_budget = 30;            // T-hat
    std::int64_t refinement_rounds = 3;          // N
    std::int64_t max_qa_history = 50;            // H_c
    std::int64_t max_citations_per_claim = 5;    // C_m
    double synth_temperature = 0.1;              // tau_s
    ReasoningEffort synth_reasoning = ReasoningEffort::High;

    // Global
    std::int64_t max_output_tokens = 50000;      // O_m
    std::int64_t retrieve_k = 50;                // R_k
    std::int64_t rerank_n = 10;                  // R_n
    std::int64_t chunk_size = 400;
    std::int64_t chunk_overlap = 80;
    std::vector<std::string> allowed_domains;    // empty = unrestricted
    std::string user_query;                      // Q

    // Artifact settings without a published value.
    std::int64_t embedding_dim = 256;
    std::int64_t memory_recall_window = 10;
    double fetch_timeout_s = 20.0;
    std::optional<std::int64_t> eli5_word_limit;

    bool operator==(const Config&) const = default;
};

// Throws Error{Validation} naming the first offending key.
void validate(const Config& config);

nlohmann::json to_json(const Config& config);

// Environment lookup hook; tests substitute a map.
using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
EnvLookup process_env();

// Parses a flat JSON document (empty text = defaults), applies CAESAR_* overrides
// from `env`, then validates. Unknown keys are rejected.
Config load_config(const std::string& json_text, const EnvLookup& env = {});
Config load_config_file(const std::string& path, const EnvLookup& env = {});

// Applies one key (canonical name or short symbol alias, e.g. "T") with a JSON value.
void set_config_value(Config& config, const std::string& key, const nlohmann::json& value);

// Reads one key by canonical name or alias; Error{InvalidArgument} for unknown keys.
nlohmann::json get_config_value(const Config& config, const std::string& key);

// Canonical key list, in serialization order.
const std::vector<std::string>& config_keys();

struct RunManifest {
    std::string run_id;
    std::string created_at;            // ISO-8601 UTC
    nlohmann::json config_snapshot;
    std::map<std::string, std::string> providers;
    std::string output_dir;
    std::string status = "incomplete"; // incomplete | complete | degraded | aborted
    std::vector<std::string> artifacts;
    std::vector<std::string> diagnostics;
    std::uint64_t seed = 0;
};

nlohmann::json to_json(const RunManifest& manifest);
RunManifest manifest_from_json(const nlohmann::json& j);

std::string new_run_id();
std::string utc_timestamp();

}  // namespace caesar
