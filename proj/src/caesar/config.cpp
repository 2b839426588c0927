#include "caesar/config.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#include "caesar/error.hpp"

namespace caesar {

using nlohmann::json;

const char* to_string(ReasoningEffort effort) {
    switch (effort) {
        case ReasoningEffort::Low:    return "low";
        case ReasoningEffort::Medium: return "medium";
        case ReasoningEffort::High:   return "high";
    }
    return "low";
}

ReasoningEffort reasoning_effort_from_string(const std::string& s) {
    if (s == "low") return ReasoningEffort::Low;
    if (s == "medium") return ReasoningEffort::Medium;
    if (s == "high") return ReasoningEffort::High;
    throw Error(ErrorCode::Validation, "reasoning effort must be low, medium or high, got '" + s + "'");
}

namespace {

struct KeySpec {
    std::string name;
    std::string alias;  // short symbol, empty if none
    std::function<json(const Config&)> get;
    std::function<void(Config&, const json&)> set;
};

std::int64_t as_int(const std::string& key, const json& v) {
    if (v.is_number_integer() || v.is_number_unsigned()) return v.get<std::int64_t>();
    if (v.is_number_float()) {
        double d = v.get<double>();
        if (d == static_cast<double>(static_cast<std::int64_t>(d))) return static_cast<std::int64_t>(d);
    }
    throw Error(ErrorCode::Validation, "key '" + key + "' expects an integer");
}

double as_double(const std::string& key, const json& v) {
    if (!v.is_number()) throw Error(ErrorCode::Validation, "key '" + key + "' expects a number");
    return v.get<double>();
}

std::string as_string(const std::string& key, const json& v) {
    if (!v.is_string()) throw Error(ErrorCode::Validation, "key '" + key + "' expects a string");
    return v.get<std::string>();
}

#define CAESAR_INT_KEY(field, alias)                                                    \
    KeySpec{#field, alias, [](const Config& c) { return json(c.field); },               \
            [](Config& c, const json& v) { c.field = as_int(#field, v); }}
#define CAESAR_DOUBLE_KEY(field, alias)                                                 \
    KeySpec{#field, alias, [](const Config& c) { return json(c.field); },               \
            [](Config& c, const json& v) { c.field = as_double(#field, v); }}
#define CAESAR_EFFORT_KEY(field, alias)                                                 \
    KeySpec{#field, alias, [](const Config& c) { return json(to_string(c.field)); },    \
            [](Config& c, const json& v) {                                              \
                c.field = reasoning_effort_from_string(as_string(#field, v));           \
            }}

const std::vector<KeySpec>& key_specs() {
    static const std::vector<KeySpec> specs = {
        CAESAR_INT_KEY(exploration_budget, "T"),
        CAESAR_INT_KEY(max_page_chars, "P_m"),
        CAESAR_INT_KEY(max_links_per_page, "L_m"),
        CAESAR_INT_KEY(max_revisits, "R_m"),
        CAESAR_INT_KEY(max_web_searches, "S_m"),
        CAESAR_INT_KEY(max_depth, "D_m"),
        CAESAR_INT_KEY(neighbor_context, "N_c"),
        CAESAR_DOUBLE_KEY(explore_temperature, "tau_e"),
        CAESAR_EFFORT_KEY(explore_reasoning, "R_e"),
        CAESAR_INT_KEY(insight_budget, "T_hat"),
        CAESAR_INT_KEY(refinement_rounds, "N"),
        CAESAR_INT_KEY(max_qa_history, "H_c"),
        CAESAR_INT_KEY(max_citations_per_claim, "C_m"),
        CAESAR_DOUBLE_KEY(synth_temperature, "tau_s"),
        CAESAR_EFFORT_KEY(synth_reasoning, "R_s"),
        CAESAR_INT_KEY(max_output_tokens, "O_m"),
        CAESAR_INT_KEY(retrieve_k, "R_k"),
        CAESAR_INT_KEY(rerank_n, "R_n"),
        CAESAR_INT_KEY(chunk_size, ""),
        CAESAR_INT_KEY(chunk_overlap, ""),
        KeySpec{"allowed_domains", "",
                [](const Config& c) { return json(c.allowed_domains); },
                [](Config& c, const json& v) {
                    if (v.is_string()) {
                        // comma-separated form, convenient for environment overrides
                        c.allowed_domains.clear();
                        std::stringstream ss(v.get<std::string>());
                        std::string item;
                        while (std::getline(ss, item, ',')) {
                            item.erase(0, item.find_first_not_of(" \t"));
                            item.erase(item.find_last_not_of(" \t") + 1);
                            if (!item.empty()) c.allowed_domains.push_back(item);
                        }
                        return;
                    }
                    if (!v.is_array()) throw Error(ErrorCode::Validation, "key 'allowed_domains' expects a list of strings");
                    std::vector<std::string> out;
                    for (const auto& d : v) out.push_back(as_string("allowed_domains", d));
                    c.allowed_domains = std::move(out);
                }},
        KeySpec{"user_query", "Q",
                [](const Config& c) { return json(c.user_query); },
                [](Config& c, const json& v) { c.user_query = as_string("user_query", v); }},
        CAESAR_INT_KEY(embedding_dim, ""),
        CAESAR_INT_KEY(memory_recall_window, ""),
        CAESAR_DOUBLE_KEY(fetch_timeout_s, ""),
        KeySpec{"eli5_word_limit", "",
                [](const Config& c) { return c.eli5_word_limit ? json(*c.eli5_word_limit) : json(nullptr); },
                [](Config& c, const json& v) {
                    if (v.is_null()) c.eli5_word_limit.reset();
                    else c.eli5_word_limit = as_int("eli5_word_limit", v);
                }},
    };
    return specs;
}

#undef CAESAR_INT_KEY
#undef CAESAR_DOUBLE_KEY
#undef CAESAR_EFFORT_KEY

const KeySpec* find_key(const std::string& key) {
    for (const auto& spec : key_specs()) {
        if (spec.name == key || (!spec.alias.empty() && spec.alias == key)) return &spec;
    }
    return nullptr;
}

std::string upper(std::string s) {
    for (auto& ch : s) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    return s;
}

json parse_env_value(const std::string& raw) {
    auto parsed = json::parse(raw, nullptr, false);
    if (parsed.is_discarded()) return json(raw);
    return parsed;
}

void require_positive(const std::string& key, std::int64_t v) {
    if (v <= 0) throw Error(ErrorCode::Validation, "key '" + key + "' must be > 0 (got " + std::to_string(v) + ")");
}

void require_temperature(const std::string& key, double v) {
    if (!(v >= 0.0 && v <= 2.0)) {
        throw Error(ErrorCode::Validation, "key '" + key + "' must lie in [0, 2]");
    }
}

}  // namespace

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> out;
        for (const auto& spec : key_specs()) out.push_back(spec.name);
        return out;
    }();
    return keys;
}

void validate(const Config& c) {
    // A zero exploration budget is a legal degenerate run (root node only).
    if (c.exploration_budget < 0) {
        throw Error(ErrorCode::Validation, "key 'exploration_budget' must be >= 0");
    }
    require_positive("max_page_chars", c.max_page_chars);
    require_positive("max_links_per_page", c.max_links_per_page);
    require_positive("max_revisits", c.max_revisits);
    require_positive("max_web_searches", c.max_web_searches);
    require_positive("max_depth", c.max_depth);
    if (c.neighbor_context < 0) throw Error(ErrorCode::Validation, "key 'neighbor_context' must be >= 0");
    require_temperature("explore_temperature", c.explore_temperature);
    require_positive("insight_budget", c.insight_budget);
    require_positive("refinement_rounds", c.refinement_rounds);
    require_positive("max_qa_history", c.max_qa_history);
    require_positive("max_citations_per_claim", c.max_citations_per_claim);
    require_temperature("synth_temperature", c.synth_temperature);
    require_positive("max_output_tokens", c.max_output_tokens);
    require_positive("retrieve_k", c.retrieve_k);
    require_positive("rerank_n", c.rerank_n);
    if (c.rerank_n > c.retrieve_k) {
        throw Error(ErrorCode::Validation, "key 'rerank_n' must not exceed retrieve_k");
    }
    require_positive("chunk_size", c.chunk_size);
    if (c.chunk_overlap < 0 || c.chunk_overlap >= c.chunk_size) {
        throw Error(ErrorCode::Validation, "key 'chunk_overlap' must satisfy 0 <= chunk_overlap < chunk_size");
    }
    // chunking runs on words at 3/4 word per token; the word window must stay non-degenerate
    if ((c.chunk_size * 3) / 4 <= (c.chunk_overlap * 3) / 4) {
        throw Error(ErrorCode::Validation, "key 'chunk_overlap' leaves no stride at word granularity");
    }
    for (const auto& d : c.allowed_domains) {
        if (d.empty()) throw Error(ErrorCode::Validation, "key 'allowed_domains' contains an empty entry");
    }
    require_positive("embedding_dim", c.embedding_dim);
    require_positive("memory_recall_window", c.memory_recall_window);
    if (!(c.fetch_timeout_s > 0.0)) throw Error(ErrorCode::Validation, "key 'fetch_timeout_s' must be > 0");
    if (c.eli5_word_limit) require_positive("eli5_word_limit", *c.eli5_word_limit);
}

json to_json(const Config& config) {
    json j = json::object();
    for (const auto& spec : key_specs()) j[spec.name] = spec.get(config);
    return j;
}

void set_config_value(Config& config, const std::string& key, const json& value) {
    const KeySpec* spec = find_key(key);
    if (!spec) throw Error(ErrorCode::Validation, "unknown config key '" + key + "'");
    spec->set(config, value);
}

json get_config_value(const Config& config, const std::string& key) {
    const KeySpec* spec = find_key(key);
    if (!spec) throw Error(ErrorCode::InvalidArgument, "unknown config key '" + key + "'");
    return spec->get(config);
}

EnvLookup process_env() {
    return [](const std::string& name) -> std::optional<std::string> {
        if (const char* v = std::getenv(name.c_str())) return std::string(v);
        return std::nullopt;
    };
}

Config load_config(const std::string& json_text, const EnvLookup& env) {
    Config config;
    bool blank = std::all_of(json_text.begin(), json_text.end(),
                             [](unsigned char ch) { return std::isspace(ch); });
    if (!blank) {
        json doc;
        try {
            doc = json::parse(json_text);
        } catch (const json::parse_error& e) {
            throw Error(ErrorCode::Parse, std::string("config is not valid JSON: ") + e.what());
        }
        if (!doc.is_object()) throw Error(ErrorCode::Parse, "config must be a JSON object");
        std::vector<const KeySpec*> seen;
        for (const auto& [key, value] : doc.items()) {
            const KeySpec* spec = find_key(key);
            if (!spec) throw Error(ErrorCode::Validation, "unknown config key '" + key + "'");
            if (std::find(seen.begin(), seen.end(), spec) != seen.end()) {
                throw Error(ErrorCode::Validation, "config key '" + spec->name + "' given more than once");
            }
            seen.push_back(spec);
            spec->set(config, value);
        }
    }
    if (env) {
        for (const auto& spec : key_specs()) {
            // the long name wins over the symbol alias when both are set
            std::optional<std::string> raw = env("CAESAR_" + upper(spec.name));
            if (!raw && !spec.alias.empty()) raw = env("CAESAR_" + upper(spec.alias));
            if (raw) spec.set(config, parse_env_value(*raw));
        }
    }
    validate(config);
    return config;
}

Config load_config_file(const std::string& path, const EnvLookup& env) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot read config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return load_config(ss.str(), env);
}

json to_json(const RunManifest& m) {
    return json{
        {"run_id", m.run_id},
        {"created_at", m.created_at},
        {"config", m.config_snapshot},
        {"providers", m.providers},
        {"output_dir", m.output_dir},
        {"status", m.status},
        {"artifacts", m.artifacts},
        {"diagnostics", m.diagnostics},
        {"seed", m.seed},
    };
}

RunManifest manifest_from_json(const json& j) {
    RunManifest m;
    m.run_id = j.value("run_id", "");
    m.created_at = j.value("created_at", "");
    m.config_snapshot = j.value("config", json::object());
    m.providers = j.value("providers", std::map<std::string, std::string>{});
    m.output_dir = j.value("output_dir", "");
    m.status = j.value("status", "incomplete");
    m.artifacts = j.value("artifacts", std::vector<std::string>{});
    m.diagnostics = j.value("diagnostics", std::vector<std::string>{});
    m.seed = j.value("seed", std::uint64_t{0});
    return m;
}

std::string utc_timestamp() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

std::string new_run_id() {
    static std::atomic<std::uint64_t> counter{0};
    std::random_device rd;
    auto ticks = std::chrono::system_clock::now().time_since_epoch().count();
    std::uint64_t mix = (static_cast<std::uint64_t>(rd()) << 32) ^ static_cast<std::uint64_t>(ticks) ^
                        (counter.fetch_add(1) * 0x9E3779B97F4A7C15ULL);
    std::ostringstream os;
    os << "run-" << std::hex << std::setw(16) << std::setfill('0') << mix;
    return os.str();
}

}  // namespace caesar
