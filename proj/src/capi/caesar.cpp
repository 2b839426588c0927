#include "caesar/caesar.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "caesar/config.hpp"
#include "caesar/error.hpp"
#include "caesar/judge.hpp"
#include "caesar/mwu.hpp"
#include "caesar/pipeline.hpp"

struct caesar_config {
    caesar::Config value;
};

struct caesar_providers {
    caesar::Providers value;
};

struct caesar_outcome {
    caesar::RunOutcome value;
};

namespace {

thread_local std::string g_last_error;
caesar::RetryPolicy g_retry{};

caesar_status map_code(caesar::ErrorCode code) {
    using caesar::ErrorCode;
    switch (code) {
        case ErrorCode::InvalidArgument:
        case ErrorCode::MissingBinding:
        case ErrorCode::UnknownTemplate: return CAESAR_E_INVALID_ARGUMENT;
        case ErrorCode::Parse: return CAESAR_E_PARSE;
        case ErrorCode::Validation: return CAESAR_E_VALIDATION;
        case ErrorCode::Io: return CAESAR_E_IO;
        case ErrorCode::CredentialMissing:
        case ErrorCode::Transport:
        case ErrorCode::ProviderStatus:
        case ErrorCode::NoScriptedResponse:
        case ErrorCode::InvalidContent:
        case ErrorCode::FetchFailed:
        case ErrorCode::SearchFailed: return CAESAR_E_PROVIDER;
        case ErrorCode::EmptyKnowledgeBase: return CAESAR_E_EMPTY_KB;
        case ErrorCode::EmptySample: return CAESAR_E_EMPTY_SAMPLE;
        case ErrorCode::UndefinedBias: return CAESAR_E_UNDEFINED;
        case ErrorCode::Unsupported: return CAESAR_E_UNSUPPORTED;
        case ErrorCode::Integrity: return CAESAR_E_INTEGRITY;
    }
    return CAESAR_E_INTERNAL;
}

template <class F>
caesar_status guarded(F&& f) {
    g_last_error.clear();
    try {
        f();
        return CAESAR_OK;
    } catch (const caesar::Error& e) {
        g_last_error = e.what();
        return map_code(e.code());
    } catch (const nlohmann::json::exception& e) {
        g_last_error = e.what();
        return CAESAR_E_PARSE;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return CAESAR_E_INTERNAL;
    } catch (...) {
        g_last_error = "unknown error";
        return CAESAR_E_INTERNAL;
    }
}

char* dup_string(const std::string& s) {
    char* p = static_cast<char*>(std::malloc(s.size() + 1));
    if (!p) throw std::bad_alloc();
    std::memcpy(p, s.c_str(), s.size() + 1);
    return p;
}

std::string str(const char* s) { return s ? std::string(s) : std::string(); }

void require(bool ok, const char* what) {
    if (!ok) throw caesar::Error(caesar::ErrorCode::InvalidArgument, what);
}

caesar::PipelineOptions options(uint64_t seed) {
    caesar::PipelineOptions o;
    o.seed = seed;
    o.retry = g_retry;
    return o;
}

}  // namespace

extern "C" {

const char* caesar_version(void) { return "0.1.0"; }

const char* caesar_last_error(void) { return g_last_error.c_str(); }

const char* caesar_status_string(caesar_status status) {
    switch (status) {
        case CAESAR_OK: return "ok";
        case CAESAR_E_INVALID_ARGUMENT: return "invalid argument";
        case CAESAR_E_PARSE: return "parse error";
        case CAESAR_E_VALIDATION: return "validation error";
        case CAESAR_E_IO: return "i/o error";
        case CAESAR_E_PROVIDER: return "provider error";
        case CAESAR_E_EMPTY_KB: return "knowledge base empty";
        case CAESAR_E_EMPTY_SAMPLE: return "empty sample";
        case CAESAR_E_UNDEFINED: return "undefined";
        case CAESAR_E_UNSUPPORTED: return "unsupported";
        case CAESAR_E_INTEGRITY: return "integrity error";
        case CAESAR_E_INTERNAL: return "internal error";
    }
    return "unknown status";
}

void caesar_string_free(char* s) { std::free(s); }

caesar_status caesar_config_default(caesar_config** out) {
    return guarded([&] {
        require(out, "out is null");
        *out = new caesar_config{};
    });
}

caesar_status caesar_config_load(const char* json_text, caesar_config** out) {
    return guarded([&] {
        require(out, "out is null");
        auto cfg = caesar::load_config(str(json_text), caesar::process_env());
        *out = new caesar_config{std::move(cfg)};
    });
}

caesar_status caesar_config_load_file(const char* path, caesar_config** out) {
    return guarded([&] {
        require(out && path, "path and out are required");
        auto cfg = caesar::load_config_file(path, caesar::process_env());
        *out = new caesar_config{std::move(cfg)};
    });
}

caesar_status caesar_config_set(caesar_config* config, const char* key, const char* json_value) {
    return guarded([&] {
        require(config && key && json_value, "config, key and value are required");
        auto v = nlohmann::json::parse(json_value, nullptr, false);
        if (v.is_discarded()) v = std::string(json_value);
        caesar::Config next = config->value;
        caesar::set_config_value(next, key, v);
        caesar::validate(next);
        config->value = std::move(next);
    });
}

caesar_status caesar_config_get(const caesar_config* config, const char* key, char** out_json) {
    return guarded([&] {
        require(config && key && out_json, "config, key and out are required");
        *out_json = dup_string(caesar::get_config_value(config->value, key).dump());
    });
}

caesar_status caesar_config_to_json(const caesar_config* config, char** out_json) {
    return guarded([&] {
        require(config && out_json, "config and out are required");
        *out_json = dup_string(caesar::to_json(config->value).dump(2));
    });
}

void caesar_config_free(caesar_config* config) { delete config; }

caesar_status caesar_providers_create(const caesar_config* config, const char* mode, const char* corpus_manifest,
                                      const char* search_fixture, const char* llm_fixture, caesar_providers** out) {
    return guarded([&] {
        require(config && out, "config and out are required");
        caesar::ProviderSpec spec;
        spec.mode = caesar::run_mode_from_string(mode ? mode : "offline");
        spec.corpus_manifest = str(corpus_manifest);
        spec.search_fixture = str(search_fixture);
        spec.llm_fixture = str(llm_fixture);
        spec.env = caesar::process_env();
        *out = new caesar_providers{caesar::make_providers(spec, config->value)};
    });
}

caesar_status caesar_providers_create_llm(const char* llm_fixture, caesar_providers** out) {
    return guarded([&] {
        require(out, "out is null");
        *out = new caesar_providers{caesar::make_llm_providers(str(llm_fixture), caesar::process_env())};
    });
}

void caesar_providers_free(caesar_providers* providers) { delete providers; }

int caesar_outcome_exit_code(const caesar_outcome* outcome) { return outcome ? outcome->value.exit_code() : 2; }

size_t caesar_outcome_diagnostic_count(const caesar_outcome* outcome) {
    return outcome ? outcome->value.diagnostics.size() : 0;
}

const char* caesar_outcome_diagnostic(const caesar_outcome* outcome, size_t index) {
    if (!outcome || index >= outcome->value.diagnostics.size()) return nullptr;
    return outcome->value.diagnostics[index].c_str();
}

void caesar_outcome_free(caesar_outcome* outcome) { delete outcome; }

caesar_status caesar_set_retry(int max_attempts, int initial_backoff_ms) {
    return guarded([&] {
        require(max_attempts >= 1 && initial_backoff_ms >= 0, "retry settings out of range");
        g_retry.max_attempts = max_attempts;
        g_retry.initial_backoff = std::chrono::milliseconds(initial_backoff_ms);
    });
}

caesar_status caesar_run(const caesar_config* config, caesar_providers* providers, const char* out_dir, uint64_t seed,
                         caesar_outcome** out) {
    return guarded([&] {
        require(config && providers && out_dir && out, "config, providers, out_dir and out are required");
        *out = new caesar_outcome{caesar::run_pipeline(config->value, providers->value, out_dir, options(seed))};
    });
}

caesar_status caesar_explore(const caesar_config* config, caesar_providers* providers, const char* out_dir,
                             uint64_t seed, caesar_outcome** out) {
    return guarded([&] {
        require(config && providers && out_dir && out, "config, providers, out_dir and out are required");
        *out = new caesar_outcome{caesar::run_explore(config->value, providers->value, out_dir, options(seed))};
    });
}

caesar_status caesar_synthesize(const caesar_config* config, caesar_providers* providers, const char* kb_source,
                                const char* out_dir, uint64_t seed, caesar_outcome** out) {
    return guarded([&] {
        require(config && providers && kb_source && out_dir && out, "missing argument");
        require(providers->value.llm != nullptr, "providers have no LLM");
        *out = new caesar_outcome{
            caesar::run_synthesize(config->value, *providers->value.llm, kb_source, out_dir, options(seed))};
    });
}

caesar_status caesar_judge(const caesar_config* config, const char* answers, const char* panel, const char* query,
                           int trials, uint64_t seed, const char* dimension, const char* out_dir, caesar_outcome** out) {
    return guarded([&] {
        require(config && answers && panel && out_dir && out, "missing argument");
        require(trials >= 1, "trials must be >= 1");
        caesar::JudgeRequest req;
        req.answers = answers;
        req.panel = panel;
        req.query = str(query);
        req.trials = trials;
        req.seed = seed;
        if (dimension) req.bias_dimension = dimension;
        req.env = caesar::process_env();
        *out = new caesar_outcome{caesar::run_judge(config->value, req, out_dir, g_retry)};
    });
}

caesar_status caesar_graph_stats(const char* run_dir, const char* out_file, caesar_outcome** out) {
    return guarded([&] {
        require(run_dir && out, "run_dir and out are required");
        *out = new caesar_outcome{caesar::run_graph_stats(run_dir, str(out_file))};
    });
}

caesar_status caesar_graph_export(const char* run_dir, const char* format, const char* out_file, caesar_outcome** out) {
    return guarded([&] {
        require(run_dir && format && out, "run_dir, format and out are required");
        *out = new caesar_outcome{caesar::run_graph_export(run_dir, format, str(out_file))};
    });
}

caesar_status caesar_graph_embeddings(const char* run_dir, const char* out_file, caesar_outcome** out) {
    return guarded([&] {
        require(run_dir && out, "run_dir and out are required");
        *out = new caesar_outcome{caesar::run_graph_embeddings(run_dir, str(out_file))};
    });
}

caesar_status caesar_mann_whitney(const double* a, size_t n, const double* b, size_t m, caesar_alternative alternative,
                                  caesar_mwu_result* out) {
    return guarded([&] {
        require(out && (n == 0 || a) && (m == 0 || b), "missing argument");
        caesar::Alternative alt = alternative == CAESAR_LESS      ? caesar::Alternative::Less
                                  : alternative == CAESAR_GREATER ? caesar::Alternative::Greater
                                                                  : caesar::Alternative::TwoSided;
        auto r = caesar::mann_whitney_u({a, n}, {b, m}, alt);
        out->u = r.u;
        out->u_b = r.u_b;
        out->p_value = r.p_value;
        out->z = r.z;
        out->exact = r.method == caesar::MwuMethod::Exact ? 1 : 0;
    });
}

caesar_status caesar_format_bias(double bias, char** out) {
    return guarded([&] {
        require(out, "out is null");
        *out = dup_string(caesar::format_bias(bias));
    });
}

}  // extern "C"
