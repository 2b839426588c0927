/* C interface to the caesar research engine. All handles are opaque; every
 * call returns a caesar_status, and on failure caesar_last_error() describes
 * the problem (per thread, valid until the next call on that thread). */
#ifndef CAESAR_CAESAR_H
#define CAESAR_CAESAR_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(CAESAR_BUILDING_LIBRARY)
#    define CAESAR_API __declspec(dllexport)
#  else
#    define CAESAR_API __declspec(dllimport)
#  endif
#else
#  define CAESAR_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum caesar_status {
    CAESAR_OK = 0,
    CAESAR_E_INVALID_ARGUMENT = 1,
    CAESAR_E_PARSE = 2,
    CAESAR_E_VALIDATION = 3,
    CAESAR_E_IO = 4,
    CAESAR_E_PROVIDER = 5,
    CAESAR_E_EMPTY_KB = 6,
    CAESAR_E_EMPTY_SAMPLE = 7,
    CAESAR_E_UNDEFINED = 8,
    CAESAR_E_UNSUPPORTED = 9,
    CAESAR_E_INTEGRITY = 10,
    CAESAR_E_INTERNAL = 99
} caesar_status;

typedef enum caesar_alternative {
    CAESAR_TWO_SIDED = 0,
    CAESAR_LESS = 1,
    CAESAR_GREATER = 2
} caesar_alternative;

typedef struct caesar_config caesar_config;
typedef struct caesar_providers caesar_providers;
typedef struct caesar_outcome caesar_outcome;

typedef struct caesar_mwu_result {
    double u;
    double u_b;
    double p_value;
    double z;
    int exact; /* 1 when the exact null distribution was used */
} caesar_mwu_result;

CAESAR_API const char* caesar_version(void);
CAESAR_API const char* caesar_last_error(void);
CAESAR_API const char* caesar_status_string(caesar_status status);
CAESAR_API void caesar_string_free(char* s);

/* Configuration. Loading applies CAESAR_* environment overrides and validates. */
CAESAR_API caesar_status caesar_config_default(caesar_config** out);
CAESAR_API caesar_status caesar_config_load(const char* json_text, caesar_config** out);
CAESAR_API caesar_status caesar_config_load_file(const char* path, caesar_config** out);
/* `json_value` is a JSON literal, e.g. "25", "0.5", "\"high\"". Re-validates. */
CAESAR_API caesar_status caesar_config_set(caesar_config* config, const char* key, const char* json_value);
CAESAR_API caesar_status caesar_config_get(const caesar_config* config, const char* key, char** out_json);
CAESAR_API caesar_status caesar_config_to_json(const caesar_config* config, char** out_json);
CAESAR_API void caesar_config_free(caesar_config* config);

/* Providers. mode is "offline" or "live". Offline needs corpus_manifest; a NULL
 * llm_fixture selects the OpenAI-compatible endpoint configured in the environment. */
CAESAR_API caesar_status caesar_providers_create(const caesar_config* config, const char* mode,
                                                 const char* corpus_manifest, const char* search_fixture,
                                                 const char* llm_fixture, caesar_providers** out);
/* LLM-only providers, sufficient for caesar_synthesize and nothing else. */
CAESAR_API caesar_status caesar_providers_create_llm(const char* llm_fixture, caesar_providers** out);
CAESAR_API void caesar_providers_free(caesar_providers* providers);

/* Outcome of a command: exit code 0 complete, 1 degraded, 2 aborted. */
CAESAR_API int caesar_outcome_exit_code(const caesar_outcome* outcome);
CAESAR_API size_t caesar_outcome_diagnostic_count(const caesar_outcome* outcome);
CAESAR_API const char* caesar_outcome_diagnostic(const caesar_outcome* outcome, size_t index);
CAESAR_API void caesar_outcome_free(caesar_outcome* outcome);

/* Retry backoff for transient provider failures, in milliseconds (default 1000). */
CAESAR_API caesar_status caesar_set_retry(int max_attempts, int initial_backoff_ms);

CAESAR_API caesar_status caesar_run(const caesar_config* config, caesar_providers* providers, const char* out_dir,
                                    uint64_t seed, caesar_outcome** out);
CAESAR_API caesar_status caesar_explore(const caesar_config* config, caesar_providers* providers,
                                        const char* out_dir, uint64_t seed, caesar_outcome** out);
/* kb_source: a kb.jsonl file or a run directory holding one. */
CAESAR_API caesar_status caesar_synthesize(const caesar_config* config, caesar_providers* providers,
                                           const char* kb_source, const char* out_dir, uint64_t seed,
                                           caesar_outcome** out);
/* answers: directory of per-agent text files or a JSON batch; panel: JSON panel file.
 * query and dimension may be NULL. */
CAESAR_API caesar_status caesar_judge(const caesar_config* config, const char* answers, const char* panel,
                                      const char* query, int trials, uint64_t seed, const char* dimension,
                                      const char* out_dir, caesar_outcome** out);

CAESAR_API caesar_status caesar_graph_stats(const char* run_dir, const char* out_file, caesar_outcome** out);
/* format: "dot" or "graphml" */
CAESAR_API caesar_status caesar_graph_export(const char* run_dir, const char* format, const char* out_file,
                                             caesar_outcome** out);
CAESAR_API caesar_status caesar_graph_embeddings(const char* run_dir, const char* out_file, caesar_outcome** out);

CAESAR_API caesar_status caesar_mann_whitney(const double* a, size_t n, const double* b, size_t m,
                                             caesar_alternative alternative, caesar_mwu_result* out);
/* Formats a bias value as "+2.47". Free with caesar_string_free. */
CAESAR_API caesar_status caesar_format_bias(double bias, char** out);

#ifdef __cplusplus
}
#endif

#endif /* CAESAR_CAESAR_H */
