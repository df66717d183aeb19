/* C interface to the coiner library. Strings are UTF-8. Every char** output
 * is allocated by the library and must be released with coiner_string_free.
 * Options are JSON objects; NULL or "" means all defaults. */
#ifndef COINER_COINER_H
#define COINER_COINER_H

#ifdef __cplusplus
extern "C" {
#endif

#if defined(COINER_BUILDING_LIBRARY)
#define COINER_API __attribute__((visibility("default")))
#else
#define COINER_API
#endif

typedef enum coiner_status {
  COINER_OK = 0,
  COINER_E_ARGUMENT = 1,
  COINER_E_PARSE = 2,
  COINER_E_INTEGRITY = 3,
  COINER_E_LABEL = 4,
  COINER_E_IO = 5,
  COINER_E_FETCH = 6,
  COINER_E_CONFIG = 7,
  COINER_E_DEGENERATE_TRAINING = 8,
  COINER_E_TRAINING_DIVERGED = 9,
  COINER_E_TRAINING_INCOMPLETE = 10,
  COINER_E_VALIDATION = 11,
  COINER_E_PERSISTENCE = 12,
  COINER_E_SERVICE_UNAVAILABLE = 13,
  COINER_E_SEARCH_FAILED = 14,
  COINER_E_INTERNAL = 99
} coiner_status;

typedef struct coiner_model coiner_model;
typedef struct coiner_server coiner_server;

COINER_API const char* coiner_version(void);
COINER_API const char* coiner_status_name(coiner_status status);
/* Message of the last failed call on this thread; "" if none. */
COINER_API const char* coiner_last_error(void);
COINER_API void coiner_string_free(char* s);

/* source: local .html/.htm/.txt path or http(s) URL.
 * options: {"api", "code_ratio", "min_tokens", "filter", "timeout_ms", "user_agent"};
 * "filter": false keeps every candidate.
 * summary: {"source", "api", "kept", "dropped", "total"}. Any output may be NULL. */
COINER_API coiner_status coiner_ingest(const char* source, const char* options_json,
                                       char** skeleton_jsonl, char** drop_log_jsonl,
                                       char** summary_json);

/* options: {"granularity": "seven"|"two", "features": {"nmax", "min_df",
 * "use_pattern_lexicons"}, "family", "params": {...}, "input", "seed",
 * "lexicons_dir", "stopwords_file"}. */
COINER_API coiner_status coiner_train(const char* corpus_path, const char* options_json,
                                      coiner_model** out);
COINER_API coiner_status coiner_model_load(const char* path, coiner_model** out);
COINER_API coiner_status coiner_model_save(const coiner_model* model, const char* path);
COINER_API void coiner_model_free(coiner_model* model);
/* Provenance and label names. */
COINER_API coiner_status coiner_model_info(const coiner_model* model, char** info_json);
/* classes_json: JSON array of label names, or NULL for all.
 * Output: {"spans": [{"text", "start", "end", "byte_start", "byte_end", "class", "confidence"}]}. */
COINER_API coiner_status coiner_model_classify(const coiner_model* model, const char* text,
                                               const char* classes_json, char** spans_json);
/* options: {"classes": [...], "source", "format": "json"|"html"|"plain"}. */
COINER_API coiner_status coiner_model_report(const coiner_model* model, const char* text,
                                             const char* options_json, char** report);

/* options: training options plus {"k", "threads", "fit_features_on_full_corpus"}.
 * table may be NULL. */
COINER_API coiner_status coiner_evaluate(const char* corpus_path, const char* options_json,
                                         char** report_json, char** table);
/* grid file: {"family", "grid": {name: [values]}}. options as coiner_evaluate;
 * family/params act as the base spec. result_json is also filled when every
 * trial fails (COINER_E_SEARCH_FAILED). */
COINER_API coiner_status coiner_tune(const char* corpus_path, const char* grid_path,
                                     const char* options_json, char** result_json);
/* options: {"per_class", "words_per_sentence", "vocabulary_per_class",
 * "noise_vocabulary", "noise_fraction", "seed"}. */
COINER_API coiner_status coiner_synth(const char* options_json, char** corpus_jsonl);
/* options: {"granularity"}. Output: {"size", "fingerprint", "classes": [...]}. */
COINER_API coiner_status coiner_corpus_stats(const char* corpus_path, const char* options_json,
                                             char** stats_json);

/* options: {"host", "port", "model", "feedback", "cors_origins": [...],
 * "fetch_proxy", "use_environment"}. Loads the model and binds the socket. */
COINER_API coiner_status coiner_server_create(const char* options_json, coiner_server** out);
/* Blocks until coiner_server_stop is called from another thread. */
COINER_API coiner_status coiner_server_run(coiner_server* server);
COINER_API coiner_status coiner_server_stop(coiner_server* server);
COINER_API int coiner_server_port(const coiner_server* server);
COINER_API void coiner_server_free(coiner_server* server);

#ifdef __cplusplus
}
#endif

#endif
