#ifndef MADFACT_MADFACT_H
#define MADFACT_MADFACT_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(MADFACT_BUILDING_LIBRARY)
#define MADFACT_API __declspec(dllexport)
#else
#define MADFACT_API __declspec(dllimport)
#endif
#else
#define MADFACT_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef struct madfact_context madfact_context;

typedef enum madfact_status {
  MADFACT_OK = 0,
  MADFACT_ERR_INVALID_ARGUMENT = 1,
  MADFACT_ERR_INVALID_CONFIG = 2,
  MADFACT_ERR_BACKEND_UNAVAILABLE = 3,
  MADFACT_ERR_SCRIPT_EXHAUSTED = 4,
  MADFACT_ERR_SEARCH_UNAVAILABLE = 5,
  MADFACT_ERR_EMPTY_QUERY = 6,
  MADFACT_ERR_CACHE_IO = 7,
  MADFACT_ERR_MALFORMED_CLERK_OUTPUT = 8,
  MADFACT_ERR_MALFORMED_EVALUATOR_OUTPUT = 9,
  MADFACT_ERR_SEARCH_DISABLED = 10,
  MADFACT_ERR_EMPTY_JURY = 11,
  MADFACT_ERR_PYRAMID_MISMATCH = 12,
  MADFACT_ERR_EMPTY_DATASET = 13,
  MADFACT_ERR_INVALID_WEIGHT_RULE = 14,
  MADFACT_ERR_MATCHER_UNAVAILABLE = 15,
  MADFACT_ERR_LENGTH_MISMATCH = 16,
  MADFACT_ERR_EMPTY_GOLDEN_SET = 17,
  MADFACT_ERR_FILE_NOT_FOUND = 18,
  MADFACT_ERR_PARSE = 19,
  MADFACT_ERR_INSUFFICIENT_TRUE = 20,
  MADFACT_ERR_EMPTY_INPUT = 21,
  MADFACT_ERR_IO = 22,
  MADFACT_ERR_INTERNAL = 99
} madfact_status;

/* Error classes double as CLI exit codes. */
typedef enum madfact_error_class {
  MADFACT_CLASS_NONE = 0,
  MADFACT_CLASS_CONFIG = 1,
  MADFACT_CLASS_IO = 2,
  MADFACT_CLASS_PROVIDER = 3,
  MADFACT_CLASS_USAGE = 4
} madfact_error_class;

typedef struct madfact_scores {
  double prec_w;
  double recall_w;
  double f1;
  size_t count_true;
  size_t count_false;
  int degenerate;
} madfact_scores;

MADFACT_API const char* madfact_version(void);
MADFACT_API const char* madfact_status_name(madfact_status status);
MADFACT_API madfact_error_class madfact_status_class(madfact_status status);

/* Message of the last failed call on this thread; "" if none. */
MADFACT_API const char* madfact_last_error(void);

MADFACT_API void madfact_string_free(char* s);

/* Context lifecycle. A new context holds the default config and no providers. */
MADFACT_API madfact_status madfact_context_new(madfact_context** out);
MADFACT_API void madfact_context_free(madfact_context* ctx);

/* Configuration. */
MADFACT_API madfact_status madfact_load_config(madfact_context* ctx, const char* path);
MADFACT_API madfact_status madfact_set_config_json(madfact_context* ctx, const char* json);
MADFACT_API madfact_status madfact_get_config_json(madfact_context* ctx, char** out_json);
MADFACT_API madfact_status madfact_set_rule(madfact_context* ctx, const char* rule);
MADFACT_API madfact_status madfact_set_ablation(madfact_context* ctx, const char* variant);
MADFACT_API madfact_status madfact_set_prompt_dir(madfact_context* ctx, const char* dir);
MADFACT_API madfact_status madfact_set_jobs(madfact_context* ctx, size_t jobs);
MADFACT_API madfact_status madfact_set_seed(madfact_context* ctx, uint64_t seed);
MADFACT_API madfact_status madfact_set_frozen_clock(madfact_context* ctx, int enabled);

/* Providers: scripted fixtures (chat.json, search.json) or live MADFACT_* environment. */
MADFACT_API madfact_status madfact_use_mock(madfact_context* ctx, const char* fixtures_dir);
MADFACT_API madfact_status madfact_use_environment(madfact_context* ctx);

MADFACT_API size_t madfact_upstream_chat_calls(const madfact_context* ctx);
MADFACT_API size_t madfact_upstream_search_calls(const madfact_context* ctx);

/* Batch commands. Each writes its outputs under out_dir and, when out_summary is
   non-null, returns a JSON summary to be released with madfact_string_free. */
MADFACT_API madfact_status madfact_verify_claims(madfact_context* ctx, const char* claims_path,
                                                 const char* out_dir, char** out_summary);
MADFACT_API madfact_status madfact_verify_response(madfact_context* ctx, const char* response_path,
                                                   const char* out_dir, char** out_summary);
MADFACT_API madfact_status madfact_build_pyramids(madfact_context* ctx, const char* questions_path,
                                                  const char* const* experts, size_t n_experts,
                                                  const char* matcher, const char* out_dir,
                                                  char** out_summary);
MADFACT_API madfact_status madfact_score(madfact_context* ctx, const char* pyramids_dir,
                                         const char* decisions_path, const double* gammas,
                                         size_t n_gammas, const char* matcher, const char* out_dir,
                                         char** out_summary);
/* n_true < 0 disables stratified sampling; stop_after < 0 runs every pending claim. */
MADFACT_API madfact_status madfact_bench(madfact_context* ctx, const char* dataset_path, int64_t n_true,
                                         int64_t stop_after, const char* out_dir, char** out_summary);
MADFACT_API madfact_status madfact_ablate(madfact_context* ctx, const char* dataset_path,
                                          const char* const* variants, size_t n_variants,
                                          int64_t n_true, const char* out_dir, char** out_summary);

/* Stateless helpers. Verdicts are 1 for TRUE and 0 for FALSE. */
MADFACT_API madfact_status madfact_adjudicate(const int* verdicts, const int* agent_indices, size_t n,
                                              int* out_verdict, int* out_tie_broken);
MADFACT_API madfact_status madfact_weighted_scores(const double* weights, const int* verdicts, size_t n,
                                                   double golden_mass, double gamma,
                                                   madfact_scores* out);

#ifdef __cplusplus
}
#endif

#endif /* MADFACT_MADFACT_H */
