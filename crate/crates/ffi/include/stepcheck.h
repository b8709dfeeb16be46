#ifndef STEPCHECK_H
#define STEPCHECK_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stdint.h>

typedef enum StepcheckStatus {
  STEPCHECK_STATUS_OK = 0,
  STEPCHECK_STATUS_NULL_ARGUMENT = 1,
  STEPCHECK_STATUS_INVALID_UTF8 = 2,
  STEPCHECK_STATUS_INVALID_ARGUMENT = 3,
  STEPCHECK_STATUS_PARSE_ERROR = 4,
  // The claim could not be verified (gateway, evidence or parse failure).
  STEPCHECK_STATUS_ABORTED = 5,
  STEPCHECK_STATUS_PANIC = 6,
} StepcheckStatus;

typedef enum StepcheckVerdict {
  STEPCHECK_VERDICT_SUPPORTED = 1,
  STEPCHECK_VERDICT_REFUTED = 2,
} StepcheckVerdict;

// Opaque run configuration.
typedef struct StepcheckConfig StepcheckConfig;

// Opaque verifier.
typedef struct StepcheckEngine StepcheckEngine;

typedef struct StepcheckMetrics {
  double precision;
  double recall;
  double f1;
} StepcheckMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or NULL. The pointer
// stays valid until the next stepcheck call on the same thread.
const char *stepcheck_last_error(void);

// # Safety
// `s` must be NULL or a string returned by this library, freed once.
void stepcheck_string_free(char *s);

// Library version as a static string.
const char *stepcheck_version(void);

// Default configuration. Evidence is not cached until a cache directory
// is set.
struct StepcheckConfig *stepcheck_config_new(void);

// Configuration from a JSON object; missing fields take their defaults.
//
// # Safety
// `json` must be a valid C string and `out` a writable pointer.
enum StepcheckStatus stepcheck_config_from_json(const char *json, struct StepcheckConfig **out);

// # Safety
// `config` must be NULL or a handle from this library, freed once.
void stepcheck_config_free(struct StepcheckConfig *config);

// `source` is "web" or "internal".
//
// # Safety
// Pointers must be valid.
enum StepcheckStatus stepcheck_config_set_source(struct StepcheckConfig *config,
                                                 const char *source);

// # Safety
// `config` must be a valid handle.
enum StepcheckStatus stepcheck_config_set_predicate_mode(struct StepcheckConfig *config,
                                                         bool enabled);

// # Safety
// `config` must be a valid handle.
enum StepcheckStatus stepcheck_config_set_max_questions(struct StepcheckConfig *config, uint32_t n);

// # Safety
// Pointers must be valid.
enum StepcheckStatus stepcheck_config_set_model(struct StepcheckConfig *config, const char *model);

// Enables the on-disk evidence cache in `dir`.
//
// # Safety
// Pointers must be valid.
enum StepcheckStatus stepcheck_config_set_cache_dir(struct StepcheckConfig *config,
                                                    const char *dir);

// Hex fingerprint of the configuration; free with `stepcheck_string_free`.
//
// # Safety
// Pointers must be valid.
enum StepcheckStatus stepcheck_config_fingerprint(const struct StepcheckConfig *config, char **out);

// Engine replaying scripted model output. `script_json` is either an array
// of completions shared by all claims or an object mapping claim ids to
// arrays. `search_json` maps questions to result lists; NULL means no
// search is available.
//
// # Safety
// `config` and `script_json` must be valid; `search_json` may be NULL;
// `out` must be writable.
enum StepcheckStatus stepcheck_engine_new_scripted(const struct StepcheckConfig *config,
                                                   const char *script_json,
                                                   const char *search_json,
                                                   struct StepcheckEngine **out);

// Engine talking to an OpenAI-compatible endpoint (configured through the
// same environment variables as the command line tool) with web search.
//
// # Safety
// `config` must be valid and `out` writable.
enum StepcheckStatus stepcheck_engine_new_http(const struct StepcheckConfig *config,
                                               struct StepcheckEngine **out);

// # Safety
// `engine` must be NULL or a handle from this library, freed once.
void stepcheck_engine_free(struct StepcheckEngine *engine);

// Verifies one claim and writes its trace as a JSON object to `out`.
// Returns `STEPCHECK_ABORTED` when the claim could not be verified.
//
// # Safety
// `engine`, `claim_id` and `claim_text` must be valid; `out` writable.
enum StepcheckStatus stepcheck_engine_verify(const struct StepcheckEngine *engine,
                                             const char *claim_id,
                                             const char *claim_text,
                                             char **out);

// Parses `Verb(arg, ...) ::: instruction` into a JSON object with `verb`,
// `arguments` and optional `instruction`.
//
// # Safety
// `text` must be valid and `out` writable.
enum StepcheckStatus stepcheck_parse_predicate(const char *text, char **out);

// Extracts the verdict label and explanation from reasoner output.
// `explanation` may be NULL when not wanted.
//
// # Safety
// `text` must be valid and `verdict` writable.
enum StepcheckStatus stepcheck_parse_verdict(const char *text,
                                             enum StepcheckVerdict *verdict,
                                             char **explanation);

// Precision, recall and F1 for the positive class; zero denominators give 0.
//
// # Safety
// `out` must be writable.
enum StepcheckStatus stepcheck_metrics(uint64_t tp,
                                       uint64_t fp,
                                       uint64_t fn_,
                                       uint64_t tn,
                                       struct StepcheckMetrics *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STEPCHECK_H */
