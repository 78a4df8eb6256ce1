#ifndef SOLAR_H
#define SOLAR_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SolarStatus {
  SOLAR_STATUS_OK = 0,
  SOLAR_STATUS_NULL_POINTER = 1,
  SOLAR_STATUS_INVALID_UTF8 = 2,
  SOLAR_STATUS_INVALID_INPUT = 3,
  SOLAR_STATUS_UNKNOWN_VERDICT = 4,
  SOLAR_STATUS_PARSE = 5,
  SOLAR_STATUS_IO = 6,
  SOLAR_STATUS_JSON = 7,
  SOLAR_STATUS_EMPTY = 8,
  SOLAR_STATUS_DIMENSION_MISMATCH = 9,
  SOLAR_STATUS_DEGENERATE = 10,
  SOLAR_STATUS_MANIFEST_MISMATCH = 11,
  SOLAR_STATUS_MISSING_DATA = 12,
  SOLAR_STATUS_PROVIDER = 13,
  SOLAR_STATUS_PANIC = 14,
  SOLAR_STATUS_OTHER = 15,
} SolarStatus;

// Binary judgment. `None` stands for a verdict that carries no judgment.
typedef enum SolarJudgment {
  SOLAR_JUDGMENT_NONE = -1,
  SOLAR_JUDGMENT_ACCEPTABLE = 0,
  SOLAR_JUDGMENT_UNACCEPTABLE = 1,
} SolarJudgment;

typedef enum SolarSpace {
  SOLAR_SPACE_SITUATION = 0,
  SOLAR_SPACE_VALUE = 1,
  SOLAR_SPACE_SCHWARTZ = 2,
} SolarSpace;

// Opaque corpus handle.
typedef struct SolarCorpus SolarCorpus;

// Opaque per-redditor history handle.
typedef struct SolarHistory SolarHistory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer is
// valid until the next call into this library on the same thread.
const char *solar_last_error(void);

// Library version as a static string.
const char *solar_version(void);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not have been freed.
void solar_string_free(char *s);

// Maps a verdict code such as `"NTA"` to a judgment.
//
// # Safety
// `code` must be a nul-terminated string and `out` writable.
enum SolarStatus solar_map_verdict(const char *code, enum SolarJudgment *out);

// Parses a model completion into a judgment.
//
// # Safety
// `completion` must be a nul-terminated string and `out` writable.
enum SolarStatus solar_parse_judgment(const char *completion, enum SolarJudgment *out);

// Macro F1 of `len` predictions against gold labels.
//
// # Safety
// `predicted` and `gold` must point to `len` readable values; `out` writable.
enum SolarStatus solar_macro_f1(const enum SolarJudgment *predicted,
                                const enum SolarJudgment *gold,
                                size_t len,
                                double *out);

// Reads a newline-delimited JSON corpus. Malformed lines are skipped; their
// count is written to `issues` when it is not null.
//
// # Safety
// `path` must be a nul-terminated string, `out` writable, `issues` null or writable.
enum SolarStatus solar_corpus_open(const char *path, struct SolarCorpus **out, size_t *issues);

// # Safety
// `corpus` must be null or a handle from [`solar_corpus_open`] not yet freed.
void solar_corpus_free(struct SolarCorpus *corpus);

// Number of instances in the corpus.
//
// # Safety
// `corpus` must be a live handle and `out` writable.
enum SolarStatus solar_corpus_len(const struct SolarCorpus *corpus, size_t *out);

// Corpus statistics as a JSON string, listing the `skewed_k` most skewed redditors.
//
// # Safety
// `corpus` must be a live handle and `out` writable.
enum SolarStatus solar_corpus_stats_json(const struct SolarCorpus *corpus,
                                         size_t skewed_k,
                                         char **out);

// Loads a history written by `solar index`. Fails with
// `SOLAR_STATUS_MANIFEST_MISMATCH` if it was embedded with another model.
//
// # Safety
// `path` and `model` must be nul-terminated strings and `out` writable.
enum SolarStatus solar_history_load(const char *path, const char *model, struct SolarHistory **out);

// # Safety
// `history` must be null or a handle from [`solar_history_load`] not yet freed.
void solar_history_free(struct SolarHistory *history);

// Number of entries and vector dimension of a history.
//
// # Safety
// `history` must be a live handle; `len` and `dim` writable.
enum SolarStatus solar_history_shape(const struct SolarHistory *history, size_t *len, size_t *dim);

// Exact top-`k` search. Writes a JSON array of
// `{"instance_id", "situation_id", "distance"}` objects, nearest first.
// Entries of situation `exclude` are skipped; pass null to keep all.
//
// # Safety
// `history` must be a live handle, `query` must point to `dim` readable
// doubles, `exclude` null or a nul-terminated string, `out` writable.
enum SolarStatus solar_history_search_json(const struct SolarHistory *history,
                                           enum SolarSpace space,
                                           const double *query,
                                           size_t dim,
                                           size_t k,
                                           const char *exclude,
                                           char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SOLAR_H */
