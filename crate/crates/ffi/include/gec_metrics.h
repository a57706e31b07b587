#ifndef GEC_METRICS_H
#define GEC_METRICS_H

/* Generated by cbindgen from the gec-metrics-ffi crate. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  GECM_STATUS_OK = 0,
  GECM_STATUS_NULL_POINTER = 1,
  GECM_STATUS_INVALID_UTF8 = 2,
  GECM_STATUS_INVALID_ARGUMENT = 3,
  GECM_STATUS_LENGTH_MISMATCH = 4,
  GECM_STATUS_CONFIG = 5,
  GECM_STATUS_INVALID_DATA = 6,
  GECM_STATUS_DEGENERATE = 7,
  GECM_STATUS_IO = 8,
  GECM_STATUS_EXTERNAL = 9,
  GECM_STATUS_MISSING = 10,
  GECM_STATUS_PANIC = 11,
} GecmStatus;

/**
 * Parallel sentence lists collected from C.
 */
typedef struct GecmCorpus GecmCorpus;

typedef struct GecmResult GecmResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, a static NUL-terminated string.
 */
const char *gecm_version(void);

/**
 * Message of the last failed call on this thread, or NULL. Valid until the
 * next call into this library from the same thread.
 */
const char *gecm_last_error(void);

GecmCorpus *gecm_corpus_new(void);

/**
 * Appends one sentence. Every push must pass the same number of references.
 *
 * # Safety
 * `corpus` must come from `gecm_corpus_new`; strings must be NUL-terminated
 * and `refs` must point to `n_refs` of them (or be NULL when `n_refs` is 0).
 */
GecmStatus gecm_corpus_push(GecmCorpus *corpus,
                            const char *source,
                            const char *hypothesis,
                            const char *const *refs,
                            size_t n_refs);

/**
 * # Safety
 * `corpus` must be NULL or a live handle.
 */
size_t gecm_corpus_len(const GecmCorpus *corpus);

/**
 * # Safety
 * `corpus` must be NULL or a handle not yet freed.
 */
void gecm_corpus_free(GecmCorpus *corpus);

/**
 * Scores the corpus with `metric` (e.g. "errant"). `config_yaml` may be NULL
 * for defaults. On success `*out` receives a result handle.
 *
 * # Safety
 * Pointers must be valid; `out` must be writable.
 */
GecmStatus gecm_score(const GecmCorpus *corpus,
                      const char *metric,
                      const char *config_yaml,
                      GecmResult **out);

/**
 * Corpus score, or NaN when the metric produced none or `result` is NULL.
 *
 * # Safety
 * `result` must be NULL or a live handle.
 */
double gecm_result_corpus_score(const GecmResult *result);

/**
 * # Safety
 * `result` must be NULL or a live handle.
 */
size_t gecm_result_len(const GecmResult *result);

/**
 * Sentence score `index`; `GECM_STATUS_MISSING` when the metric left it out.
 *
 * # Safety
 * `result` must be a live handle and `out` writable.
 */
GecmStatus gecm_result_sentence_score(const GecmResult *result, size_t index, double *out);

/**
 * # Safety
 * `result` must be NULL or a handle not yet freed.
 */
void gecm_result_free(GecmResult *result);

/**
 * # Safety
 * `out` must be writable.
 */
GecmStatus gecm_f_beta(double precision, double recall, double beta, double *out);

/**
 * # Safety
 * `x` and `y` must point to `n` doubles; `out` must be writable.
 */
GecmStatus gecm_pearson(const double *x, const double *y, size_t n, double *out);

/**
 * # Safety
 * `x` and `y` must point to `n` doubles; `out` must be writable.
 */
GecmStatus gecm_spearman(const double *x, const double *y, size_t n, double *out);

/**
 * Meta-evaluates the config's metric on a dataset directory and returns the
 * report (with window and pairwise rows) as JSON in `*out_json`.
 * `aggregation` is "average", "expected_wins" or "trueskill"; NULL means
 * "average".
 *
 * # Safety
 * Strings must be NUL-terminated or NULL where allowed; `out_json` writable.
 */
GecmStatus gecm_meta_eval_json(const char *dataset_root,
                               const char *config_yaml,
                               const char *aggregation,
                               char **out_json);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library, not yet freed.
 */
void gecm_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GEC_METRICS_H */
