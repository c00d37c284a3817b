#ifndef GRIDIRON_H
#define GRIDIRON_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum GridironStatus {
  GRIDIRON_STATUS_OK = 0,
  GRIDIRON_STATUS_NULL_POINTER = 1,
  GRIDIRON_STATUS_INVALID_UTF8 = 2,
  GRIDIRON_STATUS_INVALID_INPUT = 3,
  GRIDIRON_STATUS_WIDTH_MISMATCH = 4,
  GRIDIRON_STATUS_UNKNOWN_TEAM = 5,
  GRIDIRON_STATUS_IO = 6,
  GRIDIRON_STATUS_CORRUPT_MODEL = 7,
  GRIDIRON_STATUS_VERSION_MISMATCH = 8,
  GRIDIRON_STATUS_MODEL_ERROR = 9,
  GRIDIRON_STATUS_PANIC = 99,
} GridironStatus;

/**
 * A loaded model bundle.
 */
typedef struct GridironBundle GridironBundle;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. Valid until
 * the next call into the library from this thread.
 */
const char *gridiron_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *gridiron_version(void);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum GridironStatus gridiron_bundle_load(const char *path, struct GridironBundle **out);

/**
 * # Safety
 * `bundle` must come from [`gridiron_bundle_load`] and not be freed twice.
 */
void gridiron_bundle_free(struct GridironBundle *bundle);

/**
 * Number of features the bundle expects.
 *
 * # Safety
 * Pointers must be valid.
 */
enum GridironStatus gridiron_bundle_width(const struct GridironBundle *bundle, size_t *out);

/**
 * Model output for one encoded feature vector: the regression estimate,
 * or a success score for classifiers.
 *
 * # Safety
 * `x` must point to `len` doubles; other pointers must be valid.
 */
enum GridironStatus gridiron_bundle_predict(const struct GridironBundle *bundle,
                                            const double *x,
                                            size_t len,
                                            double *out);

/**
 * Progress measure for a play: 0..1.
 *
 * # Safety
 * `out` must be valid.
 */
enum GridironStatus gridiron_progress(uint8_t down, uint32_t togo, int32_t gained, double *out);

/**
 * Parses one raw play record (JSON) into a JSON result string, the same
 * shape the HTTP `/parse` route returns.
 *
 * # Safety
 * `record_json` must be NUL-terminated; `out` valid. Free the result
 * with [`gridiron_string_free`].
 */
enum GridironStatus gridiron_parse_json(const char *record_json, char **out);

/**
 * Ranks candidate plays with the given bundles. The request is the JSON
 * body of the HTTP `/rank` route; the result is the ranked play list.
 *
 * # Safety
 * `bundles` must point to `n` valid bundle pointers (may be NULL when
 * `n == 0`); strings NUL-terminated; `out` valid.
 */
enum GridironStatus gridiron_rank_json(const struct GridironBundle *const *bundles,
                                       size_t n,
                                       const char *request_json,
                                       char **out);

/**
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void gridiron_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GRIDIRON_H */
