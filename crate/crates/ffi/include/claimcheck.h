#ifndef CLAIMCHECK_H
#define CLAIMCHECK_H

/* Generated by cbindgen from claimcheck-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every claimcheck function.
 */
typedef enum {
  CLAIMCHECK_STATUS_OK = 0,
  /**
   * A pointer argument was null or a string was not valid UTF-8.
   */
  CLAIMCHECK_STATUS_INVALID_ARGUMENT = 1,
  /**
   * Configuration or input could not be parsed.
   */
  CLAIMCHECK_STATUS_PARSE = 2,
  /**
   * The backend or a tool failed.
   */
  CLAIMCHECK_STATUS_BACKEND = 3,
  /**
   * The debate aborted; the transcript (if any) carries the reason.
   */
  CLAIMCHECK_STATUS_ABORTED = 4,
  /**
   * No label alias matched the given text.
   */
  CLAIMCHECK_STATUS_UNPARSABLE_LABEL = 5,
  /**
   * An internal invariant was violated.
   */
  CLAIMCHECK_STATUS_INTERNAL = 6,
} ClaimcheckStatus;

/**
 * Opaque debate engine handle.
 */
typedef struct claimcheck_engine claimcheck_engine;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread. The pointer stays
 * valid until the next claimcheck call on the same thread.
 */
const char *claimcheck_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *claimcheck_version(void);

/**
 * Frees a string returned by this library. Passing null is a no-op.
 *
 * # Safety
 * `s` must have been returned by a claimcheck function and not freed yet.
 */
void claimcheck_string_free(char *s);

/**
 * Normalizes free-form verdict text into a canonical label.
 *
 * `label_set_json` is an optional label-set document (`{"labels": [...],
 * "aliases": {...}, "fallback": "..."}`); pass null for the default
 * three-label set. On success `*out_label` holds the canonical label.
 *
 * # Safety
 * Pointer arguments must be null or valid NUL-terminated strings;
 * `out_label` must be a valid out-pointer.
 */
ClaimcheckStatus claimcheck_normalize_label(const char *label_set_json,
                                            const char *raw,
                                            char **out_label);

/**
 * Exact-match comparison of two verdict texts under one label set.
 * Writes 1 into `*out` when the normalized labels are identical.
 *
 * # Safety
 * Pointer arguments must be null or valid NUL-terminated strings; `out`
 * must be a valid out-pointer.
 */
ClaimcheckStatus claimcheck_exact_match(const char *label_set_json,
                                        const char *pred,
                                        const char *gold,
                                        int *out);

/**
 * Percentile-bootstrap confidence interval for the mean of boolean flags
 * (nonzero byte = true). Bounds land in `*out_lo` / `*out_hi`.
 *
 * # Safety
 * `flags` must point to `len` readable bytes; out-pointers must be valid.
 */
ClaimcheckStatus claimcheck_bootstrap_ci(const uint8_t *flags,
                                         uintptr_t len,
                                         uint32_t resamples,
                                         double level,
                                         uint64_t seed,
                                         double *out_lo,
                                         double *out_hi);

/**
 * Creates an engine from a JSON configuration:
 *
 * ```json
 * {
 *   "backend": "mock",
 *   "script_path": "script.json",
 *   "combo": "vanilla+vanilla",
 *   "rounds": 3
 * }
 * ```
 *
 * # Safety
 * `config_json` must be a valid NUL-terminated string; `out` must be a
 * valid out-pointer. The returned handle must be freed with
 * [`claimcheck_engine_free`].
 */
ClaimcheckStatus claimcheck_engine_new(const char *config_json, claimcheck_engine **out);

/**
 * Frees an engine handle. Passing null is a no-op.
 *
 * # Safety
 * `engine` must have come from [`claimcheck_engine_new`] and not be freed
 * twice.
 */
void claimcheck_engine_free(claimcheck_engine *engine);

/**
 * Runs one debate over `claim_text`. On success (including a judge
 * verdict), `*out_transcript_json` holds the full transcript document.
 * An aborted debate returns `CLAIMCHECK_STATUS_ABORTED` and still writes
 * the partial transcript when possible.
 *
 * # Safety
 * `engine` must be a live handle from [`claimcheck_engine_new`];
 * `claim_text` must be a valid NUL-terminated string;
 * `out_transcript_json` must be a valid out-pointer.
 */
ClaimcheckStatus claimcheck_engine_verify(claimcheck_engine *engine,
                                          const char *claim_text,
                                          char **out_transcript_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CLAIMCHECK_H */
