#ifndef TABTRANS_H
#define TABTRANS_H

/* Generated by cbindgen from tabtrans-ffi; edit the Rust source instead. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#ifdef __cplusplus
extern "C" {
#endif  // __cplusplus

/**
 * Status codes mirroring the CLI exit codes.
 */
typedef enum tt_status_t {
  TT_STATUS_OK = 0,
  TT_STATUS_CONFIG_ERROR = 2,
  TT_STATUS_DATA_ERROR = 3,
  TT_STATUS_NUMERIC_ERROR = 4,
  TT_STATUS_NULL_ARGUMENT = 5,
} tt_status_t;

/**
 * Opaque handle over a finished run directory: scaler, transformer,
 * selected features, and tuned classifier.
 */
typedef struct tt_bundle_t tt_bundle_t;

/**
 * Opaque classifier handle.
 */
typedef struct tt_classifier_t tt_classifier_t;

/**
 * Opaque transformer handle.
 */
typedef struct tt_transformer_t tt_transformer_t;

/**
 * Message of the most recent error on this thread. The pointer stays
 * valid until the next failing call on the same thread; do not free it.
 */
const char *tt_last_error(void);

/**
 * Crate version as a static string; do not free it.
 */
const char *tt_version(void);

/**
 * Loads a persisted transformer model file.
 *
 * On success writes the handle to `out` and returns `Ok`; the handle
 * must be released with `tt_transformer_free`.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string and `out` a valid
 * pointer.
 */
tt_status_t tt_transformer_load(const char *path, tt_transformer_t **out);

/**
 * # Safety
 * `handle` must come from `tt_transformer_load` (or be null).
 */
void tt_transformer_free(tt_transformer_t *handle);

/**
 * Width of the extracted feature vector (d*m + c), or 0 on null.
 *
 * # Safety
 * `handle` must be a live transformer handle.
 */
size_t tt_transformer_feature_width(const tt_transformer_t *handle);

/**
 * Extracts the contextual feature vector for one row.
 *
 * `cat_codes` holds `n_cat` categorical codes (schema order), `numeric`
 * holds `n_num` already-scaled continuous values, and `out` must have
 * room for `tt_transformer_feature_width` doubles.
 *
 * # Safety
 * All pointers must be valid for their stated lengths.
 */
tt_status_t tt_transformer_extract(const tt_transformer_t *handle,
                                   const uint32_t *cat_codes,
                                   size_t n_cat,
                                   const double *numeric,
                                   size_t n_num,
                                   double *out,
                                   size_t out_len);

/**
 * Loads a persisted classifier model file.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string and `out` a valid
 * pointer; release with `tt_classifier_free`.
 */
tt_status_t tt_classifier_load(const char *path, tt_classifier_t **out);

/**
 * # Safety
 * `handle` must come from `tt_classifier_load` (or be null).
 */
void tt_classifier_free(tt_classifier_t *handle);

/**
 * Positive-class probability for one feature row.
 *
 * # Safety
 * `features` must point to `n_features` doubles; `out_probability` must
 * be a valid pointer.
 */
tt_status_t tt_classifier_predict_proba(const tt_classifier_t *handle,
                                        const double *features,
                                        size_t n_features,
                                        double *out_probability);

/**
 * Loads a finished run directory for end-to-end scoring.
 *
 * # Safety
 * `run_dir` must be a valid NUL-terminated string and `out` a valid
 * pointer; release with `tt_bundle_free`.
 */
tt_status_t tt_bundle_load(const char *run_dir, tt_bundle_t **out);

/**
 * # Safety
 * `handle` must come from `tt_bundle_load` (or be null).
 */
void tt_bundle_free(tt_bundle_t *handle);

/**
 * Scores one raw row through the saved chain (scaler, transformer,
 * feature selection, tuned classifier). `numeric` holds the raw
 * unscaled values in schema numeric order.
 *
 * # Safety
 * All pointers must be valid for their stated lengths.
 */
tt_status_t tt_bundle_predict_row(const tt_bundle_t *handle,
                                  const uint32_t *cat_codes,
                                  size_t n_cat,
                                  const double *numeric,
                                  size_t n_num,
                                  double *out_probability);

/**
 * Runs the full pipeline from a JSON config file, writing artifacts to
 * the configured output directory (or `out_dir_override` when given).
 *
 * # Safety
 * `config_path` must be a valid NUL-terminated string;
 * `out_dir_override` may be null.
 */
tt_status_t tt_pipeline_run(const char *config_path, const char *out_dir_override);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  // TABTRANS_H
