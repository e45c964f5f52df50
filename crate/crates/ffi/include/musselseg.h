#ifndef MUSSELSEG_H
#define MUSSELSEG_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum MsStatus {
  MS_STATUS_OK = 0,
  MS_STATUS_NULL_POINTER = 1,
  MS_STATUS_INVALID_INPUT = 2,
  MS_STATUS_CONFIG = 3,
  MS_STATUS_UNDEFINED = 4,
  MS_STATUS_PANIC = 5,
} MsStatus;

/**
 * Feature layout for image input.
 */
typedef enum MsFeatures {
  MS_FEATURES_RGBXY = 0,
  MS_FEATURES_RGB = 1,
  MS_FEATURES_LABXY = 2,
  MS_FEATURES_LAB = 3,
} MsFeatures;

/**
 * Opaque feature dataset.
 */
typedef struct MsDataset MsDataset;

/**
 * Opaque clustering result.
 */
typedef struct MsResult MsResult;

/**
 * Engine parameters. Obtain defaults from [`ms_config_default`].
 */
typedef struct MsConfig {
  size_t population;
  size_t k_max;
  size_t top_count;
  double gamma;
  double mu;
  double activation_threshold;
  size_t max_iter;
  uint64_t seed;
  size_t subsample_cap;
  double levy_cap;
  /**
   * Non-zero redraws the step length per iteration.
   */
  uint8_t levy_resample;
  /**
   * 0 disables early stopping.
   */
  size_t stagnation_window;
  uint32_t db_q_order;
  uint32_t db_t_order;
} MsConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *ms_last_error(void);

struct MsConfig ms_config_default(void);

/**
 * Builds a dataset from `n * d` row-major values.
 *
 * # Safety
 * `points` must point to `n * d` readable doubles; `out` must be writable.
 */
enum MsStatus ms_dataset_from_points(const double *points,
                                     size_t n,
                                     size_t d,
                                     struct MsDataset **out);

/**
 * Builds per-pixel features from `width * height * 3` row-major RGB bytes.
 * `features` is one of the [`MsFeatures`] values.
 *
 * # Safety
 * `rgb` must point to `width * height * 3` readable bytes; `out` must be
 * writable.
 */
enum MsStatus ms_dataset_from_rgb(const uint8_t *rgb,
                                  size_t width,
                                  size_t height,
                                  uint32_t features,
                                  double spatial_weight,
                                  struct MsDataset **out);

/**
 * Number of points, or 0 for null.
 *
 * # Safety
 * `dataset` must be null or a live handle.
 */
size_t ms_dataset_len(const struct MsDataset *dataset);

/**
 * Feature dimension, or 0 for null.
 *
 * # Safety
 * `dataset` must be null or a live handle.
 */
size_t ms_dataset_dim(const struct MsDataset *dataset);

/**
 * # Safety
 * `dataset` must be null or a handle not yet freed.
 */
void ms_dataset_free(struct MsDataset *dataset);

/**
 * Runs the optimizer. `config` may be null for defaults.
 *
 * # Safety
 * `dataset` must be a live handle, `config` null or readable, `out` writable.
 */
enum MsStatus ms_run(const struct MsDataset *dataset,
                     const struct MsConfig *config,
                     struct MsResult **out);

/**
 * # Safety
 * `result` must be null or a handle not yet freed.
 */
void ms_result_free(struct MsResult *result);

/**
 * Number of clusters in the result, or 0 for null.
 *
 * # Safety
 * `result` must be null or a live handle.
 */
size_t ms_result_k_eff(const struct MsResult *result);

/**
 * Best fitness; infinite for a degenerate result, NaN for null.
 *
 * # Safety
 * `result` must be null or a live handle.
 */
double ms_result_rf(const struct MsResult *result);

/**
 * DB index of the result; infinite when undefined, NaN for null.
 *
 * # Safety
 * `result` must be null or a live handle.
 */
double ms_result_db(const struct MsResult *result);

/**
 * Feature dimension of the centers, or 0 for null.
 *
 * # Safety
 * `result` must be null or a live handle.
 */
size_t ms_result_dim(const struct MsResult *result);

/**
 * Number of trace rows (iterations run), or 0 for null.
 *
 * # Safety
 * `result` must be null or a live handle.
 */
size_t ms_result_trace_len(const struct MsResult *result);

/**
 * Copies the best fitness after each iteration into `out[0..len]`.
 *
 * # Safety
 * `result` must be a live handle and `out` writable for `len` doubles.
 */
enum MsStatus ms_result_trace_rf(const struct MsResult *result, double *out, size_t len);

/**
 * Copies one label per dataset point into `out[0..len]`; `len` must equal
 * the dataset length.
 *
 * # Safety
 * `result` must be a live handle and `out` writable for `len` values.
 */
enum MsStatus ms_result_labels(const struct MsResult *result, uint32_t *out, size_t len);

/**
 * Copies the `k_eff * dim` row-major centers into `out[0..len]`.
 *
 * # Safety
 * `result` must be a live handle and `out` writable for `len` doubles.
 */
enum MsStatus ms_result_centers(const struct MsResult *result, double *out, size_t len);

/**
 * DB index of `labels` (one per point) on `dataset`. Returns
 * [`MsStatus::Undefined`] for fewer than two clusters.
 *
 * # Safety
 * `dataset` must be a live handle, `labels` readable for `len` values and
 * `out` writable.
 */
enum MsStatus ms_db_index(const struct MsDataset *dataset,
                          const uint32_t *labels,
                          size_t len,
                          uint32_t q_order,
                          uint32_t t_order,
                          double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MUSSELSEG_H */
