#ifndef DISCOUNT_CML_H
#define DISCOUNT_CML_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum DcmlStatus {
  DCML_STATUS_OK = 0,
  DCML_STATUS_NULL_POINTER = 1,
  DCML_STATUS_INVALID_ARGUMENT = 2,
  DCML_STATUS_ESTIMATION_FAILED = 3,
  DCML_STATUS_IO = 4,
  DCML_STATUS_PANIC = 5,
} DcmlStatus;

/**
 * Fitted causal forest.
 */
typedef struct DcmlCausalForest DcmlCausalForest;

/**
 * Survey sample.
 */
typedef struct DcmlDataset DcmlDataset;

/**
 * One estimate with its standard error.
 */
typedef struct DcmlEstimate {
  double effect;
  double se;
  double p_value;
  uint64_t n;
  uint64_t n_trimmed;
} DcmlEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *dcml_version(void);

/**
 * Bytes needed to hold the last error message, including the NUL.
 */
size_t dcml_last_error_length(void);

/**
 * Copies the last error message of this thread into `buf` (truncated to
 * `len - 1` bytes, always NUL-terminated) and returns the bytes copied.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t dcml_last_error_message(char *buf, size_t len);

/**
 * Simulates a survey. `config` holds `key = value` lines and may be null
 * for the default configuration; `seed` overrides any seed in it.
 *
 * # Safety
 * `config` must be null or a NUL-terminated string; `out` must be writable.
 */
enum DcmlStatus dcml_simulate(const char *config, uint64_t seed, struct DcmlDataset **out);

/**
 * Loads a survey CSV. A null `schema_path` means the data path with a
 * `.schema` extension.
 *
 * # Safety
 * Paths must be NUL-terminated strings (`schema_path` may be null); `out`
 * must be writable.
 */
enum DcmlStatus dcml_dataset_load(const char *data_path,
                                  const char *schema_path,
                                  double max_discount,
                                  double binarize_at,
                                  struct DcmlDataset **out);

/**
 * Writes a dataset and its schema in the ingestible layout.
 *
 * # Safety
 * `ds` must be a live handle; paths must be NUL-terminated strings.
 */
enum DcmlStatus dcml_dataset_write(const struct DcmlDataset *ds,
                                   const char *data_path,
                                   const char *schema_path);

/**
 * Number of rows.
 *
 * # Safety
 * `ds` must be a live handle; `out` must be writable.
 */
enum DcmlStatus dcml_dataset_len(const struct DcmlDataset *ds, size_t *out);

/**
 * Number of control covariates (X, imputation indicators and W) used by
 * the estimators.
 *
 * # Safety
 * `ds` must be a live handle; `out` must be writable.
 */
enum DcmlStatus dcml_dataset_n_covariates(const struct DcmlDataset *ds, size_t *out);

/**
 * New dataset with the always buyers (`S(0) = 1`) of `ds`.
 *
 * # Safety
 * `ds` must be a live handle; `out` must be writable.
 */
enum DcmlStatus dcml_dataset_always_buyers(const struct DcmlDataset *ds, struct DcmlDataset **out);

/**
 * Releases a dataset; null is ignored.
 *
 * # Safety
 * `ds` must be null or a handle not yet freed.
 */
void dcml_dataset_free(struct DcmlDataset *ds);

/**
 * Fits a causal forest of the outcome on the discount with all control
 * covariates.
 *
 * # Safety
 * `ds` must be a live handle; `out` must be writable.
 */
enum DcmlStatus dcml_causal_forest_fit(const struct DcmlDataset *ds,
                                       size_t n_trees,
                                       uint64_t seed,
                                       struct DcmlCausalForest **out);

/**
 * Average partial effect with its standard error.
 *
 * # Safety
 * `cf` must be a live handle; `out` must be writable.
 */
enum DcmlStatus dcml_causal_forest_ape(const struct DcmlCausalForest *cf, struct DcmlEstimate *out);

/**
 * Number of covariates the forest expects per row.
 *
 * # Safety
 * `cf` must be a live handle; `out` must be writable.
 */
enum DcmlStatus dcml_causal_forest_n_features(const struct DcmlCausalForest *cf, size_t *out);

/**
 * Conditional effects at `n_rows` row-major covariate rows. `se_out` may
 * be null.
 *
 * # Safety
 * `x` must hold `n_rows * n_cols` values; `tau_out` (and `se_out` unless
 * null) must hold `n_rows` values.
 */
enum DcmlStatus dcml_causal_forest_predict(const struct DcmlCausalForest *cf,
                                           const double *x,
                                           size_t n_rows,
                                           size_t n_cols,
                                           double *tau_out,
                                           double *se_out);

/**
 * Releases a forest; null is ignored.
 *
 * # Safety
 * `cf` must be null or a handle not yet freed.
 */
void dcml_causal_forest_free(struct DcmlCausalForest *cf);

/**
 * Cross-fitted doubly-robust effect of the binary discount with all
 * control covariates.
 *
 * # Safety
 * `ds` must be a live handle; `out` must be writable.
 */
enum DcmlStatus dcml_dml_ate(const struct DcmlDataset *ds,
                             size_t n_trees,
                             size_t k_folds,
                             double trim,
                             uint64_t seed,
                             struct DcmlEstimate *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DISCOUNT_CML_H */
