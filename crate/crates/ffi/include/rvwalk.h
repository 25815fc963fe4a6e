#ifndef RVWALK_H
#define RVWALK_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum RvwStatus {
  RVW_STATUS_OK = 0,
  RVW_STATUS_INVALID_INPUT = 1,
  RVW_STATUS_OUT_OF_RANGE = 2,
  RVW_STATUS_RESOURCE_LIMIT = 3,
  RVW_STATUS_IO = 4,
  RVW_STATUS_NULL_POINTER = 5,
  RVW_STATUS_PANIC = 6,
} RvwStatus;

/**
 * Columns of a sequence table.
 */
typedef enum RvwSequenceColumn {
  RVW_SEQUENCE_COLUMN_MU = 0,
  RVW_SEQUENCE_COLUMN_NU = 1,
  RVW_SEQUENCE_COLUMN_LOG_A = 2,
  RVW_SEQUENCE_COLUMN_V_SQ = 3,
  RVW_SEQUENCE_COLUMN_SIGMA_SQ = 4,
  RVW_SEQUENCE_COLUMN_ETA = 5,
} RvwSequenceColumn;

/**
 * Columns of a moment table. The fourth-moment columns exist only for Rademacher tables.
 */
typedef enum RvwMomentColumn {
  RVW_MOMENT_COLUMN_ES_SQ = 0,
  RVW_MOMENT_COLUMN_EM_SQ = 1,
  RVW_MOMENT_COLUMN_ESY = 2,
  RVW_MOMENT_COLUMN_EY_SQ = 3,
  RVW_MOMENT_COLUMN_EY4 = 4,
  RVW_MOMENT_COLUMN_BN = 5,
  RVW_MOMENT_COLUMN_KURTOSIS_M = 6,
} RvwMomentColumn;

typedef struct RvwBatch RvwBatch;

typedef struct RvwMemorySpec RvwMemorySpec;

typedef struct RvwMomentTable RvwMomentTable;

typedef struct RvwSampler RvwSampler;

typedef struct RvwSequenceTable RvwSequenceTable;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty if none. Owned by the library.
 */
const char *rvw_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *rvw_version(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void rvw_string_free(char *s);

double rvw_critical_p(double gamma);

double rvw_hat_p(double gamma);

/**
 * Limiting covariance `K(s, t)` of `S_{floor(nt)} / sqrt(n)` in the diffusive regime.
 *
 * # Safety
 * `out` must be valid for a write.
 */
enum RvwStatus rvw_covariance_kernel(double s, double t, double p, double gamma, double *out);

/**
 * Limit of `E S_n^2 / n` in the diffusive regime.
 *
 * # Safety
 * `out` must be valid for a write.
 */
enum RvwStatus rvw_subcritical_limit_variance(double p, double gamma, double *out);

/**
 * Parse a memory spec from JSON, e.g. `{"family":"power_law","gamma":1.0}`.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` valid for a write.
 */
enum RvwStatus rvw_memory_spec_from_json(const char *json, struct RvwMemorySpec **out);

/**
 * # Safety
 * `spec` must be null or a handle from [`rvw_memory_spec_from_json`], not yet freed.
 */
void rvw_memory_spec_free(struct RvwMemorySpec *spec);

/**
 * `mu_n` for `n >= 1`.
 *
 * # Safety
 * `spec` must be a live handle and `out` valid for a write.
 */
enum RvwStatus rvw_memory_spec_mu(const struct RvwMemorySpec *spec, uint64_t n, double *out);

/**
 * Regime report as JSON.
 *
 * # Safety
 * `spec` must be a live handle and `out` valid for a write.
 */
enum RvwStatus rvw_regime_json(const struct RvwMemorySpec *spec, double p, char **out);

/**
 * Companion sequences for indices `1..=n_max`.
 *
 * # Safety
 * `spec` must be a live handle and `out` valid for a write.
 */
enum RvwStatus rvw_sequences_build(const struct RvwMemorySpec *spec,
                                   double p,
                                   size_t n_max,
                                   struct RvwSequenceTable **out);

/**
 * # Safety
 * `table` must be null or a live handle.
 */
void rvw_sequences_free(struct RvwSequenceTable *table);

/**
 * Number of rows, or 0 for a null handle.
 *
 * # Safety
 * `table` must be null or a live handle.
 */
size_t rvw_sequences_len(const struct RvwSequenceTable *table);

/**
 * Copy a column into `buf`, which must hold at least [`rvw_sequences_len`] values.
 *
 * # Safety
 * `table` must be a live handle and `buf` valid for `len` writes.
 */
enum RvwStatus rvw_sequences_column(const struct RvwSequenceTable *table,
                                    enum RvwSequenceColumn column,
                                    double *buf,
                                    size_t len);

/**
 * Exact moments for `1..=n_max`. `rademacher != 0` adds the fourth-moment
 * columns; otherwise the innovations have variance `innovation_variance`.
 *
 * # Safety
 * `spec` must be a live handle and `out` valid for a write.
 */
enum RvwStatus rvw_moments_build(const struct RvwMemorySpec *spec,
                                 double p,
                                 size_t n_max,
                                 int32_t rademacher,
                                 double innovation_variance,
                                 struct RvwMomentTable **out);

/**
 * # Safety
 * `table` must be null or a live handle.
 */
void rvw_moments_free(struct RvwMomentTable *table);

/**
 * # Safety
 * `table` must be null or a live handle.
 */
size_t rvw_moments_len(const struct RvwMomentTable *table);

/**
 * Copy a column into `buf`. Fourth-moment columns of a non-Rademacher table
 * give `RVW_STATUS_INVALID_INPUT`.
 *
 * # Safety
 * `table` must be a live handle and `buf` valid for `len` writes.
 */
enum RvwStatus rvw_moments_column(const struct RvwMomentTable *table,
                                  enum RvwMomentColumn column,
                                  double *buf,
                                  size_t len);

/**
 * Simulate `replicas` walks of `n_steps` steps, recording `S` at the given
 * checkpoints (strictly increasing; pass `n_checkpoints = 0` for the last step only).
 * `innovation_json` may be null for Rademacher steps.
 *
 * # Safety
 * Pointers must be live handles or valid arrays of the stated lengths.
 */
enum RvwStatus rvw_simulate(const struct RvwMemorySpec *spec,
                            double p,
                            const char *innovation_json,
                            uint64_t n_steps,
                            const uint64_t *checkpoints,
                            size_t n_checkpoints,
                            size_t replicas,
                            uint64_t master_seed,
                            size_t threads,
                            struct RvwBatch **out);

/**
 * # Safety
 * `batch` must be null or a live handle.
 */
void rvw_batch_free(struct RvwBatch *batch);

/**
 * # Safety
 * `batch` must be null or a live handle.
 */
size_t rvw_batch_replicas(const struct RvwBatch *batch);

/**
 * Checkpoints per replica.
 *
 * # Safety
 * `batch` must be null or a live handle.
 */
size_t rvw_batch_checkpoints(const struct RvwBatch *batch);

/**
 * Copy `S` at every checkpoint of one replica into `buf`.
 *
 * # Safety
 * `batch` must be a live handle and `buf` valid for `len` writes.
 */
enum RvwStatus rvw_batch_s(const struct RvwBatch *batch, size_t replica, double *buf, size_t len);

/**
 * Empty weighted sampler with room for `capacity` weights.
 *
 * # Safety
 * `out` must be valid for a write.
 */
enum RvwStatus rvw_sampler_new(size_t capacity, struct RvwSampler **out);

/**
 * # Safety
 * `sampler` must be null or a live handle.
 */
void rvw_sampler_free(struct RvwSampler *sampler);

/**
 * Append a positive weight.
 *
 * # Safety
 * `sampler` must be a live handle.
 */
enum RvwStatus rvw_sampler_push(struct RvwSampler *sampler, double weight);

/**
 * Sum of the weights pushed so far.
 *
 * # Safety
 * `sampler` must be null or a live handle.
 */
double rvw_sampler_total(const struct RvwSampler *sampler);

/**
 * The 1-based index `k` with `prefix(k-1) <= u * total < prefix(k)`, for `u` in `[0, 1)`.
 *
 * # Safety
 * `sampler` must be a live handle and `out` valid for a write.
 */
enum RvwStatus rvw_sampler_sample(const struct RvwSampler *sampler, double u, size_t *out);

/**
 * Run a named verification suite and return its report as JSON.
 * `quick != 0` selects the reduced problem sizes.
 *
 * # Safety
 * `suite` must be a NUL-terminated string and `out` valid for a write.
 */
enum RvwStatus rvw_verify_json(const char *suite,
                               int32_t quick,
                               uint64_t seed,
                               size_t threads,
                               char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RVWALK_H */
