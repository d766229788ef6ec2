#ifndef SIGVER_H
#define SIGVER_H

/* Generated by cbindgen from the sigver-ffi crate. Do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of a C ABI call.
 */
typedef enum SigverStatus {
  SIGVER_STATUS_OK = 0,
  /**
   * A null pointer, an out-of-domain parameter, or a malformed value.
   */
  SIGVER_STATUS_INVALID_ARGUMENT = 1,
  /**
   * Vector dimensions disagree.
   */
  SIGVER_STATUS_DIMENSION_MISMATCH = 2,
  /**
   * A zero-norm vector has no cosine similarity.
   */
  SIGVER_STATUS_DEGENERATE_VECTOR = 3,
  /**
   * Not enough samples for the requested gallery split.
   */
  SIGVER_STATUS_INSUFFICIENT_SAMPLES = 4,
  /**
   * The underlying file could not be read or written.
   */
  SIGVER_STATUS_IO = 5,
  /**
   * A file exists but its contents do not parse or validate.
   */
  SIGVER_STATUS_PARSE = 6,
  /**
   * Any other library failure.
   */
  SIGVER_STATUS_INTERNAL = 7,
} SigverStatus;

/**
 * Probe score aggregation over the gallery references.
 */
typedef enum SigverAggregation {
  SIGVER_AGGREGATION_MEAN = 0,
  SIGVER_AGGREGATION_MAX = 1,
  SIGVER_AGGREGATION_MIN = 2,
} SigverAggregation;

/**
 * Probe verdict.
 */
typedef enum SigverDecision {
  SIGVER_DECISION_FORGE = 0,
  SIGVER_DECISION_GENUINE = 1,
} SigverDecision;

/**
 * Opaque handle to an enrolled model plus its file metadata.
 */
typedef struct SigverModel SigverModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *sigver_version(void);

/**
 * Message describing the most recent failure on this thread, or an empty
 * string if none. The pointer is invalidated by the next failing call on
 * the same thread.
 */
const char *sigver_last_error_message(void);

/**
 * Cosine similarity of two `dim`-length vectors into `out`.
 *
 * # Safety
 * `a` and `b` must point to `dim` readable f64 values and `out` to one
 * writable f64.
 */
enum SigverStatus sigver_cosine_similarity(const double *a,
                                           const double *b,
                                           size_t dim,
                                           double *out);

/**
 * Enrolls one writer from `n` genuine feature vectors laid out row-major
 * in `features` (`n * dim` values). `n_gallery_a + n_gallery_b` rows form
 * the gallery; the remainder are the held-out genuine probes. On success
 * `*out_model` owns the new model; free it with [`sigver_model_free`].
 *
 * # Safety
 * `features` must point to `n * dim` readable f64 values, `writer_id`
 * must be NUL-terminated or null, and `out_model` must be writable.
 */
enum SigverStatus sigver_enroll(const double *features,
                                size_t n,
                                size_t dim,
                                size_t n_gallery_a,
                                size_t n_gallery_b,
                                double alpha,
                                double e_consensus,
                                double e_threshold,
                                enum SigverAggregation aggregation,
                                uint64_t seed,
                                const char *writer_id,
                                struct SigverModel **out_model);

/**
 * Writes a model to `path` as JSON.
 *
 * # Safety
 * `model` must be a live pointer from this library and `path` a
 * NUL-terminated string.
 */
enum SigverStatus sigver_model_save(const struct SigverModel *model, const char *path);

/**
 * Loads a model previously written by [`sigver_model_save`] (or the CLI).
 * On success `*out_model` owns the handle.
 *
 * # Safety
 * `path` must be NUL-terminated and `out_model` writable.
 */
enum SigverStatus sigver_model_load(const char *path, struct SigverModel **out_model);

/**
 * The model's acceptance threshold, or NaN for a null model.
 *
 * # Safety
 * `model` must be null or a live pointer from this library.
 */
double sigver_model_tau(const struct SigverModel *model);

/**
 * Feature dimension the model was enrolled with, or 0 for a null model.
 *
 * # Safety
 * `model` must be null or a live pointer from this library.
 */
size_t sigver_model_dim(const struct SigverModel *model);

/**
 * Number of similarity values retained by the consensus filter, or 0 for
 * a null model or a baseline-strategy model.
 *
 * # Safety
 * `model` must be null or a live pointer from this library.
 */
size_t sigver_model_consensus_size(const struct SigverModel *model);

/**
 * Scores a probe against the model's gallery into `out_score`.
 *
 * # Safety
 * `model` must be a live pointer from this library, `probe` must point to
 * `dim` readable f64 values, and `out_score` must be writable.
 */
enum SigverStatus sigver_score(const struct SigverModel *model,
                               const double *probe,
                               size_t dim,
                               double *out_score);

/**
 * Scores a probe and applies the acceptance rule. `out_score` may be null
 * if only the decision is wanted.
 *
 * # Safety
 * As [`sigver_score`], except `out_score` may be null; `out_decision`
 * must be writable.
 */
enum SigverStatus sigver_verify(const struct SigverModel *model,
                                const double *probe,
                                size_t dim,
                                enum SigverDecision *out_decision,
                                double *out_score);

/**
 * Releases a model returned by [`sigver_enroll`] or [`sigver_model_load`].
 * Passing null is a no-op.
 *
 * # Safety
 * `model` must be null or a pointer previously returned by this library
 * that has not been freed yet.
 */
void sigver_model_free(struct SigverModel *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SIGVER_H */
