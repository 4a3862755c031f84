#ifndef SISEG_H
#define SISEG_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum SisegStatus {
  SISEG_STATUS_OK = 0,
  SISEG_STATUS_NULL_POINTER = 1,
  SISEG_STATUS_INVALID_ARGUMENT = 2,
  SISEG_STATUS_IO = 3,
  SISEG_STATUS_FORMAT = 4,
  SISEG_STATUS_VALIDATION = 5,
  SISEG_STATUS_NUMERIC = 6,
  SISEG_STATUS_CONSISTENCY = 7,
  SISEG_STATUS_PATH_EXPLOSION = 8,
  SISEG_STATUS_DEGENERATE_REGION = 9,
  SISEG_STATUS_PANIC = 10,
} SisegStatus;

/**
 * Opaque network handle.
 */
typedef struct SisegNetwork SisegNetwork;

/**
 * Options for [`siseg_infer`].
 */
typedef struct SisegInferOptions {
  /**
   * Known noise standard deviation (isotropic).
   */
  double sigma;
  /**
   * Search range half-width in units of the statistic's standard deviation.
   */
  double range_sigmas;
  /**
   * Nonzero to also compute the over-conditioned p-value.
   */
  uint8_t over_conditioned;
} SisegInferOptions;

/**
 * Output of [`siseg_infer`]. When `detected` is 0 only `object_pixels` is meaningful;
 * `p_oc` is NaN unless requested.
 */
typedef struct SisegInferResult {
  uint8_t detected;
  size_t object_pixels;
  double z_obs;
  double sigma_eta;
  double p_naive;
  double p_selective;
  double p_oc;
  size_t region_count;
  size_t truncation_intervals;
  double truncation_length;
} SisegInferResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until the next
 * call into this library from the same thread.
 */
const char *siseg_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *siseg_version(void);

/**
 * Loads a weight manifest. `smooth_cuts` sets the piece count for sigmoid/tanh
 * layers that do not declare one (0 leaves them undeclared).
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum SisegStatus siseg_network_load(const char *path,
                                    size_t smooth_cuts,
                                    struct SisegNetwork **out);

/**
 * Releases a handle from [`siseg_network_load`]. Null is ignored.
 *
 * # Safety
 * `net` must come from [`siseg_network_load`] and not be used afterwards.
 */
void siseg_network_free(struct SisegNetwork *net);

/**
 * Input image height and width.
 *
 * # Safety
 * All pointers must be valid.
 */
enum SisegStatus siseg_network_shape(const struct SisegNetwork *net, size_t *height, size_t *width);

/**
 * Segments one image; writes one 0/1 label per pixel into `labels`.
 *
 * # Safety
 * `values` and `labels` must each hold `len` elements.
 */
enum SisegStatus siseg_segment(const struct SisegNetwork *net,
                               const double *values,
                               size_t len,
                               uint8_t *labels);

/**
 * Segments one image and computes the naive and selective p-values.
 *
 * # Safety
 * `values` must hold `len` elements; `options` and `out` must be valid.
 */
enum SisegStatus siseg_infer(const struct SisegNetwork *net,
                             const double *values,
                             size_t len,
                             const struct SisegInferOptions *options,
                             struct SisegInferResult *out);

/**
 * Two-sided p-value of `z` under `N(0, sigma^2)`.
 *
 * # Safety
 * `out` must be valid.
 */
enum SisegStatus siseg_naive_p(double z, double sigma, double *out);

/**
 * Two-sided p-value of `z` under `N(0, sigma^2)` truncated to a union of
 * intervals, given as `count` (lo, hi) pairs in `bounds` (2 * count values,
 * sorted and disjoint; infinities allowed).
 *
 * # Safety
 * `bounds` must hold `2 * count` values and `out` must be valid.
 */
enum SisegStatus siseg_truncated_p(double z,
                                   double sigma,
                                   const double *bounds,
                                   size_t count,
                                   double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SISEG_H */
