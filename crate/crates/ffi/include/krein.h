#ifndef KREIN_H
#define KREIN_H

/* Generated by cbindgen from crates/ffi. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum KreinStatus {
  KREIN_STATUS_OK = 0,
  KREIN_STATUS_NULL_POINTER = 1,
  KREIN_STATUS_INVALID_ARGUMENT = 2,
  KREIN_STATUS_INVALID_SPEC = 3,
  /**
   * λ on or too near `[0, ∞)`.
   */
  KREIN_STATUS_ESSENTIAL_SPECTRUM = 4,
  /**
   * λ is a Dirichlet eigenvalue of one side.
   */
  KREIN_STATUS_DEGENERATE = 5,
  /**
   * `M + τ` numerically zero: λ is (close to) an eigenvalue.
   */
  KREIN_STATUS_NEAR_SINGULAR = 6,
  /**
   * Special-function range, overflow or a singular linear system.
   */
  KREIN_STATUS_NUMERICAL = 7,
  KREIN_STATUS_PANIC = 8,
} KreinStatus;

/**
 * Opaque problem handle.
 */
typedef struct KreinProblem KreinProblem;

/**
 * Opaque scan result: zeros plus counts of unresolved cells and the clipping flag.
 */
typedef struct KreinScanResult KreinScanResult;

typedef struct KreinComplex {
  double re;
  double im;
} KreinComplex;

/**
 * Constant potential value on `[r_left, r_right)`.
 */
typedef struct KreinSegment {
  double r_left;
  double r_right;
  struct KreinComplex value;
} KreinSegment;

/**
 * `M_m(λ)`, `τ_m(λ)` and their sum.
 */
typedef struct KreinDtn {
  struct KreinComplex interior;
  struct KreinComplex exterior;
  struct KreinComplex sum;
} KreinDtn;

typedef struct KreinScanRegion {
  double re_min;
  double re_max;
  double im_min;
  double im_max;
  size_t re_cells;
  size_t im_cells;
  double cut_band;
} KreinScanRegion;

/**
 * One located eigenvalue. `abs_d` is NaN where `M + τ` is undefined.
 */
typedef struct KreinZero {
  int32_t mode;
  struct KreinComplex lambda;
  double abs_d;
  int32_t winding;
  size_t newton_iterations;
  bool converged;
} KreinZero;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failing call on this thread; empty after a success.
 * Valid until the next call on the same thread.
 */
const char *krein_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *krein_version(void);

/**
 * Builds a problem from explicit parameters. `segments` may be null when `n_segments` is 0.
 *
 * # Safety
 * `segments` must point to `n_segments` readable values and `out` must be writable.
 */
enum KreinStatus krein_problem_new(double interface_radius,
                                   double truncation_radius,
                                   uint32_t mode_cutoff,
                                   size_t grid_points,
                                   const struct KreinSegment *segments,
                                   size_t n_segments,
                                   struct KreinProblem **out);

/**
 * Builds a problem from the text of a TOML run configuration.
 *
 * # Safety
 * `toml` must be a NUL-terminated string and `out` must be writable.
 */
enum KreinStatus krein_problem_from_toml(const char *toml, struct KreinProblem **out);

/**
 * # Safety
 * `problem` must be null or a handle from `krein_problem_new`/`krein_problem_from_toml`
 * that has not been freed.
 */
void krein_problem_free(struct KreinProblem *problem);

/**
 * # Safety
 * `problem` must be a live handle and `out` writable.
 */
enum KreinStatus krein_dtn(const struct KreinProblem *problem,
                           int32_t mode,
                           struct KreinComplex lambda,
                           struct KreinDtn *out);

/**
 * `1 / (M_m(λ) + τ_m(λ))`; `NearSingular` at eigenvalues.
 *
 * # Safety
 * `problem` must be a live handle and `out` writable.
 */
enum KreinStatus krein_mt_inverse(const struct KreinProblem *problem,
                                  int32_t mode,
                                  struct KreinComplex lambda,
                                  struct KreinComplex *out);

/**
 * Locates eigenvalues of the listed modes in `region`. `threads = 0` picks automatically;
 * the result does not depend on it.
 *
 * # Safety
 * `problem` must be a live handle, `region` readable, `modes` must point to `n_modes`
 * values and `out` must be writable.
 */
enum KreinStatus krein_scan(const struct KreinProblem *problem,
                            const struct KreinScanRegion *region,
                            const int32_t *modes,
                            size_t n_modes,
                            size_t threads,
                            struct KreinScanResult **out);

/**
 * Number of zeros; 0 for a null handle.
 *
 * # Safety
 * `result` must be null or a live handle.
 */
size_t krein_scan_result_len(const struct KreinScanResult *result);

/**
 * Cells whose zeros could not be resolved; 0 for a null handle.
 *
 * # Safety
 * `result` must be null or a live handle.
 */
size_t krein_scan_result_unresolved(const struct KreinScanResult *result);

/**
 * Whether the region was reduced to keep away from `[0, ∞)`.
 *
 * # Safety
 * `result` must be null or a live handle.
 */
bool krein_scan_result_clipped(const struct KreinScanResult *result);

/**
 * # Safety
 * `result` must be a live handle and `out` writable.
 */
enum KreinStatus krein_scan_result_get(const struct KreinScanResult *result,
                                       size_t index,
                                       struct KreinZero *out);

/**
 * # Safety
 * `result` must be null or a handle from `krein_scan` that has not been freed.
 */
void krein_scan_result_free(struct KreinScanResult *result);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KREIN_H */
