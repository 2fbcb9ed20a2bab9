#ifndef SSBLOWUP_H
#define SSBLOWUP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SsbStatus {
  SSB_STATUS_OK = 0,
  SSB_STATUS_INVALID_ARGUMENT = 1,
  SSB_STATUS_NULL_POINTER = 2,
  SSB_STATUS_OUT_OF_RANGE = 3,
  /**
   * Pole, non-convergent series, failed integration or overflow.
   */
  SSB_STATUS_NUMERICAL = 4,
  SSB_STATUS_PANIC = 5,
} SsbStatus;

/**
 * Radial field on a uniform grid, advanced by RK4.
 */
typedef struct SsbEvolution SsbEvolution;

/**
 * Eigenmode `w(rho)` on a caller-supplied grid.
 */
typedef struct SsbMode SsbMode;

/**
 * Eigenvalues found on a scan, in descending order.
 */
typedef struct SsbSpectrum SsbSpectrum;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Owned by the
 * library.
 */
const char *ssb_last_error_message(void);

/**
 * Library version as a static string.
 */
const char *ssb_version(void);

/**
 * Eigenvalue condition `F(lambda)` from the continued fraction.
 *
 * # Safety
 * `out` must be null or valid for one `double` write.
 */
enum SsbStatus ssb_eigen_residual(double lambda, double *out);

/**
 * Wronskian of the branches regular at `rho = 0` and `rho = 1`, at
 * `rho_match`.
 *
 * # Safety
 * `out` must be null or valid for one `double` write.
 */
enum SsbStatus ssb_wronskian(double lambda, double rho_match, double *out);

/**
 * Scans `[lambda_min, lambda_max]` with `step` and bisects roots to `tol`.
 *
 * # Safety
 * `out` must be null or valid for one pointer write. The handle written
 * there must be released with [`ssb_spectrum_free`].
 */
enum SsbStatus ssb_spectrum_find(double lambda_min,
                                 double lambda_max,
                                 double step,
                                 double tol,
                                 struct SsbSpectrum **out);

/**
 * Number of eigenvalues, 0 for a null handle.
 *
 * # Safety
 * `spectrum` must be null or a live handle from [`ssb_spectrum_find`].
 */
size_t ssb_spectrum_len(const struct SsbSpectrum *spectrum);

/**
 * # Safety
 * `spectrum` must be null or a live handle; `out` null or writable.
 */
enum SsbStatus ssb_spectrum_get(const struct SsbSpectrum *spectrum, size_t index, double *out);

/**
 * # Safety
 * `spectrum` must be null or a live handle, not used afterwards.
 */
void ssb_spectrum_free(struct SsbSpectrum *spectrum);

/**
 * Builds the mode with eigenvalue `lambda` on `rho[0..n]` (values in
 * `[0, 1]`), normalized by `w = rho^2 + ...` at the center.
 *
 * # Safety
 * `rho` must be valid for `n` reads; `out` null or writable. Release the
 * handle with [`ssb_mode_free`].
 */
enum SsbStatus ssb_mode_build(double lambda, const double *rho, size_t n, struct SsbMode **out);

/**
 * Copies `w` into `out[0..n]`; `n` must equal the grid length.
 *
 * # Safety
 * `mode` must be null or a live handle; `out` valid for `n` writes.
 */
enum SsbStatus ssb_mode_values(const struct SsbMode *mode, double *out, size_t n);

/**
 * # Safety
 * `mode` must be null or a live handle, not used afterwards.
 */
void ssb_mode_free(struct SsbMode *mode);

/**
 * `U0(r / t0)` cut off smoothly on `[r_cut, r_cut + width]`, on `m`
 * intervals of `[0, r_max]`.
 *
 * # Safety
 * `out` must be null or writable. Release with [`ssb_evolution_free`].
 */
enum SsbStatus ssb_evolution_new_self_similar(size_t m,
                                              double r_max,
                                              double t0,
                                              double r_cut,
                                              double width,
                                              struct SsbEvolution **out);

/**
 * `u = 1 - A r^2 exp(-(r - r0)^2 / sigma^2)` cut off on
 * `[r_cut, r_cut + width]`, at rest.
 *
 * # Safety
 * `out` must be null or writable. Release with [`ssb_evolution_free`].
 */
enum SsbStatus ssb_evolution_new_gaussian(size_t m,
                                          double r_max,
                                          double amplitude,
                                          double r0,
                                          double sigma,
                                          double r_cut,
                                          double width,
                                          struct SsbEvolution **out);

/**
 * Advances by `count` steps of `dt <= dr / 2`. On overflow the state is
 * left at the last finite step and `Numerical` is returned.
 *
 * # Safety
 * `evolution` must be null or a live handle.
 */
enum SsbStatus ssb_evolution_step(struct SsbEvolution *evolution, double dt, uint64_t count);

/**
 * Current time, NaN for a null handle.
 *
 * # Safety
 * `evolution` must be null or a live handle.
 */
double ssb_evolution_time(const struct SsbEvolution *evolution);

/**
 * Grid spacing, NaN for a null handle.
 *
 * # Safety
 * `evolution` must be null or a live handle.
 */
double ssb_evolution_dr(const struct SsbEvolution *evolution);

/**
 * `u_rr(t, 0)`, NaN for a null handle.
 *
 * # Safety
 * `evolution` must be null or a live handle.
 */
double ssb_evolution_center_curvature(const struct SsbEvolution *evolution);

/**
 * Number of grid values (`m + 1`), 0 for a null handle.
 *
 * # Safety
 * `evolution` must be null or a live handle.
 */
size_t ssb_evolution_len(const struct SsbEvolution *evolution);

/**
 * Copies `u` into `out[0..n]`; `n` must equal [`ssb_evolution_len`].
 *
 * # Safety
 * `evolution` must be null or a live handle; `out` valid for `n` writes.
 */
enum SsbStatus ssb_evolution_field(const struct SsbEvolution *evolution, double *out, size_t n);

/**
 * # Safety
 * `evolution` must be null or a live handle, not used afterwards.
 */
void ssb_evolution_free(struct SsbEvolution *evolution);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SSBLOWUP_H */
