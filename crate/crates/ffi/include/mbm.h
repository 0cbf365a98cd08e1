#ifndef MBM_H
#define MBM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum {
  MBM_STATUS_OK = 0,
  MBM_STATUS_NULL_POINTER = 1,
  MBM_STATUS_DOMAIN = 2,
  MBM_STATUS_QUADRATURE = 3,
  MBM_STATUS_FACTORIZATION = 4,
  MBM_STATUS_ASSUMPTION = 5,
  MBM_STATUS_INVARIANT = 6,
  MBM_STATUS_DEGENERATE = 7,
  MBM_STATUS_CONFIG = 8,
  MBM_STATUS_IO = 9,
  MBM_STATUS_INVALID_UTF8 = 10,
  MBM_STATUS_BUFFER_SIZE = 11,
  MBM_STATUS_PANIC = 12,
} MbmStatus;

typedef enum {
  MBM_SIMULATOR_VOLTERRA = 0,
  MBM_SIMULATOR_CHOLESKY = 1,
  MBM_SIMULATOR_MOVING_AVERAGE = 2,
} MbmSimulator;

/**
 * Opaque Hurst function.
 */
typedef struct MbmHurst MbmHurst;

/**
 * Opaque convex payoff.
 */
typedef struct MbmPayoff MbmPayoff;

/**
 * Opaque path sampler for a fixed grid size.
 */
typedef struct MbmSampler MbmSampler;

/**
 * Mirror of the core `RateExponents`.
 */
typedef struct {
  double h_tilde;
  double leading_exponent;
  double remainder_exponent;
  bool lower_bound_applicable;
  double lower_leading_exponent;
} MbmRateExponents;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or "" if none. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *mbm_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *mbm_version(void);

/**
 * Releases a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must come from this library and must not be used afterwards.
 */
void mbm_string_free(char *s);

/**
 * `φ(a) = E[Y 1{Y > a}]` for standard normal `Y`, which equals the normal density at `a`.
 */
double mbm_phi(double a);

/**
 * Moving-average normalizing constant `C1(H)`.
 *
 * # Safety
 * `out` must be NULL or valid for writing one `double`.
 */
MbmStatus mbm_c1(double h, double *out);

/**
 * Volterra kernel constant `C2(H)`.
 *
 * # Safety
 * `out` must be NULL or valid for writing one `double`.
 */
MbmStatus mbm_c2(double h, double *out);

/**
 * # Safety
 * `out` must be NULL or valid for writing one `double`.
 */
MbmStatus mbm_c3(double h, double *out);

/**
 * Volterra kernel `K_H(t, s)` for `0 < s < t`.
 *
 * # Safety
 * `out` must be NULL or valid for writing one `double`.
 */
MbmStatus mbm_molchan_kernel(double h, double t, double s, double *out);

/**
 * # Safety
 * `out` must be NULL or valid for writing one pointer.
 */
MbmStatus mbm_hurst_constant(double h, MbmHurst **out);

/**
 * `H_t = h0 + slope t`.
 *
 * # Safety
 * `out` must be NULL or valid for writing one pointer.
 */
MbmStatus mbm_hurst_affine(double h0, double slope, MbmHurst **out);

/**
 * `H_t = h0 + h1 sin(2 pi t + phase)`.
 *
 * # Safety
 * `out` must be NULL or valid for writing one pointer.
 */
MbmStatus mbm_hurst_sin(double h0, double h1, double phase, MbmHurst **out);

/**
 * # Safety
 * `out` must be NULL or valid for writing one pointer.
 */
MbmStatus mbm_hurst_logistic(double lo, double hi, double center, double steepness, MbmHurst **out);

/**
 * Re-declares the Hölder exponent of `hurst` in place.
 *
 * # Safety
 * `hurst` must be NULL or a live handle not used concurrently.
 */
MbmStatus mbm_hurst_set_alpha(MbmHurst *hurst, double alpha);

/**
 * # Safety
 * `hurst` must be NULL or a live handle; `out` NULL or writable.
 */
MbmStatus mbm_hurst_evaluate(const MbmHurst *hurst, double t, double *out);

/**
 * # Safety
 * `hurst` must be NULL or a handle from this library, not used afterwards.
 */
void mbm_hurst_free(MbmHurst *hurst);

/**
 * `(x - a)^+`.
 *
 * # Safety
 * `out` must be NULL or valid for writing one pointer.
 */
MbmStatus mbm_payoff_call(double a, MbmPayoff **out);

/**
 * `|x - a|`.
 *
 * # Safety
 * `out` must be NULL or valid for writing one pointer.
 */
MbmStatus mbm_payoff_abs(double a, MbmPayoff **out);

/**
 * `x^2 / 2` with its second-derivative measure restricted to `[lo, hi]`.
 *
 * # Safety
 * `out` must be NULL or valid for writing one pointer.
 */
MbmStatus mbm_payoff_quadratic(double lo, double hi, MbmPayoff **out);

/**
 * `ψ(x)`; NaN if `payoff` is NULL.
 *
 * # Safety
 * `payoff` must be NULL or a live handle.
 */
double mbm_payoff_psi(const MbmPayoff *payoff, double x);

/**
 * # Safety
 * `payoff` must be NULL or a handle from this library, not used afterwards.
 */
void mbm_payoff_free(MbmPayoff *payoff);

/**
 * Exact integral minus Riemann sum along one path of `len` values starting at 0.
 *
 * # Safety
 * `values` must point to `len` readable doubles; other pointers as usual.
 */
MbmStatus mbm_discretization_gap(const MbmPayoff *payoff,
                                 const double *values,
                                 size_t len,
                                 double *out);

/**
 * `I(a) = ∫_0^1 s^{-H_s} φ(a / s^{H_s}) ds`.
 *
 * # Safety
 * `hurst` must be NULL or a live handle; `out` NULL or writable.
 */
MbmStatus mbm_leading_constant_inner(const MbmHurst *hurst, double a, double rel_tol, double *out);

/**
 * `∫ I(a) μ(da)` for the payoff's second-derivative measure `μ`.
 *
 * # Safety
 * Handles must be NULL or live; `out` NULL or writable.
 */
MbmStatus mbm_leading_constant(const MbmPayoff *payoff,
                               const MbmHurst *hurst,
                               double rel_tol,
                               double *out);

/**
 * # Safety
 * `hurst` must be NULL or a live handle; `out` NULL or writable.
 */
MbmStatus mbm_rate_exponents(const MbmHurst *hurst, double delta, MbmRateExponents *out);

/**
 * Builds a sampler for `n` intervals. `oversample` applies to the Volterra
 * and moving-average simulators, `truncation` to the moving average only.
 *
 * # Safety
 * `hurst` must be NULL or a live handle; `out` NULL or writable.
 */
MbmStatus mbm_sampler_new(const MbmHurst *hurst,
                          MbmSimulator kind,
                          size_t n,
                          size_t oversample,
                          double truncation,
                          MbmSampler **out);

/**
 * Number of intervals; 0 if `sampler` is NULL.
 *
 * # Safety
 * `sampler` must be NULL or a live handle.
 */
size_t mbm_sampler_n(const MbmSampler *sampler);

/**
 * Writes path `path_index` of the stream seeded by `seed` into `out[0..=n]`.
 * The same `(seed, n, path_index)` always yields the same path.
 *
 * # Safety
 * `out` must point to `len` writable doubles.
 */
MbmStatus mbm_sampler_sample(const MbmSampler *sampler,
                             uint64_t seed,
                             uint64_t path_index,
                             double *out,
                             size_t len);

/**
 * # Safety
 * `sampler` must be NULL or a handle from this library, not used afterwards.
 */
void mbm_sampler_free(MbmSampler *sampler);

/**
 * Runs the convergence study described by the TOML text `config` and returns
 * the report as JSON in `*out_json` (free with [`mbm_string_free`]).
 * `threads = 0` keeps the default pool. `*out_passed` receives the overall
 * verdict; a failing verdict still returns `MBM_STATUS_OK`.
 *
 * # Safety
 * `config` must be a NUL-terminated string; out-pointers NULL or writable.
 */
MbmStatus mbm_converge_toml(const char *config, size_t threads, char **out_json, bool *out_passed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MBM_H */
