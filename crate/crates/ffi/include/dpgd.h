#ifndef DPGD_H
#define DPGD_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible call.
 */
typedef enum DpgdStatus {
  DPGD_STATUS_OK = 0,
  DPGD_STATUS_NULL_POINTER = 1,
  /**
   * Argument out of domain or invalid configuration.
   */
  DPGD_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Numerical failure (instability, divergence, infinite privacy loss).
   */
  DPGD_STATUS_NUMERICAL = 3,
  /**
   * Caller buffer shorter than required.
   */
  DPGD_STATUS_BUFFER_TOO_SMALL = 4,
  /**
   * A Rust panic was caught at the boundary.
   */
  DPGD_STATUS_PANIC = 5,
} DpgdStatus;

/**
 * Spectrum families for [`dpgd_spectrum_eigenvalues`].
 */
typedef enum DpgdSpectrum {
  DPGD_SPECTRUM_IDENTITY = 0,
  DPGD_SPECTRUM_UNIFORM02 = 1,
  DPGD_SPECTRUM_POWER_LAW = 2,
} DpgdSpectrum;

/**
 * Solved risk curve handle.
 */
typedef struct DpgdCurve DpgdCurve;

/**
 * ODE problem handle.
 */
typedef struct DpgdProblem DpgdProblem;

/**
 * Learning-rate schedule handle.
 */
typedef struct DpgdSchedule DpgdSchedule;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread. The pointer stays valid until the next
 * failing call on the same thread.
 */
const char *dpgd_last_error(void);

/**
 * Descent reduction factor for clipping constant `c` at excess risk `r`.
 *
 * # Safety
 * `out` must be a valid pointer to a `double`.
 */
enum DpgdStatus dpgd_mu_c(double c, double r, double zeta, double *out);

/**
 * Variance reduction factor for clipping constant `c` at excess risk `r`.
 *
 * # Safety
 * `out` must be a valid pointer to a `double`.
 */
enum DpgdStatus dpgd_nu_c(double c, double r, double zeta, double *out);

/**
 * Fills `eta[0..n]` and `sigma[0..n]` with the per-step learning rates and noise levels
 * that give `rho`-zCDP for `n` steps of `schedule`.
 *
 * # Safety
 * `eta` and `sigma` must each point to at least `len` writable doubles.
 */
enum DpgdStatus dpgd_noise_schedule(const struct DpgdSchedule *schedule,
                                    uintptr_t n,
                                    double rho,
                                    double *eta,
                                    double *sigma,
                                    uintptr_t len);

/**
 * zCDP level of a run with the given step sizes and noise levels.
 *
 * # Safety
 * `eta` and `sigma` must point to `len` readable doubles; `out` to a writable double.
 */
enum DpgdStatus dpgd_accountant_rho(const double *eta,
                                    const double *sigma,
                                    uintptr_t len,
                                    double *out);

/**
 * `epsilon` of the `(epsilon, delta)`-DP guarantee implied by `rho`-zCDP.
 *
 * # Safety
 * `out` must be a valid pointer to a `double`.
 */
enum DpgdStatus dpgd_zcdp_to_dp(double rho, double delta, double *out);

/**
 * # Safety
 * `out` must be a valid pointer; the handle is released with [`dpgd_schedule_free`].
 */
enum DpgdStatus dpgd_schedule_constant(double eta0, struct DpgdSchedule **out);

/**
 * `eta(t) = eta0 (1 - t)^alpha`.
 *
 * # Safety
 * As for [`dpgd_schedule_constant`].
 */
enum DpgdStatus dpgd_schedule_polynomial(double eta0, double alpha, struct DpgdSchedule **out);

/**
 * `eta(t) = beta / (t + tau)`.
 *
 * # Safety
 * As for [`dpgd_schedule_constant`].
 */
enum DpgdStatus dpgd_schedule_harmonic(double beta, double tau, struct DpgdSchedule **out);

/**
 * Learning rate `eta(t)` for `t` in `[0, 1]`.
 *
 * # Safety
 * `schedule` must be a live handle and `out` a valid pointer.
 */
enum DpgdStatus dpgd_schedule_eta(const struct DpgdSchedule *schedule, double t, double *out);

/**
 * # Safety
 * `schedule` must be null or a handle not freed before.
 */
void dpgd_schedule_free(struct DpgdSchedule *schedule);

/**
 * Writes the `d` eigenvalues (descending, summing to `d`) of a spectrum family into
 * `values`. `phi` is only read for the power law.
 *
 * # Safety
 * `values` must point to at least `len` writable doubles.
 */
enum DpgdStatus dpgd_spectrum_eigenvalues(enum DpgdSpectrum kind,
                                          double phi,
                                          uintptr_t d,
                                          double *values,
                                          uintptr_t len);

/**
 * Builds an ODE problem from `d` eigenvalues and initial mode energies. The schedule is
 * copied, so the schedule handle may be freed afterwards.
 *
 * # Safety
 * `lambda` and `d0` must point to `d` readable doubles, `schedule` must be a live handle
 * and `out` a valid pointer. Release the result with [`dpgd_problem_free`].
 */
enum DpgdStatus dpgd_problem_new(const double *lambda,
                                 const double *d0,
                                 uintptr_t d,
                                 const struct DpgdSchedule *schedule,
                                 double c,
                                 double rho,
                                 double gamma,
                                 double zeta,
                                 struct DpgdProblem **out);

/**
 * Initial excess risk `R(0)`.
 *
 * # Safety
 * `problem` must be a live handle and `out` a valid pointer.
 */
enum DpgdStatus dpgd_problem_initial_risk(const struct DpgdProblem *problem, double *out);

/**
 * # Safety
 * `problem` must be null or a handle not freed before.
 */
void dpgd_problem_free(struct DpgdProblem *problem);

/**
 * Integrates the risk ODE on a uniform grid of step `dt`.
 *
 * # Safety
 * `problem` must be a live handle and `out` a valid pointer. Release the result with
 * [`dpgd_curve_free`].
 */
enum DpgdStatus dpgd_integrate(const struct DpgdProblem *problem,
                               double dt,
                               struct DpgdCurve **out);

/**
 * Number of grid points of a curve (0 for a null handle).
 *
 * # Safety
 * `curve` must be null or a live handle.
 */
uintptr_t dpgd_curve_len(const struct DpgdCurve *curve);

/**
 * Copies the grid and the risk values into caller buffers of length `len`.
 *
 * # Safety
 * `t` and `r` must point to at least `len` writable doubles.
 */
enum DpgdStatus dpgd_curve_copy(const struct DpgdCurve *curve, double *t, double *r, uintptr_t len);

/**
 * Interpolated risk at `t`.
 *
 * # Safety
 * `curve` must be a live handle and `out` a valid pointer.
 */
enum DpgdStatus dpgd_curve_at(const struct DpgdCurve *curve, double t, double *out);

/**
 * Final risk of the private output including the last-iterate correction.
 *
 * # Safety
 * `curve` must be a live handle and `out` a valid pointer.
 */
enum DpgdStatus dpgd_curve_final_private_risk(const struct DpgdCurve *curve, double *out);

/**
 * # Safety
 * `curve` must be null or a handle not freed before.
 */
void dpgd_curve_free(struct DpgdCurve *curve);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DPGD_H */
