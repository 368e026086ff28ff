//! C ABI over the `dpgd` library.
//!
//! Objects are exposed as opaque handles created by `*_new` style constructors and
//! released with the matching `*_free`. Every fallible function returns a
//! [`DpgdStatus`] and writes results through out-pointers; on failure the message is
//! available from [`dpgd_last_error`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

use dpgd::clipping;
use dpgd::ode::{self, OdeProblem, RiskCurve};
use dpgd::privacy;
use dpgd::schedule::Schedule;
use dpgd::spectrum::SpectrumModel;
use dpgd::Error;

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DpgdStatus {
    Ok = 0,
    NullPointer = 1,
    /// Argument out of domain or invalid configuration.
    InvalidArgument = 2,
    /// Numerical failure (instability, divergence, infinite privacy loss).
    Numerical = 3,
    /// Caller buffer shorter than required.
    BufferTooSmall = 4,
    /// A Rust panic was caught at the boundary.
    Panic = 5,
}

/// Spectrum families for [`dpgd_spectrum_eigenvalues`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DpgdSpectrum {
    Identity = 0,
    Uniform02 = 1,
    PowerLaw = 2,
}

/// Learning-rate schedule handle.
pub struct DpgdSchedule(Schedule);

/// ODE problem handle.
pub struct DpgdProblem(OdeProblem);

/// Solved risk curve handle.
pub struct DpgdCurve(RiskCurve);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> DpgdStatus {
    if e.exit_code() == 3 {
        DpgdStatus::Numerical
    } else {
        DpgdStatus::InvalidArgument
    }
}

/// Runs `f`, mapping errors and panics to status codes.
fn guard(f: impl FnOnce() -> Result<(), DpgdStatusError>) -> DpgdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DpgdStatus::Ok,
        Ok(Err(DpgdStatusError(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside dpgd".into());
            DpgdStatus::Panic
        }
    }
}

struct DpgdStatusError(DpgdStatus, String);

impl From<Error> for DpgdStatusError {
    fn from(e: Error) -> Self {
        DpgdStatusError(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> DpgdStatusError {
    DpgdStatusError(DpgdStatus::NullPointer, format!("{what} is null"))
}

unsafe fn target<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, DpgdStatusError> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, DpgdStatusError> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn input<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], DpgdStatusError> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a>(p: *mut f64, len: usize, need: usize, what: &str) -> Result<&'a mut [f64], DpgdStatusError> {
    if len < need {
        return Err(DpgdStatusError(
            DpgdStatus::BufferTooSmall,
            format!("{what} holds {len} values, need {need}"),
        ));
    }
    if need == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts_mut(p, need))
}

/// Message of the last failed call on this thread. The pointer stays valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn dpgd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

// --- clipping factors and privacy ------------------------------------------------------

/// Descent reduction factor for clipping constant `c` at excess risk `r`.
///
/// # Safety
/// `out` must be a valid pointer to a `double`.
#[no_mangle]
pub unsafe extern "C" fn dpgd_mu_c(c: f64, r: f64, zeta: f64, out: *mut f64) -> DpgdStatus {
    guard(|| {
        *target(out, "out")? = clipping::mu_c(c, r, zeta)?;
        Ok(())
    })
}

/// Variance reduction factor for clipping constant `c` at excess risk `r`.
///
/// # Safety
/// `out` must be a valid pointer to a `double`.
#[no_mangle]
pub unsafe extern "C" fn dpgd_nu_c(c: f64, r: f64, zeta: f64, out: *mut f64) -> DpgdStatus {
    guard(|| {
        *target(out, "out")? = clipping::nu_c(c, r, zeta)?;
        Ok(())
    })
}

/// Fills `eta[0..n]` and `sigma[0..n]` with the per-step learning rates and noise levels
/// that give `rho`-zCDP for `n` steps of `schedule`.
///
/// # Safety
/// `eta` and `sigma` must each point to at least `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn dpgd_noise_schedule(
    schedule: *const DpgdSchedule,
    n: usize,
    rho: f64,
    eta: *mut f64,
    sigma: *mut f64,
    len: usize,
) -> DpgdStatus {
    guard(|| {
        let s = handle(schedule, "schedule")?;
        let eta = output(eta, len, n, "eta")?;
        let sigma = output(sigma, len, n, "sigma")?;
        let b = privacy::discrete_noise_schedule(&s.0, n, rho)?;
        eta.copy_from_slice(&b.eta);
        sigma.copy_from_slice(&b.sigma);
        Ok(())
    })
}

/// zCDP level of a run with the given step sizes and noise levels.
///
/// # Safety
/// `eta` and `sigma` must point to `len` readable doubles; `out` to a writable double.
#[no_mangle]
pub unsafe extern "C" fn dpgd_accountant_rho(
    eta: *const f64,
    sigma: *const f64,
    len: usize,
    out: *mut f64,
) -> DpgdStatus {
    guard(|| {
        let eta = input(eta, len, "eta")?;
        let sigma = input(sigma, len, "sigma")?;
        *target(out, "out")? = privacy::accountant_rho(eta, sigma)?;
        Ok(())
    })
}

/// `epsilon` of the `(epsilon, delta)`-DP guarantee implied by `rho`-zCDP.
///
/// # Safety
/// `out` must be a valid pointer to a `double`.
#[no_mangle]
pub unsafe extern "C" fn dpgd_zcdp_to_dp(rho: f64, delta: f64, out: *mut f64) -> DpgdStatus {
    guard(|| {
        *target(out, "out")? = privacy::zcdp_to_approx_dp(rho, delta)?;
        Ok(())
    })
}

// --- schedules -------------------------------------------------------------------------

unsafe fn new_schedule(s: Schedule, out: *mut *mut DpgdSchedule) -> DpgdStatus {
    guard(|| {
        let slot = target(out, "out")?;
        s.validate()?;
        *slot = Box::into_raw(Box::new(DpgdSchedule(s)));
        Ok(())
    })
}

/// # Safety
/// `out` must be a valid pointer; the handle is released with [`dpgd_schedule_free`].
#[no_mangle]
pub unsafe extern "C" fn dpgd_schedule_constant(eta0: f64, out: *mut *mut DpgdSchedule) -> DpgdStatus {
    new_schedule(Schedule::constant(eta0), out)
}

/// `eta(t) = eta0 (1 - t)^alpha`.
///
/// # Safety
/// As for [`dpgd_schedule_constant`].
#[no_mangle]
pub unsafe extern "C" fn dpgd_schedule_polynomial(
    eta0: f64,
    alpha: f64,
    out: *mut *mut DpgdSchedule,
) -> DpgdStatus {
    new_schedule(Schedule::polynomial(eta0, alpha), out)
}

/// `eta(t) = beta / (t + tau)`.
///
/// # Safety
/// As for [`dpgd_schedule_constant`].
#[no_mangle]
pub unsafe extern "C" fn dpgd_schedule_harmonic(beta: f64, tau: f64, out: *mut *mut DpgdSchedule) -> DpgdStatus {
    new_schedule(Schedule::harmonic(beta, tau), out)
}

/// Learning rate `eta(t)` for `t` in `[0, 1]`.
///
/// # Safety
/// `schedule` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dpgd_schedule_eta(schedule: *const DpgdSchedule, t: f64, out: *mut f64) -> DpgdStatus {
    guard(|| {
        let s = handle(schedule, "schedule")?;
        *target(out, "out")? = s.0.eta_tilde(t)?;
        Ok(())
    })
}

/// # Safety
/// `schedule` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn dpgd_schedule_free(schedule: *mut DpgdSchedule) {
    if !schedule.is_null() {
        drop(Box::from_raw(schedule));
    }
}

// --- spectra and problems --------------------------------------------------------------

/// Writes the `d` eigenvalues (descending, summing to `d`) of a spectrum family into
/// `values`. `phi` is only read for the power law.
///
/// # Safety
/// `values` must point to at least `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn dpgd_spectrum_eigenvalues(
    kind: DpgdSpectrum,
    phi: f64,
    d: usize,
    values: *mut f64,
    len: usize,
) -> DpgdStatus {
    guard(|| {
        let dst = output(values, len, d, "values")?;
        let model = match kind {
            DpgdSpectrum::Identity => SpectrumModel::identity(d),
            DpgdSpectrum::Uniform02 => SpectrumModel::uniform(d),
            DpgdSpectrum::PowerLaw => SpectrumModel::power_law(phi, d),
        };
        dst.copy_from_slice(&model.eigenvalues()?);
        Ok(())
    })
}

/// Builds an ODE problem from `d` eigenvalues and initial mode energies. The schedule is
/// copied, so the schedule handle may be freed afterwards.
///
/// # Safety
/// `lambda` and `d0` must point to `d` readable doubles, `schedule` must be a live handle
/// and `out` a valid pointer. Release the result with [`dpgd_problem_free`].
#[no_mangle]
pub unsafe extern "C" fn dpgd_problem_new(
    lambda: *const f64,
    d0: *const f64,
    d: usize,
    schedule: *const DpgdSchedule,
    c: f64,
    rho: f64,
    gamma: f64,
    zeta: f64,
    out: *mut *mut DpgdProblem,
) -> DpgdStatus {
    guard(|| {
        let slot = target(out, "out")?;
        let lambda = input(lambda, d, "lambda")?;
        let d0 = input(d0, d, "d0")?;
        let s = handle(schedule, "schedule")?;
        let p = OdeProblem::new(lambda.to_vec(), d0.to_vec(), s.0.clone(), c, rho, gamma, zeta)?;
        *slot = Box::into_raw(Box::new(DpgdProblem(p)));
        Ok(())
    })
}

/// Initial excess risk `R(0)`.
///
/// # Safety
/// `problem` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dpgd_problem_initial_risk(problem: *const DpgdProblem, out: *mut f64) -> DpgdStatus {
    guard(|| {
        let p = handle(problem, "problem")?;
        *target(out, "out")? = p.0.initial_risk();
        Ok(())
    })
}

/// # Safety
/// `problem` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn dpgd_problem_free(problem: *mut DpgdProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Integrates the risk ODE on a uniform grid of step `dt`.
///
/// # Safety
/// `problem` must be a live handle and `out` a valid pointer. Release the result with
/// [`dpgd_curve_free`].
#[no_mangle]
pub unsafe extern "C" fn dpgd_integrate(problem: *const DpgdProblem, dt: f64, out: *mut *mut DpgdCurve) -> DpgdStatus {
    guard(|| {
        let slot = target(out, "out")?;
        let p = handle(problem, "problem")?;
        if !(dt > 0.0 && dt <= 1.0) {
            return Err(Error::Domain(format!("dt must lie in (0, 1], got {dt}")).into());
        }
        let curve = ode::integrate(&p.0, &ode::uniform_grid(dt))?;
        *slot = Box::into_raw(Box::new(DpgdCurve(curve)));
        Ok(())
    })
}

// --- curves ----------------------------------------------------------------------------

/// Number of grid points of a curve (0 for a null handle).
///
/// # Safety
/// `curve` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dpgd_curve_len(curve: *const DpgdCurve) -> usize {
    curve.as_ref().map_or(0, |c| c.0.grid.len())
}

/// Copies the grid and the risk values into caller buffers of length `len`.
///
/// # Safety
/// `t` and `r` must point to at least `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn dpgd_curve_copy(curve: *const DpgdCurve, t: *mut f64, r: *mut f64, len: usize) -> DpgdStatus {
    guard(|| {
        let c = handle(curve, "curve")?;
        let need = c.0.grid.len();
        output(t, len, need, "t")?.copy_from_slice(&c.0.grid);
        output(r, len, need, "r")?.copy_from_slice(&c.0.r);
        Ok(())
    })
}

/// Interpolated risk at `t`.
///
/// # Safety
/// `curve` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dpgd_curve_at(curve: *const DpgdCurve, t: f64, out: *mut f64) -> DpgdStatus {
    guard(|| {
        let c = handle(curve, "curve")?;
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Domain(format!("time must lie in [0, 1], got {t}")).into());
        }
        *target(out, "out")? = c.0.at(t);
        Ok(())
    })
}

/// Final risk of the private output including the last-iterate correction.
///
/// # Safety
/// `curve` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dpgd_curve_final_private_risk(curve: *const DpgdCurve, out: *mut f64) -> DpgdStatus {
    guard(|| {
        let c = handle(curve, "curve")?;
        *target(out, "out")? = c.0.final_private_risk;
        Ok(())
    })
}

/// # Safety
/// `curve` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn dpgd_curve_free(curve: *mut DpgdCurve) {
    if !curve.is_null() {
        drop(Box::from_raw(curve));
    }
}
