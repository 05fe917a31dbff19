//! C ABI over the `gdisc` library.
//!
//! Objects cross the boundary as opaque handles created by `*_new`-style
//! functions and released with the matching `*_free`. Every fallible call
//! returns a [`GdiscStatus`]; on failure the message is available from
//! [`gdisc_last_error`] on the same thread. Panics are caught and reported
//! as `GDISC_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use gdisc::estimand;
use gdisc::estimation::{self, Zeta};
use gdisc::{sde, Error, Grid, Mat2, ModelParams, TrajectoryPanel, TreatmentPlan};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GdiscStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidPlan = 3,
    Degenerate = 4,
    Numerical = 5,
    Config = 6,
    Io = 7,
    Panic = 8,
}

/// Model parameters (drift, diffusion, initial law, horizon).
pub struct GdiscModel(ModelParams);

/// Deterministic treatment plan on `[0, T]`.
pub struct GdiscPlan(TreatmentPlan);

/// Trajectory panel of `units × (steps + 1)` `(Y, W)` pairs.
pub struct GdiscPanel(TrajectoryPanel);

/// Result of [`gdisc_zeta`]. `zeta_defined` is false when the interval
/// excludes 0 but the full- and half-grid estimates coincide exactly; `zeta`
/// is then NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GdiscZetaReport {
    pub steps: usize,
    pub tau_hat: f64,
    pub tau_hat_half: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub zeta: f64,
    pub zeta_defined: bool,
    pub alpha: f64,
    pub bootstrap: usize,
    pub failed_bootstrap: usize,
    pub seed: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(GdiscStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::InvalidArgument(_) => GdiscStatus::InvalidArgument,
            Error::InvalidPlan(_) => GdiscStatus::InvalidPlan,
            Error::Degenerate(_) => GdiscStatus::Degenerate,
            Error::Numerical(_) => GdiscStatus::Numerical,
            Error::Config(_) => GdiscStatus::Config,
            Error::Io(_) => GdiscStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

type FfiResult<T> = Result<T, Failure>;

fn null(what: &str) -> Failure {
    Failure(GdiscStatus::NullPointer, format!("{what} is NULL"))
}

fn guard(f: impl FnOnce() -> FfiResult<()>) -> GdiscStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            GdiscStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            GdiscStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> FfiResult<&'a T> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> FfiResult<&'a [f64]> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn mat(p: *const f64, what: &str) -> FfiResult<Mat2> {
    let s = slice(p, 4, what)?;
    Ok(Mat2::new(s[0], s[1], s[2], s[3]))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> FfiResult<()> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn boxed<T>(out: *mut *mut T, value: T) -> FfiResult<()> {
    write_out(out, Box::into_raw(Box::new(value)), "output handle")
}

/// Message of the last failed call on this thread, or NULL after a success.
/// Valid until the next `gdisc_*` call on the same thread.
#[no_mangle]
pub extern "C" fn gdisc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gdisc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates a model. Matrices are row-major `[a11, a12, a21, a22]`;
/// `init_mean` is `[E Y0, E W0]`.
///
/// # Safety
/// Matrix pointers must reference 4 doubles, `init_mean` 2 doubles, and
/// `out` a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn gdisc_model_new(
    beta: *const f64,
    sigma: *const f64,
    init_mean: *const f64,
    init_cov: *const f64,
    horizon: f64,
    out: *mut *mut GdiscModel,
) -> GdiscStatus {
    guard(|| {
        let m = slice(init_mean, 2, "init_mean")?;
        let params = ModelParams::new(
            mat(beta, "beta")?,
            mat(sigma, "sigma")?,
            [m[0], m[1]],
            mat(init_cov, "init_cov")?,
            horizon,
        )?;
        boxed(out, GdiscModel(params))
    })
}

/// Reference model with the given instantaneous-effect parameter `beta12`.
///
/// # Safety
/// `out` must be a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn gdisc_model_reference(beta12: f64, out: *mut *mut GdiscModel) -> GdiscStatus {
    guard(|| {
        let p = ModelParams::reference(beta12);
        p.validate()?;
        boxed(out, GdiscModel(p))
    })
}

/// # Safety
/// `model` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gdisc_model_free(model: *mut GdiscModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `out` must be a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn gdisc_plan_constant(value: f64, out: *mut *mut GdiscPlan) -> GdiscStatus {
    guard(|| {
        if !value.is_finite() {
            return Err(Failure(GdiscStatus::InvalidPlan, "plan value must be finite".into()));
        }
        boxed(out, GdiscPlan(TreatmentPlan::constant(value)))
    })
}

/// Step plan taking `values[i]` on `[breakpoints[i], breakpoints[i+1])`.
///
/// # Safety
/// Both arrays must hold `len` doubles; `out` must be a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn gdisc_plan_piecewise(
    breakpoints: *const f64,
    values: *const f64,
    len: usize,
    out: *mut *mut GdiscPlan,
) -> GdiscStatus {
    guard(|| {
        let b = slice(breakpoints, len, "breakpoints")?.to_vec();
        let v = slice(values, len, "values")?.to_vec();
        boxed(out, GdiscPlan(TreatmentPlan::piecewise(b, v)?))
    })
}

/// Plan tabulated at `times`, held constant between knots.
///
/// # Safety
/// Both arrays must hold `len` doubles; `out` must be a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn gdisc_plan_tabulated(
    times: *const f64,
    values: *const f64,
    len: usize,
    out: *mut *mut GdiscPlan,
) -> GdiscStatus {
    guard(|| {
        let t = slice(times, len, "times")?.to_vec();
        let v = slice(values, len, "values")?.to_vec();
        boxed(out, GdiscPlan(TreatmentPlan::tabulated(t, v)?))
    })
}

/// # Safety
/// `plan` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gdisc_plan_free(plan: *mut GdiscPlan) {
    if !plan.is_null() {
        drop(Box::from_raw(plan));
    }
}

/// `e^{t m}` for a row-major 2×2 matrix.
///
/// # Safety
/// `m` and `out` must each reference 4 doubles.
#[no_mangle]
pub unsafe extern "C" fn gdisc_matexp(m: *const f64, t: f64, out: *mut f64) -> GdiscStatus {
    guard(|| {
        let m = mat(m, "m")?;
        if !m.is_finite() || !t.is_finite() {
            return Err(Failure(GdiscStatus::InvalidArgument, "matrix and t must be finite".into()));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let e = gdisc::matexp(&m, t);
        std::slice::from_raw_parts_mut(out, 4).copy_from_slice(&[e.a11, e.a12, e.a21, e.a22]);
        Ok(())
    })
}

/// True counterfactual mean `E[Y_T]` under the plan.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gdisc_true_eta(
    model: *const GdiscModel,
    plan: *const GdiscPlan,
    out: *mut f64,
) -> GdiscStatus {
    guard(|| {
        let v = estimand::true_eta(&deref(model, "model")?.0, &deref(plan, "plan")?.0)?;
        write_out(out, v, "out")
    })
}

/// Discrete-time g-formula functional on a grid of `steps` intervals.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gdisc_theta_g(
    model: *const GdiscModel,
    plan: *const GdiscPlan,
    steps: usize,
    out: *mut f64,
) -> GdiscStatus {
    guard(|| {
        let v = estimand::theta_g(&deref(model, "model")?.0, &deref(plan, "plan")?.0, steps)?;
        write_out(out, v, "out")
    })
}

/// Identification bias `θ^g_J − η`.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gdisc_identification_bias(
    model: *const GdiscModel,
    plan: *const GdiscPlan,
    steps: usize,
    out: *mut f64,
) -> GdiscStatus {
    guard(|| {
        let v = estimand::identification_bias(&deref(model, "model")?.0, &deref(plan, "plan")?.0, steps)?;
        write_out(out, v, "out")
    })
}

/// Naive-adjustment estimand at `steps >= 2` and its limit as steps grow.
///
/// # Safety
/// Handles must be live; output pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn gdisc_theta_naive(
    model: *const GdiscModel,
    plan: *const GdiscPlan,
    steps: usize,
    out_finite: *mut f64,
    out_limit: *mut f64,
) -> GdiscStatus {
    guard(|| {
        let v = estimand::theta_naive(&deref(model, "model")?.0, &deref(plan, "plan")?.0, steps)?;
        write_out(out_finite, v.finite, "out_finite")?;
        write_out(out_limit, v.limit, "out_limit")
    })
}

/// Exact observational panel of `n` units on `steps` intervals over `[0, T]`.
///
/// # Safety
/// `model` must be live; `out` must be a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn gdisc_simulate_panel(
    model: *const GdiscModel,
    steps: usize,
    n: usize,
    seed: u64,
    out: *mut *mut GdiscPanel,
) -> GdiscStatus {
    guard(|| {
        let p = &deref(model, "model")?.0;
        let grid = Grid::new(steps, p.horizon)?;
        boxed(out, GdiscPanel(sde::simulate_panel(p, &grid, n, seed)?))
    })
}

/// Counterfactual panel under `plan`; the W column holds plan values.
///
/// # Safety
/// Handles must be live; `out` must be a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn gdisc_simulate_counterfactual(
    model: *const GdiscModel,
    plan: *const GdiscPlan,
    steps: usize,
    n: usize,
    seed: u64,
    out: *mut *mut GdiscPanel,
) -> GdiscStatus {
    guard(|| {
        let p = &deref(model, "model")?.0;
        let grid = Grid::new(steps, p.horizon)?;
        let panel = sde::simulate_counterfactual(p, &deref(plan, "plan")?.0, &grid, n, seed)?;
        boxed(out, GdiscPanel(panel))
    })
}

/// Number of units, or 0 for NULL.
///
/// # Safety
/// `panel` must be NULL or live.
#[no_mangle]
pub unsafe extern "C" fn gdisc_panel_units(panel: *const GdiscPanel) -> usize {
    panel.as_ref().map_or(0, |p| p.0.units())
}

/// Number of grid intervals `J`, or 0 for NULL.
///
/// # Safety
/// `panel` must be NULL or live.
#[no_mangle]
pub unsafe extern "C" fn gdisc_panel_steps(panel: *const GdiscPanel) -> usize {
    panel.as_ref().map_or(0, |p| p.0.steps())
}

/// Copies values unit-major as `[Y0, W0, Y1, W1, ...]`; `len` must equal
/// `units * (steps + 1) * 2`.
///
/// # Safety
/// `panel` must be live; `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn gdisc_panel_copy_values(
    panel: *const GdiscPanel,
    buf: *mut f64,
    len: usize,
) -> GdiscStatus {
    guard(|| {
        let vals = deref(panel, "panel")?.0.values();
        if len != vals.len() {
            return Err(Failure(
                GdiscStatus::InvalidArgument,
                format!("buffer holds {len} values, panel has {}", vals.len()),
            ));
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        std::slice::from_raw_parts_mut(buf, len).copy_from_slice(vals);
        Ok(())
    })
}

/// Writes the panel as `unit,k,t,Y,W` CSV.
///
/// # Safety
/// `panel` must be live; `path` must be a NUL-terminated UTF-8 string.
#[no_mangle]
pub unsafe extern "C" fn gdisc_panel_write_csv(panel: *const GdiscPanel, path: *const c_char) -> GdiscStatus {
    guard(|| {
        let panel = &deref(panel, "panel")?.0;
        if path.is_null() {
            return Err(null("path"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| Failure(GdiscStatus::InvalidArgument, "path is not valid UTF-8".into()))?;
        let file = std::fs::File::create(path).map_err(Error::from)?;
        panel.write_csv(std::io::BufWriter::new(file))?;
        Ok(())
    })
}

/// # Safety
/// `panel` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gdisc_panel_free(panel: *mut GdiscPanel) {
    if !panel.is_null() {
        drop(Box::from_raw(panel));
    }
}

/// Plug-in g-formula contrast between two plans.
///
/// # Safety
/// Handles must be live; `out_tau` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gdisc_estimate_contrast(
    panel: *const GdiscPanel,
    plan_star: *const GdiscPlan,
    plan_base: *const GdiscPlan,
    out_tau: *mut f64,
) -> GdiscStatus {
    guard(|| {
        let est = estimation::estimate_contrast(
            &deref(panel, "panel")?.0,
            &deref(plan_star, "plan_star")?.0,
            &deref(plan_base, "plan_base")?.0,
        )?;
        write_out(out_tau, est.tau_hat, "out_tau")
    })
}

/// Discretization sensitivity on a panel with an even number of steps.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gdisc_zeta(
    panel: *const GdiscPanel,
    plan_star: *const GdiscPlan,
    plan_base: *const GdiscPlan,
    replicates: usize,
    alpha: f64,
    seed: u64,
    out: *mut GdiscZetaReport,
) -> GdiscStatus {
    guard(|| {
        let r = estimation::zeta(
            &deref(panel, "panel")?.0,
            &deref(plan_star, "plan_star")?.0,
            &deref(plan_base, "plan_base")?.0,
            replicates,
            alpha,
            seed,
        )?;
        let (zeta, zeta_defined) = match r.zeta {
            Zeta::Value(v) => (v, true),
            Zeta::UndefinedDenominator => (f64::NAN, false),
        };
        let report = GdiscZetaReport {
            steps: r.steps,
            tau_hat: r.tau_hat,
            tau_hat_half: r.tau_hat_half,
            ci_lower: r.ci_lower,
            ci_upper: r.ci_upper,
            zeta,
            zeta_defined,
            alpha: r.alpha,
            bootstrap: r.bootstrap,
            failed_bootstrap: r.failed_bootstrap,
            seed: r.seed,
        };
        write_out(out, report, "out")
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_is_cleared_by_success() {
        let mut plan = ptr::null_mut();
        unsafe {
            assert_eq!(gdisc_plan_constant(f64::NAN, &mut plan), GdiscStatus::InvalidPlan);
            assert!(!gdisc_last_error().is_null());
            assert_eq!(gdisc_plan_constant(1.0, &mut plan), GdiscStatus::Ok);
            assert!(gdisc_last_error().is_null());
            gdisc_plan_free(plan);
        }
    }

    #[test]
    fn null_output_is_reported() {
        let status = unsafe { gdisc_model_reference(-5.0, ptr::null_mut()) };
        assert_eq!(status, GdiscStatus::NullPointer);
    }

    #[test]
    fn version_matches_crate() {
        let v = unsafe { CStr::from_ptr(gdisc_version()) };
        assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    }
}
