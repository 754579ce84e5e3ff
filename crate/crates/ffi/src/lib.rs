//! C ABI over `sparse-pwl`.
//!
//! Objects cross the boundary as opaque handles created by `spwl_*_new` or
//! returned through out-parameters, and released with the matching
//! `spwl_*_free`. Every fallible call returns a [`SpwlStatus`]; on failure a
//! message is available from [`spwl_last_error`] on the same thread.
//! Array arguments are `(pointer, length)` pairs and are only read during the
//! call.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use sparse_pwl::{
    analyze_saturations, canonical_certificate, canonical_interpolant, fit, lambda_max, sparsest_solution,
    verify_solution, Error, Fit, FitOptions, Knot, PwlSpline, RunChoice, RunChoices, SampleSet,
    SolverOptions,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpwlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    InvalidMerge = 3,
    InvalidChoice = 4,
    DegenerateGeometry = 5,
    /// The solver stopped before reaching its tolerance. Outputs are still
    /// written and must be freed.
    Unconverged = 6,
    /// An output buffer was shorter than the required length, which is
    /// reported through the length out-parameter.
    BufferTooSmall = 7,
    Panic = 8,
}

/// Strictly increasing sample locations with their values.
pub struct SpwlSamples(SampleSet);

/// A continuous piecewise-linear function `b0 + b1 x + sum a_k (x - tau_k)_+`.
pub struct SpwlSpline(PwlSpline);

/// Result of a penalized fit.
pub struct SpwlFit(Fit);

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SpwlRun {
    /// Index of the first sample in the run (0-based).
    pub start: usize,
    pub alpha: usize,
    pub sign: i8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SpwlSaturationSummary {
    pub unique: bool,
    pub min_sparsity: usize,
    pub dof: usize,
    pub run_count: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SpwlSolverOptions {
    pub rho: f64,
    pub max_iter: usize,
    /// Applied to the primal, dual and optimality tolerances alike.
    pub tol: f64,
    pub adaptive_rho: bool,
    pub polish: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SpwlFitSummary {
    pub lambda: f64,
    pub sparsity: usize,
    pub loss_l2: f64,
    pub objective: f64,
    pub tv: f64,
    pub iterations: usize,
    pub kkt_residual: f64,
    pub converged: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let mut bytes = msg.into().into_bytes();
    bytes.retain(|&b| b != 0);
    let c = CString::new(bytes).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn fail(e: Error) -> SpwlStatus {
    let status = match &e {
        Error::InvalidInput(_) | Error::Io(_) => SpwlStatus::InvalidInput,
        Error::InvalidMerge { .. } => SpwlStatus::InvalidMerge,
        Error::InvalidChoice(_) => SpwlStatus::InvalidChoice,
        Error::DegenerateGeometry(_) => SpwlStatus::DegenerateGeometry,
    };
    set_error(e.to_string());
    status
}

fn null(what: &str) -> SpwlStatus {
    set_error(format!("{what} is null"));
    SpwlStatus::NullPointer
}

fn guard(f: impl FnOnce() -> SpwlStatus) -> SpwlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            SpwlStatus::Panic
        }
    }
}

/// Empty slices may come with a null pointer.
unsafe fn slice<'a, T>(p: *const T, n: usize) -> Option<&'a [T]> {
    if n == 0 {
        Some(&[])
    } else if p.is_null() {
        None
    } else {
        Some(std::slice::from_raw_parts(p, n))
    }
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

/// Copies `src` into `(dst, cap)` and stores `src.len()` in `len`.
unsafe fn copy_out<T: Copy>(src: &[T], dst: *mut T, cap: usize, len: *mut usize) -> SpwlStatus {
    if !len.is_null() {
        *len = src.len();
    }
    if src.is_empty() {
        return SpwlStatus::Ok;
    }
    if cap < src.len() {
        set_error(format!("buffer holds {cap} values but {} are needed", src.len()));
        return SpwlStatus::BufferTooSmall;
    }
    if dst.is_null() {
        return null("output buffer");
    }
    ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len());
    SpwlStatus::Ok
}

/// Message for the last failed call on this thread. The pointer stays valid
/// until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn spwl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// # Safety
/// `x` and `y` must point to `n` readable values, `out` to writable storage.
#[no_mangle]
pub unsafe extern "C" fn spwl_samples_new(
    x: *const f64,
    y: *const f64,
    n: usize,
    out: *mut *mut SpwlSamples,
) -> SpwlStatus {
    guard(|| {
        if out.is_null() {
            return null("out");
        }
        let (Some(x), Some(y)) = (slice(x, n), slice(y, n)) else {
            return null("x or y");
        };
        match SampleSet::new(x.to_vec(), y.to_vec()) {
            Ok(s) => {
                *out = boxed(SpwlSamples(s));
                SpwlStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `s` must be null or a handle from `spwl_samples_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn spwl_samples_free(s: *mut SpwlSamples) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// # Safety
/// `s` must be a live handle or null (which yields 0).
#[no_mangle]
pub unsafe extern "C" fn spwl_samples_len(s: *const SpwlSamples) -> usize {
    s.as_ref().map_or(0, |s| s.0.len())
}

/// # Safety
/// `b0`/`b1` are plain values; `tau` and `a` must hold `n` values.
#[no_mangle]
pub unsafe extern "C" fn spwl_spline_new(
    b0: f64,
    b1: f64,
    tau: *const f64,
    a: *const f64,
    n: usize,
    out: *mut *mut SpwlSpline,
) -> SpwlStatus {
    guard(|| {
        if out.is_null() {
            return null("out");
        }
        let (Some(tau), Some(a)) = (slice(tau, n), slice(a, n)) else {
            return null("tau or a");
        };
        let knots = tau.iter().zip(a).map(|(&t, &w)| Knot::new(t, w)).collect();
        match PwlSpline::new(b0, b1, knots) {
            Ok(f) => {
                *out = boxed(SpwlSpline(f));
                SpwlStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `f` must be null or a spline handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn spwl_spline_free(f: *mut SpwlSpline) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// Returns NaN for a null handle.
///
/// # Safety
/// `f` must be a live spline handle or null.
#[no_mangle]
pub unsafe extern "C" fn spwl_spline_eval(f: *const SpwlSpline, x: f64) -> f64 {
    f.as_ref().map_or(f64::NAN, |f| f.0.eval(x))
}

/// # Safety
/// `xs` and `out` must each hold `n` values.
#[no_mangle]
pub unsafe extern "C" fn spwl_spline_eval_many(
    f: *const SpwlSpline,
    xs: *const f64,
    n: usize,
    out: *mut f64,
) -> SpwlStatus {
    guard(|| {
        let Some(f) = f.as_ref() else { return null("spline") };
        let Some(xs) = slice(xs, n) else { return null("xs") };
        copy_out(&f.0.eval_many(xs), out, n, ptr::null_mut())
    })
}

/// Total variation of the derivative, `sum |a_k|`. NaN for a null handle.
///
/// # Safety
/// `f` must be a live spline handle or null.
#[no_mangle]
pub unsafe extern "C" fn spwl_spline_tv(f: *const SpwlSpline) -> f64 {
    f.as_ref().map_or(f64::NAN, |f| f.0.tv_norm())
}

/// # Safety
/// `f` must be a live spline handle or null.
#[no_mangle]
pub unsafe extern "C" fn spwl_spline_b0(f: *const SpwlSpline) -> f64 {
    f.as_ref().map_or(f64::NAN, |f| f.0.b0())
}

/// # Safety
/// `f` must be a live spline handle or null.
#[no_mangle]
pub unsafe extern "C" fn spwl_spline_b1(f: *const SpwlSpline) -> f64 {
    f.as_ref().map_or(f64::NAN, |f| f.0.b1())
}

/// # Safety
/// `f` must be a live spline handle or null.
#[no_mangle]
pub unsafe extern "C" fn spwl_spline_knot_count(f: *const SpwlSpline) -> usize {
    f.as_ref().map_or(0, |f| f.0.sparsity())
}

/// Writes knot locations and weights, sorted by location, into buffers of
/// capacity `cap`. `len` receives the knot count either way.
///
/// # Safety
/// `tau` and `a` must hold `cap` writable values; `len` may be null.
#[no_mangle]
pub unsafe extern "C" fn spwl_spline_knots(
    f: *const SpwlSpline,
    tau: *mut f64,
    a: *mut f64,
    cap: usize,
    len: *mut usize,
) -> SpwlStatus {
    guard(|| {
        let Some(f) = f.as_ref() else { return null("spline") };
        let taus: Vec<f64> = f.0.knots().iter().map(|k| k.tau).collect();
        let weights: Vec<f64> = f.0.knots().iter().map(|k| k.a).collect();
        match copy_out(&taus, tau, cap, len) {
            SpwlStatus::Ok => copy_out(&weights, a, cap, len),
            other => other,
        }
    })
}

/// The minimum-TV interpolant whose knots sit at the interior samples.
///
/// # Safety
/// `s` must be a live samples handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn spwl_canonical_interpolant(
    s: *const SpwlSamples,
    out: *mut *mut SpwlSpline,
) -> SpwlStatus {
    guard(|| {
        let Some(s) = s.as_ref() else { return null("samples") };
        if out.is_null() {
            return null("out");
        }
        *out = boxed(SpwlSpline(canonical_interpolant(&s.0)));
        SpwlStatus::Ok
    })
}

/// A sparsest minimum-TV interpolant. The run at position `run[i]` of
/// `spwl_saturation_runs` places its free knot at parameter `t[i]` in
/// `[0, 1]`; unlisted runs use `t = 0`. Runs without a free knot ignore
/// their entry.
///
/// # Safety
/// `run` and `t` must hold `n_choices` values.
#[no_mangle]
pub unsafe extern "C" fn spwl_sparsest_solution(
    s: *const SpwlSamples,
    run: *const usize,
    t: *const f64,
    n_choices: usize,
    out: *mut *mut SpwlSpline,
) -> SpwlStatus {
    guard(|| {
        let Some(s) = s.as_ref() else { return null("samples") };
        if out.is_null() {
            return null("out");
        }
        let (Some(runs), Some(ts)) = (slice(run, n_choices), slice(t, n_choices)) else {
            return null("run or t");
        };
        let mut choices = RunChoices::new();
        for (&n, &t) in runs.iter().zip(ts) {
            match RunChoice::new(t) {
                Ok(c) => choices.insert(n, c),
                Err(e) => return fail(e),
            };
        }
        match sparsest_solution(&s.0, &choices) {
            Ok(f) => {
                *out = boxed(SpwlSpline(f));
                SpwlStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `s` must be a live samples handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn spwl_saturation_summary(
    s: *const SpwlSamples,
    out: *mut SpwlSaturationSummary,
) -> SpwlStatus {
    guard(|| {
        let Some(s) = s.as_ref() else { return null("samples") };
        if out.is_null() {
            return null("out");
        }
        let r = analyze_saturations(&canonical_certificate(&s.0));
        *out = SpwlSaturationSummary {
            unique: r.unique,
            min_sparsity: r.min_sparsity,
            dof: r.dof,
            run_count: r.runs.len(),
        };
        SpwlStatus::Ok
    })
}

/// # Safety
/// `runs` must hold `cap` writable entries; `len` may be null.
#[no_mangle]
pub unsafe extern "C" fn spwl_saturation_runs(
    s: *const SpwlSamples,
    runs: *mut SpwlRun,
    cap: usize,
    len: *mut usize,
) -> SpwlStatus {
    guard(|| {
        let Some(s) = s.as_ref() else { return null("samples") };
        let r = analyze_saturations(&canonical_certificate(&s.0));
        let v: Vec<SpwlRun> =
            r.runs.iter().map(|q| SpwlRun { start: q.start, alpha: q.alpha, sign: q.sign }).collect();
        copy_out(&v, runs, cap, len)
    })
}

/// Checks whether `f` is a minimum-TV interpolant of `s` within `tol`.
///
/// # Safety
/// Handles must be live; `passed` writable.
#[no_mangle]
pub unsafe extern "C" fn spwl_verify(
    s: *const SpwlSamples,
    f: *const SpwlSpline,
    tol: f64,
    passed: *mut bool,
) -> SpwlStatus {
    guard(|| {
        let (Some(s), Some(f)) = (s.as_ref(), f.as_ref()) else {
            return null("samples or spline");
        };
        if passed.is_null() {
            return null("passed");
        }
        if !(tol >= 0.0 && tol.is_finite()) {
            set_error(format!("tolerance must be finite and nonnegative, got {tol}"));
            return SpwlStatus::InvalidInput;
        }
        *passed = verify_solution(&s.0, &f.0, tol).passed;
        SpwlStatus::Ok
    })
}

/// Smallest penalty at which the fit is the least-squares line.
///
/// # Safety
/// `s` must be a live samples handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn spwl_lambda_max(s: *const SpwlSamples, out: *mut f64) -> SpwlStatus {
    guard(|| {
        let Some(s) = s.as_ref() else { return null("samples") };
        if out.is_null() {
            return null("out");
        }
        *out = lambda_max(&s.0);
        SpwlStatus::Ok
    })
}

#[no_mangle]
pub extern "C" fn spwl_solver_options_default() -> SpwlSolverOptions {
    let d = SolverOptions::default();
    SpwlSolverOptions {
        rho: d.rho,
        max_iter: d.max_iter,
        tol: d.tol_kkt,
        adaptive_rho: d.adaptive_rho,
        polish: d.polish,
    }
}

/// Penalized least-squares fit followed by sparsification. `opts` may be
/// null for defaults. Returns `Unconverged` with a valid handle in `out`
/// when the solver hit its iteration limit.
///
/// # Safety
/// `s` must be a live samples handle, `opts` null or readable, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn spwl_fit(
    s: *const SpwlSamples,
    lambda: f64,
    opts: *const SpwlSolverOptions,
    out: *mut *mut SpwlFit,
) -> SpwlStatus {
    guard(|| {
        let Some(s) = s.as_ref() else { return null("samples") };
        if out.is_null() {
            return null("out");
        }
        let o = opts.as_ref().copied().unwrap_or_else(|| spwl_solver_options_default());
        let solver = SolverOptions {
            rho: o.rho,
            max_iter: o.max_iter,
            tol_primal: o.tol,
            tol_dual: o.tol,
            tol_kkt: o.tol,
            adaptive_rho: o.adaptive_rho,
            polish: o.polish,
            warm_start: None,
        };
        let opts = FitOptions { solver, ..FitOptions::default() };
        match fit(&s.0, lambda, &opts) {
            Ok(f) => {
                let converged = f.solver.converged;
                *out = boxed(SpwlFit(f));
                if converged {
                    SpwlStatus::Ok
                } else {
                    set_error(format!("solver did not converge at lambda = {lambda}"));
                    SpwlStatus::Unconverged
                }
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `f` must be null or a fit handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn spwl_fit_free(f: *mut SpwlFit) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// # Safety
/// `f` must be a live fit handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn spwl_fit_summary(f: *const SpwlFit, out: *mut SpwlFitSummary) -> SpwlStatus {
    guard(|| {
        let Some(f) = f.as_ref() else { return null("fit") };
        if out.is_null() {
            return null("out");
        }
        let f = &f.0;
        *out = SpwlFitSummary {
            lambda: f.lambda,
            sparsity: f.sparsity,
            loss_l2: f.loss_l2,
            objective: f.objective,
            tv: f.tv,
            iterations: f.solver.iterations,
            kkt_residual: f.solver.kkt_residual,
            converged: f.solver.converged,
        };
        SpwlStatus::Ok
    })
}

/// Fitted sample values, one per sample.
///
/// # Safety
/// `out` must hold `cap` writable values; `len` may be null.
#[no_mangle]
pub unsafe extern "C" fn spwl_fit_values(
    f: *const SpwlFit,
    out: *mut f64,
    cap: usize,
    len: *mut usize,
) -> SpwlStatus {
    guard(|| {
        let Some(f) = f.as_ref() else { return null("fit") };
        copy_out(&f.0.y_lambda, out, cap, len)
    })
}

/// A new spline handle holding a copy of the fitted spline.
///
/// # Safety
/// `f` must be a live fit handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn spwl_fit_spline(f: *const SpwlFit, out: *mut *mut SpwlSpline) -> SpwlStatus {
    guard(|| {
        let Some(f) = f.as_ref() else { return null("fit") };
        if out.is_null() {
            return null("out");
        }
        *out = boxed(SpwlSpline(f.0.spline.clone()));
        SpwlStatus::Ok
    })
}
