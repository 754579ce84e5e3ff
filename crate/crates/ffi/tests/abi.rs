use std::ffi::CStr;
use std::ptr;

use sparse_pwl_ffi::*;

fn samples(x: &[f64], y: &[f64]) -> *mut SpwlSamples {
    let mut s = ptr::null_mut();
    let st = unsafe { spwl_samples_new(x.as_ptr(), y.as_ptr(), x.len(), &mut s) };
    assert_eq!(st, SpwlStatus::Ok);
    s
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(spwl_last_error()) }.to_string_lossy().into_owned()
}

fn knots(f: *const SpwlSpline) -> (Vec<f64>, Vec<f64>) {
    let n = unsafe { spwl_spline_knot_count(f) };
    let (mut tau, mut a) = (vec![0.0; n], vec![0.0; n]);
    let mut len = 0;
    let st = unsafe { spwl_spline_knots(f, tau.as_mut_ptr(), a.as_mut_ptr(), n, &mut len) };
    assert_eq!(st, SpwlStatus::Ok);
    assert_eq!(len, n);
    (tau, a)
}

const TX: [f64; 4] = [0.0, 1.0, 2.0, 3.0];
const TY: [f64; 4] = [0.0, 1.0, 1.0, 0.0];

#[test]
fn tent_interpolation() {
    let s = samples(&TX, &TY);
    unsafe {
        assert_eq!(spwl_samples_len(s), 4);
        let mut c = ptr::null_mut();
        assert_eq!(spwl_canonical_interpolant(s, &mut c), SpwlStatus::Ok);
        assert_eq!(knots(c), (vec![1.0, 2.0], vec![-1.0, -1.0]));
        assert_eq!(spwl_spline_tv(c), 2.0);

        let mut sum = SpwlSaturationSummary { unique: true, min_sparsity: 0, dof: 0, run_count: 0 };
        assert_eq!(spwl_saturation_summary(s, &mut sum), SpwlStatus::Ok);
        assert!(!sum.unique);
        assert_eq!((sum.min_sparsity, sum.run_count), (1, 1));
        let mut runs = [SpwlRun { start: 0, alpha: 0, sign: 0 }; 1];
        let mut len = 0;
        assert_eq!(spwl_saturation_runs(s, runs.as_mut_ptr(), 1, &mut len), SpwlStatus::Ok);
        assert_eq!((runs[0].start, runs[0].alpha, runs[0].sign), (1, 1, -1));

        let mut f = ptr::null_mut();
        assert_eq!(spwl_sparsest_solution(s, ptr::null(), ptr::null(), 0, &mut f), SpwlStatus::Ok);
        assert_eq!(knots(f), (vec![1.5], vec![-2.0]));
        assert_eq!(spwl_spline_eval(f, 1.5), 1.5);
        assert_eq!((spwl_spline_b0(f), spwl_spline_b1(f)), (0.0, 1.0));

        let mut passed = false;
        assert_eq!(spwl_verify(s, f, 1e-9, &mut passed), SpwlStatus::Ok);
        assert!(passed);
        assert_eq!(spwl_verify(s, c, 1e-9, &mut passed), SpwlStatus::Ok);
        assert!(passed);

        spwl_spline_free(c);
        spwl_spline_free(f);
        spwl_samples_free(s);
    }
}

#[test]
fn free_knot_choice_moves_the_knot() {
    // an even run: three collinear interior kinks of the same sign
    let x = [0.0, 1.0, 2.0, 3.0, 4.0];
    let y = [0.0, 1.0, 1.5, 1.5, 1.0];
    let s = samples(&x, &y);
    unsafe {
        let mut sum = SpwlSaturationSummary { unique: true, min_sparsity: 0, dof: 0, run_count: 0 };
        spwl_saturation_summary(s, &mut sum);
        assert_eq!(sum.dof, 1);
        let (mut f0, mut f1) = (ptr::null_mut(), ptr::null_mut());
        let run = [0usize];
        assert_eq!(spwl_sparsest_solution(s, run.as_ptr(), [0.0].as_ptr(), 1, &mut f0), SpwlStatus::Ok);
        assert_eq!(spwl_sparsest_solution(s, run.as_ptr(), [1.0].as_ptr(), 1, &mut f1), SpwlStatus::Ok);
        assert_ne!(knots(f0).0, knots(f1).0);
        for f in [f0, f1] {
            let mut passed = false;
            spwl_verify(s, f, 1e-9, &mut passed);
            assert!(passed);
            spwl_spline_free(f);
        }
        let mut bad = ptr::null_mut();
        assert_eq!(
            spwl_sparsest_solution(s, run.as_ptr(), [1.5].as_ptr(), 1, &mut bad),
            SpwlStatus::InvalidChoice
        );
        assert!(bad.is_null());
        spwl_samples_free(s);
    }
}

#[test]
fn penalized_fit() {
    let x = [0.0, 1.0, 2.0, 3.0];
    let y = [0.0, 1.0, 0.0, 2.0];
    let s = samples(&x, &y);
    unsafe {
        let mut lm = 0.0;
        assert_eq!(spwl_lambda_max(s, &mut lm), SpwlStatus::Ok);
        assert!(lm > 0.0);

        let mut fit = ptr::null_mut();
        assert_eq!(spwl_fit(s, 2.0 * lm, ptr::null(), &mut fit), SpwlStatus::Ok);
        let mut sum = std::mem::zeroed::<SpwlFitSummary>();
        assert_eq!(spwl_fit_summary(fit, &mut sum), SpwlStatus::Ok);
        assert!(sum.converged);
        assert_eq!(sum.sparsity, 0);
        let mut vals = [0.0; 4];
        let mut len = 0;
        assert_eq!(spwl_fit_values(fit, vals.as_mut_ptr(), 4, &mut len), SpwlStatus::Ok);
        // least squares line 0.5 x
        for (v, t) in vals.iter().zip(x) {
            assert!((v - 0.5 * t).abs() < 1e-7);
        }
        let mut f = ptr::null_mut();
        assert_eq!(spwl_fit_spline(fit, &mut f), SpwlStatus::Ok);
        assert!((spwl_spline_b1(f) - 0.5).abs() < 1e-7);
        spwl_spline_free(f);
        spwl_fit_free(fit);

        let mut opts = spwl_solver_options_default();
        opts.max_iter = 2;
        opts.polish = false;
        let mut fit = ptr::null_mut();
        assert_eq!(spwl_fit(s, 0.1 * lm, &opts, &mut fit), SpwlStatus::Unconverged);
        assert!(!fit.is_null());
        spwl_fit_free(fit);
        spwl_samples_free(s);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut s = ptr::null_mut();
        let x = [0.0, 1.0, 1.0];
        let y = [0.0; 3];
        assert_eq!(spwl_samples_new(x.as_ptr(), y.as_ptr(), 3, &mut s), SpwlStatus::InvalidInput);
        assert!(s.is_null());
        assert!(last_error().contains("increasing"), "{}", last_error());

        assert_eq!(spwl_samples_new(ptr::null(), y.as_ptr(), 3, &mut s), SpwlStatus::NullPointer);
        let mut lm = 0.0;
        assert_eq!(spwl_lambda_max(ptr::null(), &mut lm), SpwlStatus::NullPointer);
        assert!(spwl_spline_eval(ptr::null(), 0.0).is_nan());

        let s = samples(&TX, &TY);
        let mut fit = ptr::null_mut();
        assert_eq!(spwl_fit(s, -1.0, ptr::null(), &mut fit), SpwlStatus::InvalidInput);
        let mut c = ptr::null_mut();
        spwl_canonical_interpolant(s, &mut c);
        let mut tau = [0.0; 1];
        let mut a = [0.0; 1];
        let mut len = 0;
        assert_eq!(
            spwl_spline_knots(c, tau.as_mut_ptr(), a.as_mut_ptr(), 1, &mut len),
            SpwlStatus::BufferTooSmall
        );
        assert_eq!(len, 2);
        spwl_spline_free(c);
        spwl_samples_free(s);

        let mut f = ptr::null_mut();
        let tau = [1.0, 1.0];
        let w = [1.0, 2.0];
        assert_ne!(spwl_spline_new(0.0, 0.0, tau.as_ptr(), w.as_ptr(), 2, &mut f), SpwlStatus::Ok);
    }
}
