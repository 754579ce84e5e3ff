//! Checking candidate solutions and bounding where solutions can go.
//!
//! A piecewise-linear interpolant has minimal TV exactly when each of its
//! knots sits where the canonical certificate equals the sign of the knot
//! weight. The graphs of all minimal interpolants lie in the union of the
//! canonical graph and one triangle per pair of consecutive same-sign
//! canonical knots.

use serde::{Deserialize, Serialize};

use crate::canonical::{analyze_saturations, Canonical, Certificate};
use crate::spline::{PwlSpline, SampleSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpolationViolation {
    pub index: usize,
    pub x: f64,
    pub y: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateViolation {
    pub knot: usize,
    pub tau: f64,
    pub a: f64,
    pub eta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub max_interpolation_error: f64,
    pub max_certificate_gap: f64,
    pub interpolation: Vec<InterpolationViolation>,
    pub certificate: Vec<CertificateViolation>,
}

impl std::fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "{}", if self.passed { "PASS" } else { "FAIL" })?;
        writeln!(f, "max interpolation error: {:e}", self.max_interpolation_error)?;
        writeln!(f, "max certificate gap: {:e}", self.max_certificate_gap)?;
        for v in &self.interpolation {
            writeln!(f, "  sample {} at x = {}: f(x) = {} but y = {}", v.index, v.x, v.value, v.y)?;
        }
        for v in &self.certificate {
            writeln!(
                f,
                "  knot {} at tau = {} with weight {}: certificate is {}",
                v.knot, v.tau, v.a, v.eta
            )?;
        }
        Ok(())
    }
}

/// Checks that `f` interpolates `s` within `tol * max(1, max |y|)` and that
/// every knot satisfies `|eta(tau) - sign(a)| <= tol`.
pub fn verify_solution(s: &SampleSet, f: &PwlSpline, tol: f64) -> VerifyReport {
    let cert = Canonical::new(s).certificate(s);
    verify_with_certificate(s, &cert, f, tol)
}

pub fn verify_with_certificate(s: &SampleSet, cert: &Certificate, f: &PwlSpline, tol: f64) -> VerifyReport {
    let scale = s.value_scale();
    let values = f.eval_many(s.x());
    let mut interpolation = Vec::new();
    let mut max_interpolation_error = 0.0_f64;
    for (m, ((&x, &y), &value)) in s.x().iter().zip(s.y()).zip(&values).enumerate() {
        let err = (value - y).abs();
        max_interpolation_error = max_interpolation_error.max(err);
        if !(err <= tol * scale) {
            interpolation.push(InterpolationViolation { index: m, x, y, value });
        }
    }
    let mut certificate = Vec::new();
    let mut max_certificate_gap = 0.0_f64;
    for (k, knot) in f.knots().iter().enumerate() {
        let eta = cert.eval(knot.tau);
        let gap = (eta - knot.a.signum()).abs();
        max_certificate_gap = max_certificate_gap.max(gap);
        if !(gap <= tol) {
            certificate.push(CertificateViolation { knot: k, tau: knot.tau, a: knot.a, eta });
        }
    }
    VerifyReport {
        passed: interpolation.is_empty() && certificate.is_empty(),
        max_interpolation_error,
        max_certificate_gap,
        interpolation,
        certificate,
    }
}

/// Second-difference tolerance used by [`convexity_diagnostic`].
pub const CONVEXITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexityViolation {
    pub run: usize,
    pub x: f64,
    pub second_difference: f64,
}

/// Grid check for candidates that are not piecewise linear.
///
/// Around each saturation run, covering samples `start - 1 ..= end + 1`, a
/// solution must be convex (positive runs) or concave (negative runs).
/// `f` is sampled with `points_per_gap` steps per sample gap and every
/// normalized second difference of the wrong sign beyond
/// [`CONVEXITY_TOL`] is reported. This does not check the rest of the
/// solution conditions.
pub fn convexity_diagnostic(
    s: &SampleSet,
    f: &dyn Fn(f64) -> f64,
    points_per_gap: usize,
) -> Vec<ConvexityViolation> {
    let steps = points_per_gap.max(2);
    let report = analyze_saturations(&Canonical::new(s).certificate(s));
    let x = s.x();
    let mut out = Vec::new();
    for (n, run) in report.runs.iter().enumerate() {
        let (lo, hi) = (x[run.start - 1], x[run.end() + 1]);
        let count = steps * (run.alpha + 2);
        let h = (hi - lo) / count as f64;
        let sign = f64::from(run.sign);
        for i in 1..count {
            let t = lo + h * i as f64;
            let d2 = (f(t + h) - 2.0 * f(t) + f(t - h)) / h;
            if sign * d2 < -CONVEXITY_TOL {
                out.push(ConvexityViolation { run: n, x: t, second_difference: d2 });
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Triangle {
    pub p_left: (f64, f64),
    pub p_apex: (f64, f64),
    pub p_right: (f64, f64),
}

impl Triangle {
    /// Twice the signed area.
    fn doubled_area(&self) -> f64 {
        cross(self.p_left, self.p_apex, self.p_right)
    }

    /// Inside or on the boundary, with boundary distance `tol`.
    pub fn contains(&self, p: (f64, f64), tol: f64) -> bool {
        let (a, b, c) = (self.p_left, self.p_apex, self.p_right);
        let area = self.doubled_area();
        if area != 0.0 {
            let o = area.signum();
            if o * cross(a, b, p) >= 0.0 && o * cross(b, c, p) >= 0.0 && o * cross(c, a, p) >= 0.0 {
                return true;
            }
        }
        segment_distance(p, a, b) <= tol
            || segment_distance(p, b, c) <= tol
            || segment_distance(p, c, a) <= tol
    }
}

fn cross(a: (f64, f64), b: (f64, f64), p: (f64, f64)) -> f64 {
    (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0)
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 { (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0) } else { 0.0 };
    ((p.0 - a.0 - t * dx).powi(2) + (p.1 - a.1 - t * dy).powi(2)).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexedTriangle {
    /// Left sample of the gap the triangle spans (0-based).
    pub m: usize,
    #[serde(flatten)]
    pub triangle: Triangle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub base: PwlSpline,
    pub triangles: Vec<IndexedTriangle>,
}

/// One triangle per gap `[x_m, x_{m+1}]` whose end samples carry same-sign
/// canonical weights. The apex is where the lines through the neighbouring
/// data segments meet.
pub fn envelope(s: &SampleSet) -> Envelope {
    let canonical = Canonical::new(s);
    let base = canonical.interpolant(s);
    let (x, y) = (s.x(), s.y());
    let slopes = canonical.slopes();
    let mut triangles = Vec::new();
    for m in 1..s.len().saturating_sub(2) {
        let (a0, a1) = (canonical.weight(m), canonical.weight(m + 1));
        if !(a0 * a1 > 0.0) {
            continue;
        }
        let tau = ((a0 * x[m] + a1 * x[m + 1]) / (a0 + a1)).clamp(x[m], x[m + 1]);
        let apex_y = y[m] + slopes[m - 1] * (tau - x[m]);
        triangles.push(IndexedTriangle {
            m,
            triangle: Triangle { p_left: (x[m], y[m]), p_apex: (tau, apex_y), p_right: (x[m + 1], y[m + 1]) },
        });
    }
    Envelope { base, triangles }
}

/// Whether `p` is within vertical distance `tol` of the canonical graph or
/// within `tol` of some triangle.
pub fn envelope_contains(e: &Envelope, p: (f64, f64), tol: f64) -> bool {
    if (e.base.eval(p.0) - p.1).abs() <= tol {
        return true;
    }
    e.triangles.iter().any(|t| t.triangle.contains(p, tol))
}
