//! The canonical interpolant, its dual certificate, and saturation analysis.
//!
//! The canonical interpolant connects the samples with knots only at interior
//! sampling locations. Its knot weights are the slope differences
//! `a_m = s_m - s_{m-1}`. The canonical certificate is the piecewise-linear
//! function that takes the value `sign(a_m)` at each interior sample and
//! vanishes at and beyond the first and last samples. Any candidate whose
//! knots sit where the certificate equals the sign of their weight is a
//! minimum-TV interpolant, and the maximal blocks where the certificate
//! saturates at +1 or -1 determine both uniqueness and the minimum number of
//! knots of any solution.

use serde::{Deserialize, Serialize};

use crate::spline::{interior_weights, slopes_and_threshold, Knot, PwlSpline, SampleSet};

/// Canonical knot weights together with the threshold that was used to snap
/// near-zero weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Canonical {
    slopes: Vec<f64>,
    /// Interior weights, index `i` belongs to sample `i + 1`.
    weights: Vec<f64>,
    threshold: f64,
}

impl Canonical {
    /// Uses the default threshold `EPS_ZERO * max(1, max |slope|)`.
    pub fn new(s: &SampleSet) -> Self {
        let (slopes, threshold) = slopes_and_threshold(s.x(), s.y());
        Self::from_slopes(slopes, threshold)
    }

    /// Snaps every interior weight with `|a| <= threshold` to zero.
    pub fn with_threshold(s: &SampleSet, threshold: f64) -> Self {
        let (slopes, _) = slopes_and_threshold(s.x(), s.y());
        Self::from_slopes(slopes, threshold.max(0.0))
    }

    fn from_slopes(slopes: Vec<f64>, threshold: f64) -> Self {
        let weights = interior_weights(&slopes, threshold);
        Self { slopes, weights, threshold }
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    /// Knot weight at sample `m`; zero for the first and last samples.
    pub fn weight(&self, m: usize) -> f64 {
        if m == 0 || m > self.weights.len() {
            0.0
        } else {
            self.weights[m - 1]
        }
    }

    /// The full coefficient vector: leading slope, interior weights, and the
    /// intercept term, in that order.
    pub fn coefficients(&self, s: &SampleSet) -> Vec<f64> {
        let mut a = Vec::with_capacity(s.len());
        a.push(self.slopes[0]);
        a.extend_from_slice(&self.weights);
        a.push(s.y()[0] - self.slopes[0] * s.x()[0]);
        a
    }

    pub fn interpolant(&self, s: &SampleSet) -> PwlSpline {
        let b1 = self.slopes[0];
        let b0 = s.y()[0] - b1 * s.x()[0];
        let knots = self
            .weights
            .iter()
            .enumerate()
            .filter(|(_, &a)| a != 0.0)
            .map(|(i, &a)| Knot::new(s.x()[i + 1], a))
            .collect();
        PwlSpline::new(b0, b1, knots).expect("canonical knots are ordered and nonzero")
    }

    pub fn certificate(&self, s: &SampleSet) -> Certificate {
        let mut eta = Vec::with_capacity(s.len());
        eta.push(0);
        eta.extend(self.weights.iter().map(|&a| sign(a)));
        eta.push(0);
        Certificate { x: s.x().to_vec(), eta }
    }
}

fn sign(a: f64) -> i8 {
    if a > 0.0 {
        1
    } else if a < 0.0 {
        -1
    } else {
        0
    }
}

pub fn canonical_coefficients(s: &SampleSet) -> Vec<f64> {
    Canonical::new(s).coefficients(s)
}

pub fn canonical_interpolant(s: &SampleSet) -> PwlSpline {
    Canonical::new(s).interpolant(s)
}

pub fn canonical_certificate(s: &SampleSet) -> Certificate {
    Canonical::new(s).certificate(s)
}

/// Sampled values of the canonical dual certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    x: Vec<f64>,
    eta: Vec<i8>,
}

impl Certificate {
    pub fn x(&self) -> &[f64] {
        &self.x
    }

    /// Values at the sampling locations, each in {-1, 0, 1}.
    pub fn eta(&self) -> &[i8] {
        &self.eta
    }

    /// Linear interpolation of the sampled values; zero outside the sample range.
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        if !(t > self.x[0] && t < self.x[n - 1]) {
            return 0.0;
        }
        // First index with x > t; t lies in [x[j - 1], x[j]).
        let j = self.x.partition_point(|&xm| xm <= t);
        let (x0, x1) = (self.x[j - 1], self.x[j]);
        let (e0, e1) = (f64::from(self.eta[j - 1]), f64::from(self.eta[j]));
        if e0 == e1 {
            return e0;
        }
        let w = (t - x0) / (x1 - x0);
        (1.0 - w) * e0 + w * e1
    }
}

/// A maximal block of consecutive interior samples where the certificate
/// equals `sign`. Covers samples `start ..= start + alpha` (0-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SaturationRun {
    #[serde(rename = "s")]
    pub start: usize,
    pub alpha: usize,
    pub sign: i8,
}

impl SaturationRun {
    pub fn end(&self) -> usize {
        self.start + self.alpha
    }

    /// Fewest knots any solution can place inside this run, `ceil((alpha + 1) / 2)`.
    pub fn min_knots(&self) -> usize {
        (self.alpha + 2) / 2
    }

    /// Runs with a positive even extension admit a one-parameter family of
    /// sparsest knot placements.
    pub fn has_free_knot(&self) -> bool {
        self.alpha > 0 && self.alpha % 2 == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SaturationReport {
    pub runs: Vec<SaturationRun>,
    /// The interpolation problem has a single minimum-TV solution.
    pub unique: bool,
    pub min_sparsity: usize,
    /// Number of independent one-parameter families among sparsest solutions.
    pub dof: usize,
}

pub fn analyze_saturations(c: &Certificate) -> SaturationReport {
    let eta = c.eta();
    let mut runs = Vec::new();
    let mut m = 1;
    while m + 1 < eta.len() {
        let sign = eta[m];
        if sign == 0 {
            m += 1;
            continue;
        }
        let start = m;
        while m + 2 < eta.len() && eta[m + 1] == sign {
            m += 1;
        }
        runs.push(SaturationRun { start, alpha: m - start, sign });
        m += 1;
    }
    SaturationReport {
        unique: runs.iter().all(|r| r.alpha == 0),
        min_sparsity: runs.iter().map(SaturationRun::min_knots).sum(),
        dof: runs.iter().filter(|r| r.has_free_knot()).count(),
        runs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn samples(x: &[f64], y: &[f64]) -> SampleSet {
        SampleSet::new(x.to_vec(), y.to_vec()).unwrap()
    }

    fn collinear() -> SampleSet {
        samples(&[0.0, 1.0, 2.0, 3.0], &[0.0, 1.0, 2.0, 3.0])
    }

    fn tent() -> SampleSet {
        samples(&[0.0, 1.0, 2.0, 3.0], &[0.0, 1.0, 1.0, 0.0])
    }

    fn five() -> SampleSet {
        samples(&[0.0, 1.0, 2.0, 3.0, 4.0], &[0.0, 2.0, 3.0, 3.0, 2.0])
    }

    #[test]
    fn coefficients_examples() {
        assert_eq!(canonical_coefficients(&collinear()), vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(canonical_coefficients(&tent()), vec![1.0, -1.0, -1.0, 0.0]);
        assert_eq!(canonical_coefficients(&five()), vec![2.0, -1.0, -1.0, -1.0, 0.0]);
    }

    #[test]
    fn interpolant_examples() {
        let knots = |v: &[(f64, f64)]| v.iter().map(|&(t, a)| Knot::new(t, a)).collect::<Vec<_>>();
        assert_eq!(canonical_interpolant(&collinear()), PwlSpline::affine(0.0, 1.0));
        assert_eq!(
            canonical_interpolant(&tent()),
            PwlSpline::new(0.0, 1.0, knots(&[(1.0, -1.0), (2.0, -1.0)])).unwrap()
        );
        let f = canonical_interpolant(&five());
        assert_eq!(f, PwlSpline::new(0.0, 2.0, knots(&[(1.0, -1.0), (2.0, -1.0), (3.0, -1.0)])).unwrap());
        for (x, y) in five().x().iter().zip(five().y()) {
            assert_eq!(f.eval(*x), *y);
        }
    }

    #[test]
    fn certificate_examples() {
        assert_eq!(canonical_certificate(&collinear()).eta(), &[0, 0, 0, 0]);
        assert_eq!(canonical_certificate(&tent()).eta(), &[0, -1, -1, 0]);
        assert_eq!(canonical_certificate(&five()).eta(), &[0, -1, -1, -1, 0]);
    }

    #[test]
    fn certificate_evaluation() {
        let c = canonical_certificate(&tent());
        assert_eq!(c.eval(1.5), -1.0);
        assert_eq!(c.eval(0.5), -0.5);
        assert_eq!(c.eval(-10.0), 0.0);
        assert_eq!(c.eval(0.0), 0.0);
        assert_eq!(c.eval(3.0), 0.0);
        assert_eq!(c.eval(13.0), 0.0);
        assert_eq!(c.eval(1.0), -1.0);
        assert_eq!(c.eval(2.75), -0.25);
    }

    #[test]
    fn saturation_examples() {
        let r = analyze_saturations(&canonical_certificate(&collinear()));
        assert_eq!((r.runs.len(), r.unique, r.min_sparsity, r.dof), (0, true, 0, 0));

        let r = analyze_saturations(&canonical_certificate(&tent()));
        assert_eq!(r.runs, vec![SaturationRun { start: 1, alpha: 1, sign: -1 }]);
        assert_eq!((r.unique, r.min_sparsity, r.dof), (false, 1, 0));

        let r = analyze_saturations(&canonical_certificate(&five()));
        assert_eq!(r.runs, vec![SaturationRun { start: 1, alpha: 2, sign: -1 }]);
        assert_eq!((r.unique, r.min_sparsity, r.dof), (false, 2, 1));
    }

    #[test]
    fn opposite_sign_neighbours_are_separate_runs() {
        // zigzag: weights alternate in sign
        let s = samples(&[0.0, 1.0, 2.0, 3.0, 4.0], &[0.0, 1.0, 0.0, 1.0, 0.0]);
        let r = analyze_saturations(&canonical_certificate(&s));
        assert_eq!(r.runs.len(), 3);
        assert!(r.runs.iter().all(|run| run.alpha == 0));
        assert!(r.unique);
        assert_eq!(r.min_sparsity, 3);
    }

    #[test]
    fn small_sample_sets_are_unique() {
        let r = analyze_saturations(&canonical_certificate(&samples(&[0.0, 1.0], &[3.0, -1.0])));
        assert!(r.unique && r.runs.is_empty());
        let r = analyze_saturations(&canonical_certificate(&samples(&[0.0, 1.0, 5.0], &[3.0, -1.0, 7.0])));
        assert!(r.unique);
        assert_eq!(r.min_sparsity, 1);
    }

    #[test]
    fn run_serializes_with_short_field_name() {
        let run = SaturationRun { start: 1, alpha: 2, sign: -1 };
        assert_eq!(serde_json::to_string(&run).unwrap(), r#"{"s":1,"alpha":2,"sign":-1}"#);
    }
}
