//! Sample sets and piecewise-linear splines in ReLU form
//!
//! A spline is stored as `f(x) = b0 + b1 x + sum_k a_k (x - tau_k)_+`. The
//! second derivative of such a function is a sum of Dirac masses with weights
//! `a_k`, so its total-variation norm is `sum_k |a_k|`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Relative threshold below which a knot weight (second difference of
/// slopes) is treated as an exact zero.
pub const EPS_ZERO: f64 = 1e-10;

/// Ordered sampling locations with their measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl SampleSet {
    /// Requires at least two samples, finite values and strictly increasing `x`.
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(invalid(format!("x has {} entries but y has {}", x.len(), y.len())));
        }
        if x.len() < 2 {
            return Err(invalid(format!("need at least 2 samples, got {}", x.len())));
        }
        for (i, (&xi, &yi)) in x.iter().zip(&y).enumerate() {
            if !xi.is_finite() || !yi.is_finite() {
                return Err(invalid(format!("sample {i} is not finite: ({xi}, {yi})")));
            }
        }
        if let Some(i) = x.windows(2).position(|w| w[0] >= w[1]) {
            return Err(invalid(format!(
                "sampling locations must be strictly increasing: x[{}] = {} >= x[{}] = {}",
                i,
                x[i],
                i + 1,
                x[i + 1]
            )));
        }
        Ok(Self { x, y })
    }

    pub fn from_points(points: &[(f64, f64)]) -> Result<Self> {
        let (x, y) = points.iter().copied().unzip();
        Self::new(x, y)
    }

    /// Same locations, new measurements.
    pub fn with_y(&self, y: Vec<f64>) -> Result<Self> {
        if y.len() != self.x.len() {
            return Err(invalid(format!("expected {} measurements, got {}", self.x.len(), y.len())));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("measurement {i} is not finite")));
        }
        Ok(Self { x: self.x.clone(), y })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn point(&self, m: usize) -> (f64, f64) {
        (self.x[m], self.y[m])
    }

    /// Slope of the segment joining samples `m` and `m + 1`.
    pub fn slope(&self, m: usize) -> f64 {
        (self.y[m + 1] - self.y[m]) / (self.x[m + 1] - self.x[m])
    }

    pub fn slopes(&self) -> Vec<f64> {
        (0..self.len() - 1).map(|m| self.slope(m)).collect()
    }

    /// Magnitude used to make measurement tolerances relative.
    pub fn value_scale(&self) -> f64 {
        self.y.iter().fold(1.0_f64, |acc, v| acc.max(v.abs()))
    }
}

/// A knot of a piecewise-linear spline: location and slope jump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Knot {
    pub tau: f64,
    pub a: f64,
}

impl Knot {
    pub fn new(tau: f64, a: f64) -> Self {
        Self { tau, a }
    }
}

/// `b0 + b1 x + sum_k a_k (x - tau_k)_+` with strictly increasing knot
/// locations and nonzero weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SplineRepr")]
pub struct PwlSpline {
    b0: f64,
    b1: f64,
    knots: Vec<Knot>,
}

#[derive(Deserialize)]
struct SplineRepr {
    b0: f64,
    b1: f64,
    #[serde(default)]
    knots: Vec<Knot>,
}

impl TryFrom<SplineRepr> for PwlSpline {
    type Error = crate::Error;

    fn try_from(r: SplineRepr) -> Result<Self> {
        PwlSpline::new(r.b0, r.b1, r.knots)
    }
}

impl PwlSpline {
    pub fn new(b0: f64, b1: f64, knots: Vec<Knot>) -> Result<Self> {
        if !b0.is_finite() || !b1.is_finite() {
            return Err(invalid(format!("affine part is not finite: b0 = {b0}, b1 = {b1}")));
        }
        for (k, knot) in knots.iter().enumerate() {
            if !knot.tau.is_finite() || !knot.a.is_finite() {
                return Err(invalid(format!("knot {k} is not finite: {knot:?}")));
            }
            if knot.a == 0.0 {
                return Err(invalid(format!("knot {k} at {} has zero weight", knot.tau)));
            }
        }
        if let Some(k) = knots.windows(2).position(|w| w[0].tau >= w[1].tau) {
            return Err(invalid(format!(
                "knot locations must be strictly increasing: {} >= {}",
                knots[k].tau,
                knots[k + 1].tau
            )));
        }
        Ok(Self { b0, b1, knots })
    }

    pub fn affine(b0: f64, b1: f64) -> Self {
        Self { b0, b1, knots: Vec::new() }
    }

    pub fn b0(&self) -> f64 {
        self.b0
    }

    pub fn b1(&self) -> f64 {
        self.b1
    }

    pub fn knots(&self) -> &[Knot] {
        &self.knots
    }

    /// Number of knots.
    pub fn sparsity(&self) -> usize {
        self.knots.len()
    }

    pub fn eval(&self, x: f64) -> f64 {
        let mut acc = self.b0 + self.b1 * x;
        for k in &self.knots {
            if x > k.tau {
                acc += k.a * (x - k.tau);
            }
        }
        acc
    }

    /// Evaluates at many abscissae. Linear in `xs.len() + sparsity` when `xs`
    /// is sorted; falls back to pointwise evaluation otherwise.
    pub fn eval_many(&self, xs: &[f64]) -> Vec<f64> {
        if !xs.windows(2).all(|w| w[0] <= w[1]) {
            return xs.iter().map(|&x| self.eval(x)).collect();
        }
        let mut out = Vec::with_capacity(xs.len());
        // Running sums of the active ReLU atoms: sum a_k and sum a_k tau_k.
        let (mut slope, mut offset) = (0.0, 0.0);
        let mut next = 0;
        for &x in xs {
            while next < self.knots.len() && self.knots[next].tau < x {
                slope += self.knots[next].a;
                offset += self.knots[next].a * self.knots[next].tau;
                next += 1;
            }
            out.push(self.b0 + self.b1 * x + slope * x - offset);
        }
        out
    }

    /// Total-variation norm of the second derivative, `sum_k |a_k|`.
    pub fn tv_norm(&self) -> f64 {
        self.knots.iter().fold(0.0, |acc, k| acc + k.a.abs())
    }

    /// `wa * self + wb * other`. Coincident knots are summed and dropped when
    /// the sum is exactly zero.
    pub fn linear_combination(&self, wa: f64, other: &PwlSpline, wb: f64) -> PwlSpline {
        let mut knots: Vec<Knot> = Vec::with_capacity(self.knots.len() + other.knots.len());
        let (mut i, mut j) = (0, 0);
        while i < self.knots.len() || j < other.knots.len() {
            let take_a =
                j >= other.knots.len() || (i < self.knots.len() && self.knots[i].tau <= other.knots[j].tau);
            let take_b =
                i >= self.knots.len() || (j < other.knots.len() && other.knots[j].tau <= self.knots[i].tau);
            let (tau, mut a) =
                if take_a { (self.knots[i].tau, wa * self.knots[i].a) } else { (other.knots[j].tau, 0.0) };
            if take_a {
                i += 1;
            }
            if take_b {
                a += wb * other.knots[j].a;
                j += 1;
            }
            if a != 0.0 {
                knots.push(Knot { tau, a });
            }
        }
        PwlSpline { b0: wa * self.b0 + wb * other.b0, b1: wa * self.b1 + wb * other.b1, knots }
    }
}

/// Slopes of consecutive segments and the absolute zero threshold derived
/// from them.
pub(crate) fn slopes_and_threshold(x: &[f64], y: &[f64]) -> (Vec<f64>, f64) {
    let slopes: Vec<f64> =
        x.windows(2).zip(y.windows(2)).map(|(xw, yw)| (yw[1] - yw[0]) / (xw[1] - xw[0])).collect();
    let scale = slopes.iter().fold(1.0_f64, |acc, s| acc.max(s.abs()));
    (slopes, EPS_ZERO * scale)
}

/// Knot weights at the interior abscissae: slope differences, snapped to
/// zero at or below `threshold`.
pub(crate) fn interior_weights(slopes: &[f64], threshold: f64) -> Vec<f64> {
    slopes
        .windows(2)
        .map(|w| {
            let a = w[1] - w[0];
            if a.abs() <= threshold {
                0.0
            } else {
                a
            }
        })
        .collect()
}

/// The spline through `points` with knots only at interior abscissae.
pub fn connect(points: &[(f64, f64)]) -> Result<PwlSpline> {
    if points.len() < 2 {
        return Err(invalid(format!("need at least 2 points, got {}", points.len())));
    }
    if let Some(i) = points.windows(2).position(|w| w[0].0 >= w[1].0) {
        return Err(invalid(format!(
            "abscissae must be strictly increasing: point {} has x = {} >= {}",
            i,
            points[i].0,
            points[i + 1].0
        )));
    }
    if let Some(p) = points.iter().find(|p| !p.0.is_finite() || !p.1.is_finite()) {
        return Err(invalid(format!("point {p:?} is not finite")));
    }
    let (x, y): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
    let (slopes, threshold) = slopes_and_threshold(&x, &y);
    let weights = interior_weights(&slopes, threshold);
    let b1 = slopes[0];
    let b0 = y[0] - b1 * x[0];
    let knots =
        weights.iter().enumerate().filter(|(_, &a)| a != 0.0).map(|(i, &a)| Knot::new(x[i + 1], a)).collect();
    Ok(PwlSpline { b0, b1, knots })
}
