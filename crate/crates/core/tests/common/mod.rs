//! Instance generators and reference computations shared by the
//! integration tests. The reference helpers work on raw slices and do not
//! call into the library.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// How the signs of consecutive slope changes are drawn.
#[derive(Debug, Clone, Copy)]
pub struct Shape {
    /// Probability that a slope change is exactly zero (collinear triple).
    pub zero: f64,
    /// Probability that a nonzero slope change repeats the sign of the
    /// previous one.
    pub same_sign: f64,
    /// Forbid same-sign neighbours entirely.
    pub alternate: bool,
    /// Small integers everywhere, so every slope change is exact.
    pub integer: bool,
}

impl Shape {
    pub const MIXED: Shape = Shape { zero: 0.15, same_sign: 0.6, alternate: false, integer: false };
    pub const EXACT: Shape = Shape { zero: 0.2, same_sign: 0.6, alternate: false, integer: true };
    pub const ALTERNATING: Shape = Shape { zero: 0.2, same_sign: 0.0, alternate: true, integer: false };
}

/// Samples built from a chosen sequence of slope changes.
pub fn instance(rng: &mut ChaCha8Rng, m: usize, shape: Shape) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0];
    for _ in 1..m {
        let gap = if shape.integer { rng.random_range(1..=3) as f64 } else { rng.random_range(0.2..1.5) };
        x.push(x.last().unwrap() + gap);
    }
    let mut slope = if shape.integer { rng.random_range(-2..=2) as f64 } else { rng.random_range(-2.0..2.0) };
    let mut y =
        vec![if shape.integer { rng.random_range(-3..=3) as f64 } else { rng.random_range(-1.0..1.0) }];
    let mut prev_sign = 0.0;
    for k in 0..m - 1 {
        if k > 0 {
            let d = if rng.random_bool(shape.zero) {
                0.0
            } else {
                let sign = if prev_sign != 0.0 && shape.alternate {
                    -prev_sign
                } else if prev_sign != 0.0 && rng.random_bool(shape.same_sign) {
                    prev_sign
                } else if rng.random_bool(0.5) {
                    1.0
                } else {
                    -1.0
                };
                let mag =
                    if shape.integer { rng.random_range(1..=3) as f64 } else { rng.random_range(0.1..2.0) };
                sign * mag
            };
            if d != 0.0 {
                prev_sign = d.signum();
            } else if shape.alternate {
                // a zero breaks adjacency, so the next sign is free again
                prev_sign = 0.0;
            }
            slope += d;
        }
        let next = y.last().unwrap() + slope * (x[k + 1] - x[k]);
        y.push(next);
    }
    (x, y)
}

/// Independent value of `b0 + b1 t + sum a (t - tau)_+`.
pub fn eval_raw(b0: f64, b1: f64, knots: &[(f64, f64)], t: f64) -> f64 {
    knots.iter().fold(b0 + b1 * t, |acc, &(tau, a)| if t > tau { acc + a * (t - tau) } else { acc })
}

/// Slope changes at interior samples, snapped at `1e-10 * max(1, max |slope|)`.
pub fn slope_changes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let s: Vec<f64> = (0..x.len() - 1).map(|i| (y[i + 1] - y[i]) / (x[i + 1] - x[i])).collect();
    let big = s.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    (1..x.len() - 1)
        .map(|m| {
            let d = s[m] - s[m - 1];
            if d.abs() <= 1e-10 * big {
                0.0
            } else {
                d
            }
        })
        .collect()
}

pub fn canonical_tv(x: &[f64], y: &[f64]) -> f64 {
    slope_changes(x, y).iter().map(|d| d.abs()).sum()
}

/// Independent certificate: sign of the slope change at interior samples,
/// zero at the ends, linear in between, zero outside.
pub fn certificate_at(x: &[f64], y: &[f64], t: f64) -> f64 {
    let n = x.len();
    if !(t > x[0] && t < x[n - 1]) {
        return 0.0;
    }
    let d = slope_changes(x, y);
    let eta = |m: usize| {
        if m == 0 || m == n - 1 || d[m - 1] == 0.0 {
            0.0
        } else {
            d[m - 1].signum()
        }
    };
    let mut j = 1;
    while x[j] <= t {
        j += 1;
    }
    let w = (t - x[j - 1]) / (x[j] - x[j - 1]);
    (1.0 - w) * eta(j - 1) + w * eta(j)
}

/// Ordinary least squares `(intercept, slope)`.
pub fn ols(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let xm = x.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - xm) * (b - ym)).sum();
    let sxx: f64 = x.iter().map(|a| (a - xm) * (a - xm)).sum();
    let b = sxy / sxx;
    (ym - b * xm, b)
}
