//! Brute-force reference solvers for minimum-TV piecewise-linear
//! interpolation on small inputs.
//!
//! Nothing here depends on the `sparse-pwl` crate. Slopes, curvature signs,
//! line intersections and TV values are recomputed from the raw samples so
//! that agreement between the two is evidence rather than tautology.

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("no spline with knots on the grid interpolates the samples")]
    Infeasible,
    #[error("linear program failed: {0}")]
    Solver(String),
}

fn check(x: &[f64], y: &[f64]) -> Result<(), OracleError> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(OracleError::InvalidInput(format!(
            "need at least two (x, y) pairs, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(OracleError::InvalidInput("x must be strictly increasing".into()));
    }
    Ok(())
}

/// Slope changes at the interior samples, with values that are negligible
/// relative to the slopes set to zero.
fn slope_changes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let slopes: Vec<f64> = (0..x.len() - 1).map(|i| (y[i + 1] - y[i]) / (x[i + 1] - x[i])).collect();
    let big = slopes.iter().fold(1.0_f64, |m, s| m.max(s.abs()));
    (1..x.len() - 1)
        .map(|m| {
            let d = slopes[m] - slopes[m - 1];
            if d.abs() <= 1e-10 * big {
                0.0
            } else {
                d
            }
        })
        .collect()
}

/// Intersection abscissa of the line through `(p, q)` with the line through `(r, t)`.
fn intersect(p: (f64, f64), q: (f64, f64), r: (f64, f64), t: (f64, f64)) -> Option<f64> {
    let k1 = (q.1 - p.1) / (q.0 - p.0);
    let k2 = (t.1 - r.1) / (t.0 - r.0);
    if k1 == k2 {
        return None;
    }
    Some(((r.1 - k2 * r.0) - (p.1 - k1 * p.0)) / (k1 - k2))
}

/// Candidate knot locations: interior samples, and for each gap between
/// same-sign slope changes, the crossing point of the neighbouring data lines.
pub fn candidate_knots(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut out: Vec<f64> = x[1..n - 1].to_vec();
    let d = slope_changes(x, y);
    // d[i] belongs to sample i + 1
    for i in 0..d.len().saturating_sub(1) {
        if d[i] * d[i + 1] > 0.0 {
            let m = i + 1;
            let p = |k: usize| (x[k], y[k]);
            if let Some(t) = intersect(p(m - 1), p(m), p(m + 1), p(m + 2)) {
                if t > x[m] && t < x[m + 1] {
                    out.push(t);
                }
            }
        }
    }
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

/// Least-squares spline `c0 + c1 x + sum a_j (x - tau_j)_+` with the given
/// knots. Returns `(max residual, sum |a_j|)` or `None` when the design is
/// rank deficient.
fn fit_with_knots(x: &[f64], y: &[f64], taus: &[f64]) -> Option<(f64, f64)> {
    let (m, k) = (x.len(), taus.len());
    if k + 2 > m {
        return None;
    }
    let design = DMatrix::from_fn(m, k + 2, |r, c| match c {
        0 => 1.0,
        1 => x[r],
        _ => (x[r] - taus[c - 2]).max(0.0),
    });
    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if svd.singular_values.min() <= 1e-12 * smax {
        return None;
    }
    let rhs = DVector::from_column_slice(y);
    let coef = svd.solve(&rhs, 1e-14 * smax).ok()?;
    let residual = (&design * &coef - &rhs).amax();
    let tv = coef.rows(2, k).iter().map(|a| a.abs()).sum();
    Some((residual, tv))
}

fn combinations(n: usize, k: usize, f: &mut dyn FnMut(&[usize]) -> bool) -> bool {
    fn rec(
        start: usize,
        n: usize,
        k: usize,
        cur: &mut Vec<usize>,
        f: &mut dyn FnMut(&[usize]) -> bool,
    ) -> bool {
        if cur.len() == k {
            return f(cur);
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            if rec(i + 1, n, k, cur, f) {
                return true;
            }
            cur.pop();
        }
        false
    }
    rec(0, n, k, &mut Vec::with_capacity(k), f)
}

/// Smallest `k <= k_max` such that some spline with `k` knots from
/// [`candidate_knots`] interpolates the samples with the minimum TV
/// (the sum of absolute slope changes). Returns `k_max + 1` when none does.
pub fn exhaustive_sparsity_oracle(x: &[f64], y: &[f64], k_max: usize) -> Result<usize, OracleError> {
    check(x, y)?;
    if x.len() > 8 {
        return Err(OracleError::InvalidInput(format!(
            "exhaustive search is limited to 8 samples, got {}",
            x.len()
        )));
    }
    let tv_min: f64 = slope_changes(x, y).iter().map(|d| d.abs()).sum();
    let scale = y.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let cands = candidate_knots(x, y);
    for k in 0..=k_max.min(cands.len()) {
        let mut taus = vec![0.0; k];
        let found = combinations(cands.len(), k, &mut |idx| {
            for (t, &i) in taus.iter_mut().zip(idx) {
                *t = cands[i];
            }
            match fit_with_knots(x, y, &taus) {
                Some((res, tv)) => res <= 1e-9 * scale && (tv - tv_min).abs() <= 1e-9 * (1.0 + tv_min),
                None => false,
            }
        });
        if found {
            return Ok(k);
        }
    }
    Ok(k_max + 1)
}

/// Grid of candidate knot locations: each sample gap is split into pieces
/// of length at most `step`, and at least two pieces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub step: f64,
}

impl GridSpec {
    pub fn new(step: f64) -> Self {
        Self { step }
    }

    /// Grid points strictly between the first and last sample; every
    /// interior sample is on the grid.
    pub fn points(&self, x: &[f64]) -> Vec<f64> {
        let mut out = Vec::new();
        for (i, w) in x.windows(2).enumerate() {
            let gap = w[1] - w[0];
            let pieces = ((gap / self.step).ceil() as usize).max(2);
            let first = if i == 0 { 1 } else { 0 };
            for j in first..pieces {
                out.push(w[0] + gap * j as f64 / pieces as f64);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridBpSolution {
    pub tv_min: f64,
    pub b0: f64,
    pub b1: f64,
    /// `(tau, a)` pairs with nonzero weight.
    pub knots: Vec<(f64, f64)>,
}

/// Minimum `sum |a_j|` over splines with knots on the grid that interpolate
/// the samples exactly, solved as a linear program with `a = a+ - a-`.
pub fn grid_bp_oracle(x: &[f64], y: &[f64], g: GridSpec) -> Result<GridBpSolution, OracleError> {
    check(x, y)?;
    if !(g.step > 0.0) {
        return Err(OracleError::InvalidInput(format!("grid step must be positive, got {}", g.step)));
    }
    let grid = g.points(x);
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let free = (f64::NEG_INFINITY, f64::INFINITY);
    let b0 = lp.add_var(0.0, free);
    let b1 = lp.add_var(0.0, free);
    let pos: Vec<_> = grid.iter().map(|_| lp.add_var(1.0, (0.0, f64::INFINITY))).collect();
    let neg: Vec<_> = grid.iter().map(|_| lp.add_var(1.0, (0.0, f64::INFINITY))).collect();
    for (&xm, &ym) in x.iter().zip(y) {
        let mut row = vec![(b0, 1.0), (b1, xm)];
        for (j, &t) in grid.iter().enumerate() {
            let h = xm - t;
            if h > 0.0 {
                row.push((pos[j], h));
                row.push((neg[j], -h));
            }
        }
        lp.add_constraint(row.as_slice(), ComparisonOp::Eq, ym);
    }
    let sol = lp.solve().map_err(|e| match e {
        minilp::Error::Infeasible => OracleError::Infeasible,
        other => OracleError::Solver(other.to_string()),
    })?;
    let knots = grid
        .iter()
        .enumerate()
        .map(|(j, &t)| (t, sol[pos[j]] - sol[neg[j]]))
        .filter(|&(_, a)| a != 0.0)
        .collect();
    Ok(GridBpSolution { tv_min: sol.objective(), b0: sol[b0], b1: sol[b1], knots })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TENT: ([f64; 4], [f64; 4]) = ([0.0, 1.0, 2.0, 3.0], [0.0, 1.0, 1.0, 0.0]);
    const FIVE: ([f64; 5], [f64; 5]) = ([0.0, 1.0, 2.0, 3.0, 4.0], [0.0, 2.0, 3.0, 3.0, 2.0]);

    #[test]
    fn candidates_include_line_crossings() {
        assert_eq!(candidate_knots(&TENT.0, &TENT.1), vec![1.0, 1.5, 2.0]);
        assert_eq!(candidate_knots(&FIVE.0, &FIVE.1), vec![1.0, 1.5, 2.0, 2.5, 3.0]);
    }

    #[test]
    fn sparsity_examples() {
        let x = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(exhaustive_sparsity_oracle(&x, &[1.0, 3.0, 5.0, 7.0], 4).unwrap(), 0);
        assert_eq!(exhaustive_sparsity_oracle(&TENT.0, &TENT.1, 4).unwrap(), 1);
        assert_eq!(exhaustive_sparsity_oracle(&FIVE.0, &FIVE.1, 4).unwrap(), 2);
        assert_eq!(exhaustive_sparsity_oracle(&FIVE.0, &FIVE.1, 1).unwrap(), 2);
    }

    #[test]
    fn grid_examples() {
        let r = grid_bp_oracle(&TENT.0, &TENT.1, GridSpec::new(0.01)).unwrap();
        assert!((r.tv_min - 2.0).abs() < 1e-6, "{r:?}");
        let r = grid_bp_oracle(&[0.0, 1.0, 2.0, 3.0], &[1.0, 3.0, 5.0, 7.0], GridSpec::new(0.01)).unwrap();
        assert!(r.tv_min.abs() < 1e-9);
        let r = grid_bp_oracle(&FIVE.0, &FIVE.1, GridSpec::new(0.01)).unwrap();
        assert!((r.tv_min - 3.0).abs() < 1e-6, "{r:?}");
    }

    #[test]
    fn grid_contains_samples() {
        let g = GridSpec::new(0.3).points(&[0.0, 1.0, 1.1]);
        assert!(g.contains(&1.0));
        assert!(!g.contains(&0.0) && !g.contains(&1.1));
        assert_eq!(g.iter().filter(|&&t| t > 1.0).count(), 1);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(exhaustive_sparsity_oracle(&[0.0, 0.0], &[1.0, 2.0], 2).is_err());
        assert!(grid_bp_oracle(&[0.0], &[1.0], GridSpec::new(0.1)).is_err());
        assert!(exhaustive_sparsity_oracle(&[0.0; 9], &[0.0; 9], 2).is_err());
    }
}
