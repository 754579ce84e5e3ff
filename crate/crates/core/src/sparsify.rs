//! Knot sparsification inside saturation runs.
//!
//! Outside the runs every solution follows the canonical interpolant, so a
//! sparsest solution is obtained by replacing the `alpha + 1` canonical knots
//! of each run with `ceil((alpha + 1) / 2)` knots. Two same-sign neighbours
//! merge into one knot at their weighted barycenter, which is also where the
//! two adjacent data lines intersect. Odd runs merge pairwise from the left.
//! Even runs keep one free knot that slides along a segment; every other
//! knot of the run is then fixed by line intersections.

use std::collections::BTreeMap;

use crate::canonical::{analyze_saturations, Canonical, SaturationReport, SaturationRun};
use crate::error::{invalid, Error, Result};
use crate::spline::{Knot, PwlSpline, SampleSet, EPS_ZERO};

/// Position of the free knot of an even run: `t = 0` puts it on the first
/// sample of the run, `t = 1` on the intersection of the lines through the
/// two segments that surround the first saturated interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunChoice(f64);

impl RunChoice {
    pub fn new(t: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&t) {
            Ok(Self(t))
        } else {
            Err(Error::InvalidChoice(t))
        }
    }

    pub fn t(&self) -> f64 {
        self.0
    }
}

impl Default for RunChoice {
    fn default() -> Self {
        Self(0.0)
    }
}

/// Free-knot choices keyed by run index (position in
/// [`SaturationReport::runs`]). Runs without a free knot ignore their entry.
pub type RunChoices = BTreeMap<usize, RunChoice>;

/// Replaces two same-sign knots by a single knot at their barycenter with
/// the summed weight.
pub fn merge_pair(x_m: f64, a_m: f64, x_n: f64, a_n: f64) -> Result<Knot> {
    if !(a_m * a_n > 0.0) {
        return Err(Error::InvalidMerge { left: a_m, right: a_n });
    }
    let a = a_m + a_n;
    let tau = (a_m * x_m + a_n * x_n) / a;
    if !tau.is_finite() {
        return Err(Error::DegenerateGeometry(format!(
            "merging ({x_m}, {a_m}) with ({x_n}, {a_n}) gives a non-finite location"
        )));
    }
    // Both weights share a sign, so tau is a convex combination; clamp
    // rounding excursions back into the closed segment.
    Ok(Knot::new(tau.clamp(x_m.min(x_n), x_m.max(x_n)), a))
}

/// Sparsest knots for one run. `a` is the full canonical coefficient vector
/// (as returned by [`crate::canonical_coefficients`]), indexed by sample.
pub fn sparsify_run(
    s: &SampleSet,
    a: &[f64],
    run: &SaturationRun,
    choice: Option<RunChoice>,
) -> Result<Vec<Knot>> {
    if a.len() != s.len() {
        return Err(invalid(format!("coefficient vector has {} entries for {} samples", a.len(), s.len())));
    }
    if run.start == 0 || run.end() + 1 >= s.len() {
        return Err(invalid(format!(
            "run {run:?} does not lie among the interior samples of {} points",
            s.len()
        )));
    }
    let t = choice.unwrap_or_default().t();
    let x = s.x();
    let (start, alpha) = (run.start, run.alpha);

    if alpha == 0 {
        return Ok(vec![Knot::new(x[start], a[start])]);
    }

    let mut knots = Vec::with_capacity(run.min_knots());
    let mut next = start;
    if alpha % 2 == 0 {
        if t == 0.0 {
            knots.push(Knot::new(x[start], a[start]));
            next = start + 1;
        } else {
            let [first, second] = free_knot_pair(s, a, start, t)?;
            knots.push(first);
            knots.push(second);
            next = start + 3;
        }
    }
    while next < run.end() {
        knots.push(merge_pair(x[next], a[next], x[next + 1], a[next + 1])?);
        next += 2;
    }
    debug_assert_eq!(knots.len(), run.min_knots());
    Ok(knots)
}

/// The first two knots of an even run for a free-knot position `t > 0`.
///
/// The first knot slides from sample `start` toward the intersection of the
/// lines through samples `(start-1, start)` and `(start+1, start+2)`. The
/// second is where the line from the first knot through sample `start+1`
/// meets the line through samples `(start+2, start+3)`.
fn free_knot_pair(s: &SampleSet, a: &[f64], start: usize, t: f64) -> Result<[Knot; 2]> {
    let x = s.x();
    let y = s.y();
    let incoming = s.slope(start - 1);
    let outgoing = s.slope(start + 2);

    let apex = merge_pair(x[start], a[start], x[start + 1], a[start + 1])?.tau;
    let apex_y = y[start] + incoming * (apex - x[start]);
    let tau1 = x[start] + t * (apex - x[start]);
    let y1 = y[start] + t * (apex_y - y[start]);

    let middle = (y[start + 1] - y1) / (x[start + 1] - tau1);
    let w1 = middle - incoming;
    let w2 = outgoing - middle;
    let scale = 1.0_f64.max(a[start + 1].abs() + a[start + 2].abs());
    if w2.abs() <= EPS_ZERO * scale || !middle.is_finite() {
        return Err(Error::DegenerateGeometry(format!(
            "free knot at t = {t} in run starting at sample {start} gives nearly parallel lines"
        )));
    }
    let tau2 = (y[start + 2] - outgoing * x[start + 2] - y1 + middle * tau1) / (middle - outgoing);
    let tau2 = tau2.clamp(x[start + 1], x[start + 2]);
    Ok([Knot::new(tau1, w1), Knot::new(tau2, w2)])
}

/// A sparsest minimum-TV interpolant of `s`.
pub fn sparsest_solution(s: &SampleSet, choices: &RunChoices) -> Result<PwlSpline> {
    let canonical = Canonical::new(s);
    let report = analyze_saturations(&canonical.certificate(s));
    sparsest_solution_with(s, &canonical, &report, choices)
}

/// Same as [`sparsest_solution`] for a precomputed canonical analysis.
pub fn sparsest_solution_with(
    s: &SampleSet,
    canonical: &Canonical,
    report: &SaturationReport,
    choices: &RunChoices,
) -> Result<PwlSpline> {
    for c in choices.values() {
        RunChoice::new(c.t())?;
    }
    let a = canonical.coefficients(s);
    let mut knots = Vec::with_capacity(report.min_sparsity);
    for (n, run) in report.runs.iter().enumerate() {
        let choice = if run.has_free_knot() { choices.get(&n).copied() } else { None };
        knots.extend(sparsify_run(s, &a, run, choice)?);
    }
    PwlSpline::new(a[s.len() - 1], a[0], knots)
}
