//! Penalized regression end to end: solve for the sample values `y_lambda`,
//! then sparsify the interpolation problem on `(x, y_lambda)`. Also λ sweeps
//! and a synthetic data generator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::canonical::{analyze_saturations, Canonical, SaturationReport};
use crate::discrete::{admm_solve_with, lambda_max_with, Loss, Quadratic, SecondDiffMatrix, SolverOptions};
use crate::error::{invalid, Result};
use crate::sparsify::{sparsest_solution_with, RunChoices};
use crate::spline::{Knot, PwlSpline, SampleSet};

/// Relative threshold below which entries of `L y_lambda` count as zero.
pub const EPS_SPARSIFY: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSummary {
    pub iterations: usize,
    pub kkt_residual: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fit {
    pub lambda: f64,
    pub y_lambda: Vec<f64>,
    pub spline: PwlSpline,
    pub sparsity: usize,
    /// `sum E(y_lambda_m, y_m)`.
    pub data_loss: f64,
    /// `||y - y_lambda||_2`.
    pub loss_l2: f64,
    /// `data_loss + lambda * tv`.
    pub objective: f64,
    pub tv: f64,
    pub report: SaturationReport,
    pub solver: SolverSummary,
}

#[derive(Debug, Clone, Default)]
pub struct FitOptions {
    pub solver: SolverOptions,
    pub choices: RunChoices,
}

pub fn fit(s: &SampleSet, lambda: f64, opts: &FitOptions) -> Result<Fit> {
    fit_with(s, lambda, &Quadratic, opts)
}

pub fn fit_with(s: &SampleSet, lambda: f64, loss: &dyn Loss, opts: &FitOptions) -> Result<Fit> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(invalid(format!("lambda must be finite and nonnegative, got {lambda}")));
    }
    let solver = if lambda == 0.0 {
        SolverSummary { iterations: 0, kkt_residual: 0.0, converged: true }
    } else {
        let r = admm_solve_with(s, lambda, loss, &opts.solver)?;
        let summary =
            SolverSummary { iterations: r.iterations, kkt_residual: r.kkt_residual, converged: r.converged };
        return finish(s, lambda, loss, r.y_lambda, summary, &opts.choices);
    };
    finish(s, lambda, loss, s.y().to_vec(), solver, &opts.choices)
}

fn finish(
    s: &SampleSet,
    lambda: f64,
    loss: &dyn Loss,
    y_lambda: Vec<f64>,
    solver: SolverSummary,
    choices: &RunChoices,
) -> Result<Fit> {
    let sl = s.with_y(y_lambda)?;
    let canonical = if lambda == 0.0 {
        Canonical::new(&sl)
    } else {
        let l = SecondDiffMatrix::new(sl.x())?;
        let peak = l.apply(sl.y()).iter().fold(0.0_f64, |acc, a| acc.max(a.abs()));
        Canonical::with_threshold(&sl, EPS_SPARSIFY * peak.max(1.0))
    };
    let report = analyze_saturations(&canonical.certificate(&sl));
    let spline = sparsest_solution_with(&sl, &canonical, &report, choices)?;
    let data_loss: f64 = sl.y().iter().zip(s.y()).map(|(&z, &y)| loss.value(z, y)).sum();
    let loss_l2 = sl.y().iter().zip(s.y()).map(|(z, y)| (z - y).powi(2)).sum::<f64>().sqrt();
    let tv = spline.tv_norm();
    Ok(Fit {
        lambda,
        y_lambda: sl.y().to_vec(),
        sparsity: spline.sparsity(),
        objective: data_loss + lambda * tv,
        spline,
        data_loss,
        loss_l2,
        tv,
        report,
        solver,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeoffPoint {
    pub lambda: f64,
    pub loss: f64,
    pub sparsity: usize,
    pub tv: f64,
}

impl From<&Fit> for TradeoffPoint {
    fn from(f: &Fit) -> Self {
        Self { lambda: f.lambda, loss: f.loss_l2, sparsity: f.sparsity, tv: f.tv }
    }
}

#[derive(Debug, Clone)]
pub struct SweepEntry {
    pub lambda: f64,
    pub outcome: Result<Fit>,
}

impl SweepEntry {
    pub fn point(&self) -> Option<TradeoffPoint> {
        self.outcome.as_ref().ok().map(TradeoffPoint::from)
    }
}

#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    pub fit: FitOptions,
    /// Seed each solve with the previous solution; runs sequentially.
    pub warm_start: bool,
    /// Upper bound on worker threads; `None` uses `SPARSE_PWL_THREADS` or
    /// the rayon default.
    pub threads: Option<usize>,
}

/// `n` values log-spaced over `[min_ratio * lambda_max, lambda_max]`,
/// ascending. A single value is `lambda_max` itself.
pub fn lambda_grid(lambda_max: f64, n: usize, min_ratio: f64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(invalid("lambda grid needs at least one point"));
    }
    if !(min_ratio > 0.0 && min_ratio <= 1.0) {
        return Err(invalid(format!("lambda min ratio must lie in (0, 1], got {min_ratio}")));
    }
    if !(lambda_max >= 0.0 && lambda_max.is_finite()) {
        return Err(invalid(format!("lambda_max must be finite and nonnegative, got {lambda_max}")));
    }
    if n == 1 {
        return Ok(vec![lambda_max]);
    }
    let (lo, hi) = ((min_ratio * lambda_max).ln(), lambda_max.ln());
    Ok((0..n)
        .map(|i| {
            if lambda_max == 0.0 {
                0.0
            } else if i == n - 1 {
                lambda_max
            } else {
                (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect())
}

pub fn default_lambda_grid(s: &SampleSet) -> Vec<f64> {
    lambda_grid(lambda_max_with(s, &Quadratic), 20, 1e-5).expect("default grid parameters are valid")
}

pub fn sweep(s: &SampleSet, lambdas: &[f64], opts: &SweepOptions) -> Result<Vec<SweepEntry>> {
    sweep_with(s, lambdas, &Quadratic, opts)
}

/// Fits every λ in `lambdas` (ascending). A failed point is recorded in its
/// entry and does not stop the sweep.
pub fn sweep_with(
    s: &SampleSet,
    lambdas: &[f64],
    loss: &dyn Loss,
    opts: &SweepOptions,
) -> Result<Vec<SweepEntry>> {
    if let Some(i) = lambdas.windows(2).position(|w| !(w[0] <= w[1])) {
        return Err(invalid(format!("lambda grid is not ascending at position {}", i + 1)));
    }
    if opts.warm_start {
        let mut fit_opts = opts.fit.clone();
        let mut entries = Vec::with_capacity(lambdas.len());
        for &lambda in lambdas {
            let outcome = fit_with(s, lambda, loss, &fit_opts);
            if let Ok(f) = &outcome {
                fit_opts.solver.warm_start = Some(f.y_lambda.clone());
            }
            entries.push(SweepEntry { lambda, outcome });
        }
        return Ok(entries);
    }
    let run = || {
        lambdas
            .par_iter()
            .map(|&lambda| SweepEntry { lambda, outcome: fit_with(s, lambda, loss, &opts.fit) })
            .collect::<Vec<_>>()
    };
    match opts.threads.or_else(threads_from_env) {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build() {
            Ok(pool) => Ok(pool.install(run)),
            Err(_) => Ok(run()),
        },
        None => Ok(run()),
    }
}

fn threads_from_env() -> Option<usize> {
    std::env::var("SPARSE_PWL_THREADS").ok()?.trim().parse().ok()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub m: usize,
    pub ground_truth_knots: usize,
    pub amplitude_variance: f64,
    pub noise_variance: f64,
    pub rng_seed: u64,
}

impl Default for SimulationSpec {
    fn default() -> Self {
        Self { m: 30, ground_truth_knots: 2, amplitude_variance: 1.0, noise_variance: 4e-4, rng_seed: 0 }
    }
}

/// Samples `x_m` uniformly in `[(m-1)/M, m/M]`, a ground-truth spline with
/// uniform knots in `[0, 1]` and Gaussian weights (the affine part is
/// Gaussian with the same variance), and adds Gaussian noise.
pub fn simulate(spec: &SimulationSpec) -> Result<(SampleSet, PwlSpline)> {
    if spec.m < 2 {
        return Err(invalid(format!("simulation needs at least 2 samples, got {}", spec.m)));
    }
    for (name, v) in
        [("amplitude variance", spec.amplitude_variance), ("noise variance", spec.noise_variance)]
    {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(invalid(format!("{name} must be finite and nonnegative, got {v}")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let amplitude = Normal::new(0.0, spec.amplitude_variance.sqrt()).expect("finite deviation");
    let noise = Normal::new(0.0, spec.noise_variance.sqrt()).expect("finite deviation");
    let m = spec.m as f64;

    let x: Vec<f64> = (0..spec.m).map(|i| (i as f64 + rng.random::<f64>()) / m).collect();
    let mut taus: Vec<f64> = (0..spec.ground_truth_knots).map(|_| rng.random::<f64>()).collect();
    taus.sort_by(f64::total_cmp);
    let mut knots = Vec::with_capacity(taus.len());
    for tau in taus {
        let a = amplitude.sample(&mut rng);
        if a != 0.0 {
            knots.push(Knot::new(tau, a));
        }
    }
    let b0 = amplitude.sample(&mut rng);
    let b1 = amplitude.sample(&mut rng);
    dedup_taus(&mut knots);
    let truth = PwlSpline::new(b0, b1, knots)?;
    let y: Vec<f64> = truth.eval_many(&x).into_iter().map(|v| v + noise.sample(&mut rng)).collect();
    Ok((SampleSet::new(x, y)?, truth))
}

/// Merges knots that drew the same location.
fn dedup_taus(knots: &mut Vec<Knot>) {
    let mut out: Vec<Knot> = Vec::with_capacity(knots.len());
    for k in knots.drain(..) {
        match out.last_mut() {
            Some(last) if last.tau == k.tau => last.a += k.a,
            _ => out.push(k),
        }
    }
    out.retain(|k| k.a != 0.0);
    *knots = out;
}
