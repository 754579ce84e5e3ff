//! Sparsest piecewise-linear splines under second-derivative total-variation
//! regularization.
//!
//! For interpolation the crate computes the canonical interpolant, its dual
//! certificate, and a sparsest minimum-TV interpolant in linear time. For
//! penalized regression it solves the discrete l1 problem for the sample
//! values `y_lambda` and then sparsifies the interpolation of those values.

pub mod banded;
pub mod canonical;
pub mod discrete;
pub mod error;
pub mod io;
pub mod pipeline;
pub mod solution_set;
pub mod sparsify;
pub mod spline;

pub use canonical::{
    analyze_saturations, canonical_certificate, canonical_coefficients, canonical_interpolant, Canonical,
    Certificate, SaturationReport, SaturationRun,
};
pub use discrete::{
    admm_solve, admm_solve_with, kkt_residual, kkt_residual_with, lambda_max, lambda_max_with,
    linear_regression, linear_regression_with, second_difference_matrix, Loss, Quadratic, SecondDiffMatrix,
    SolveResult, SolverOptions,
};
pub use error::{Error, Result};
pub use pipeline::{
    default_lambda_grid, fit, fit_with, lambda_grid, simulate, sweep, sweep_with, Fit, FitOptions,
    SimulationSpec, SweepEntry, SweepOptions, TradeoffPoint,
};
pub use solution_set::{
    envelope, envelope_contains, verify_solution, Envelope, IndexedTriangle, Triangle, VerifyReport,
};
pub use sparsify::{merge_pair, sparsest_solution, sparsify_run, RunChoice, RunChoices};
pub use spline::{connect, Knot, PwlSpline, SampleSet, EPS_ZERO};
