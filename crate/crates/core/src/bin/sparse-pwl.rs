use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use sparse_pwl::io::{
    fmt_f64, read_samples_csv, samples_to_csv, to_json, write_atomic, FitDocument, SCHEMA_VERSION,
};
use sparse_pwl::{
    analyze_saturations, envelope, fit, lambda_grid, lambda_max, simulate, sweep, verify_solution, Canonical,
    FitOptions, IndexedTriangle, PwlSpline, RunChoice, RunChoices, SaturationRun, SimulationSpec,
    SolverOptions, SweepOptions,
};

const EXIT_INPUT: u8 = 1;
const EXIT_UNCONVERGED: u8 = 2;
const EXIT_VERIFY_FAILED: u8 = 3;

/// Sparsest piecewise-linear interpolation and TV-regularized regression.
#[derive(Parser)]
#[command(name = "sparse-pwl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a sparsest spline at one regularization weight (0 interpolates).
    Fit(FitArgs),
    /// Fit over a grid of regularization weights and write the trade-off curve.
    Sweep(SweepArgs),
    /// Generate noisy samples of a random sparse spline.
    Simulate(SimulateArgs),
    /// Check whether a spline is a minimum-TV interpolant of the samples.
    Verify(VerifyArgs),
    /// Write the region containing every minimum-TV interpolant, for plotting.
    Envelope(EnvelopeArgs),
}

#[derive(Args)]
struct SolverArgs {
    /// Initial ADMM penalty.
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
    #[arg(long, default_value_t = 50_000)]
    max_iter: usize,
    /// Solver tolerance (residuals and optimality).
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Free-knot position for a run with even extension, as RUN_INDEX=T with T in [0, 1].
    #[arg(long = "t", value_name = "RUN_INDEX=T")]
    choices: Vec<String>,
}

impl SolverArgs {
    fn options(&self) -> anyhow::Result<FitOptions> {
        let solver = SolverOptions {
            rho: self.rho,
            max_iter: self.max_iter,
            tol_primal: self.tol,
            tol_dual: self.tol,
            tol_kkt: self.tol,
            ..SolverOptions::default()
        };
        let mut choices = RunChoices::new();
        for c in &self.choices {
            let (idx, t) = c.split_once('=').ok_or_else(|| anyhow!("--t expects RUN_INDEX=T, got '{c}'"))?;
            let idx: usize = idx.trim().parse().with_context(|| format!("--t: bad run index in '{c}'"))?;
            let t: f64 = t.trim().parse().with_context(|| format!("--t: bad value in '{c}'"))?;
            choices.insert(idx, RunChoice::new(t).with_context(|| format!("--t {c}"))?);
        }
        Ok(FitOptions { solver, choices })
    }
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    input: PathBuf,
    /// Result document path; standard output when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    lambda: f64,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    input: PathBuf,
    /// CSV path; standard output when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Number of log-spaced weights ending at lambda_max.
    #[arg(long = "lambda-grid", visible_alias = "grid", default_value_t = 20)]
    lambda_grid: usize,
    #[arg(long, default_value_t = 1e-5)]
    lambda_min_ratio: f64,
    /// Fit only at lambda_max.
    #[arg(long)]
    lambda_max_only: bool,
    /// Seed each fit with the previous solution (runs sequentially).
    #[arg(long)]
    warm_start: bool,
    /// Also write every fit document to OUTPUT.fits.json.
    #[arg(long)]
    emit_fits: bool,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 30)]
    m: usize,
    #[arg(long, default_value_t = 2)]
    knots: usize,
    #[arg(long, default_value_t = 1.0)]
    amplitude_variance: f64,
    #[arg(long, default_value_t = 4e-4)]
    noise_variance: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sample CSV path; standard output when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Ground-truth spline JSON; defaults to OUTPUT with extension truth.json.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    input: PathBuf,
    /// Spline JSON ({b0, b1, knots}) or a fit document, checked against its y_lambda.
    #[arg(long)]
    spline: PathBuf,
    #[arg(long, default_value_t = 1e-7)]
    tol: f64,
}

#[derive(Args)]
struct EnvelopeArgs {
    #[arg(long)]
    input: PathBuf,
    /// JSON path; standard output when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Certificate samples per gap between data points.
    #[arg(long, default_value_t = 1)]
    certificate_resolution: usize,
}

/// Writes to standard output; a closed pipe is not an error.
fn stdout(contents: &str) {
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(contents.as_bytes()).and_then(|_| out.flush());
}

fn emit(path: Option<&Path>, contents: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => write_atomic(p, contents.as_bytes()).map_err(Into::into),
        None => {
            stdout(contents);
            Ok(())
        }
    }
}

fn cmd_fit(args: &FitArgs) -> anyhow::Result<u8> {
    if !(args.lambda >= 0.0) {
        bail!("--lambda must be nonnegative, got {}", args.lambda);
    }
    let opts = args.solver.options()?;
    let s = read_samples_csv(&args.input)?;
    let f = fit(&s, args.lambda, &opts)?;
    emit(args.output.as_deref(), &to_json(&FitDocument::new(&f, lambda_max(&s))))?;
    if !f.solver.converged {
        eprintln!(
            "solver did not converge: kkt residual {:e} after {} iterations",
            f.solver.kkt_residual, f.solver.iterations
        );
        return Ok(EXIT_UNCONVERGED);
    }
    Ok(0)
}

fn cmd_sweep(args: &SweepArgs) -> anyhow::Result<u8> {
    let opts = args.solver.options()?;
    if args.emit_fits && args.output.is_none() {
        bail!("--emit-fits needs --output");
    }
    let s = read_samples_csv(&args.input)?;
    let lm = lambda_max(&s);
    let grid = if args.lambda_max_only {
        vec![lm]
    } else {
        lambda_grid(lm, args.lambda_grid, args.lambda_min_ratio)
            .context("--lambda-grid / --lambda-min-ratio")?
    };
    let sweep_opts = SweepOptions { fit: opts, warm_start: args.warm_start, threads: None };
    let entries = sweep(&s, &grid, &sweep_opts)?;

    let mut csv = format!("# lambda_max={}\nlambda,loss,sparsity,tv\n", fmt_f64(lm));
    let mut fits = Vec::with_capacity(entries.len());
    let mut trouble = 0;
    for e in &entries {
        match &e.outcome {
            Ok(f) => {
                csv.push_str(&format!(
                    "{},{},{},{}\n",
                    fmt_f64(f.lambda),
                    fmt_f64(f.loss_l2),
                    f.sparsity,
                    fmt_f64(f.tv)
                ));
                if !f.solver.converged {
                    trouble += 1;
                    eprintln!(
                        "lambda {}: solver did not converge (kkt {:e})",
                        e.lambda, f.solver.kkt_residual
                    );
                }
                fits.push(Some(FitDocument::new(f, lm)));
            }
            Err(err) => {
                trouble += 1;
                eprintln!("lambda {}: {err}", e.lambda);
                csv.push_str(&format!("# lambda={} failed: {err}\n", e.lambda));
                fits.push(None);
            }
        }
    }
    emit(args.output.as_deref(), &csv)?;
    if args.emit_fits {
        let out = args.output.as_ref().expect("checked above");
        let mut name = out.as_os_str().to_owned();
        name.push(".fits.json");
        write_atomic(Path::new(&name), to_json(&fits).as_bytes())?;
    }
    Ok(if trouble > 0 { EXIT_UNCONVERGED } else { 0 })
}

fn cmd_simulate(args: &SimulateArgs) -> anyhow::Result<u8> {
    let spec = SimulationSpec {
        m: args.m,
        ground_truth_knots: args.knots,
        amplitude_variance: args.amplitude_variance,
        noise_variance: args.noise_variance,
        rng_seed: args.seed,
    };
    let (s, truth) = simulate(&spec)?;
    emit(args.output.as_deref(), &samples_to_csv(&s))?;
    let truth_path =
        args.truth.clone().or_else(|| args.output.as_ref().map(|p| p.with_extension("truth.json")));
    if let Some(p) = truth_path {
        write_atomic(&p, to_json(&truth).as_bytes())?;
    }
    Ok(0)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Candidate {
    Fit(Box<FitDocument>),
    Spline(PwlSpline),
}

fn cmd_verify(args: &VerifyArgs) -> anyhow::Result<u8> {
    if !(args.tol > 0.0) {
        bail!("--tol must be positive, got {}", args.tol);
    }
    let s = read_samples_csv(&args.input)?;
    let text = std::fs::read_to_string(&args.spline).with_context(|| args.spline.display().to_string())?;
    let candidate: Candidate = serde_json::from_str(&text)
        .with_context(|| format!("{}: expected a spline or a fit document", args.spline.display()))?;
    let (target, spline) = match candidate {
        Candidate::Fit(doc) => (s.with_y(doc.y_lambda.clone())?, doc.spline),
        Candidate::Spline(f) => (s, f),
    };
    let report = verify_solution(&target, &spline, args.tol);
    stdout(&report.to_string());
    Ok(if report.passed { 0 } else { EXIT_VERIFY_FAILED })
}

#[derive(Serialize)]
struct CertificatePoint {
    x: f64,
    eta: f64,
}

#[derive(Serialize)]
struct EnvelopeDocument {
    schema: u32,
    base: PwlSpline,
    triangles: Vec<IndexedTriangle>,
    runs: Vec<SaturationRun>,
    certificate: Vec<CertificatePoint>,
}

fn cmd_envelope(args: &EnvelopeArgs) -> anyhow::Result<u8> {
    let s = read_samples_csv(&args.input)?;
    let e = envelope(&s);
    let cert = Canonical::new(&s).certificate(&s);
    let steps = args.certificate_resolution.max(1);
    let mut certificate = Vec::new();
    for w in s.x().windows(2) {
        for j in 0..steps {
            let t = w[0] + (w[1] - w[0]) * j as f64 / steps as f64;
            certificate.push(CertificatePoint { x: t, eta: cert.eval(t) });
        }
    }
    let last = s.x()[s.len() - 1];
    certificate.push(CertificatePoint { x: last, eta: cert.eval(last) });
    let doc = EnvelopeDocument {
        schema: SCHEMA_VERSION,
        base: e.base,
        triangles: e.triangles,
        runs: analyze_saturations(&cert).runs,
        certificate,
    };
    emit(args.output.as_deref(), &to_json(&doc))?;
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_INPUT) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Envelope(a) => cmd_envelope(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}
