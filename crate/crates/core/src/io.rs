//! Sample CSV files, result documents, and atomic file writes.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::canonical::SaturationRun;
use crate::error::{invalid, Error, Result};
use crate::pipeline::Fit;
use crate::spline::{PwlSpline, SampleSet};

/// Parses two-column `x,y` CSV text. A first row that does not parse as
/// numbers is taken as a header. Rows must be strictly increasing in `x`.
pub fn parse_samples_csv(text: &str) -> Result<SampleSet> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(text.as_bytes());
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (n, record) in reader.records().enumerate() {
        let record = record.map_err(|e| invalid(format!("malformed CSV: {e}")))?;
        let row = record.position().map_or(n as u64 + 1, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        if record.len() != 2 {
            return Err(invalid(format!("row {row}: expected 2 columns, found {}", record.len())));
        }
        let parsed = (record[0].parse::<f64>(), record[1].parse::<f64>());
        let (xv, yv) = match parsed {
            (Ok(a), Ok(b)) => (a, b),
            _ if x.is_empty() && n == 0 => continue,
            _ => {
                return Err(invalid(format!(
                    "row {row}: cannot parse '{}' and '{}' as numbers",
                    &record[0], &record[1]
                )))
            }
        };
        if !xv.is_finite() || !yv.is_finite() {
            return Err(invalid(format!("row {row}: values must be finite")));
        }
        if let Some(&prev) = x.last() {
            if !(xv > prev) {
                let what = if xv == prev { "duplicate" } else { "decreasing" };
                return Err(invalid(format!(
                    "row {row}: {what} x = {xv} (previous x = {prev}); x must be strictly increasing"
                )));
            }
        }
        x.push(xv);
        y.push(yv);
    }
    SampleSet::new(x, y)
}

pub fn read_samples_csv(path: &Path) -> Result<SampleSet> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_samples_csv(&text).map_err(|e| invalid(format!("{}: {}", path.display(), strip_prefix(&e))))
}

fn strip_prefix(e: &Error) -> String {
    match e {
        Error::InvalidInput(msg) => msg.clone(),
        other => other.to_string(),
    }
}

pub fn samples_to_csv(s: &SampleSet) -> String {
    let mut out = String::from("x,y\n");
    for (x, y) in s.x().iter().zip(s.y()) {
        out.push_str(&format!("{},{}\n", fmt_f64(*x), fmt_f64(*y)));
    }
    out
}

/// Shortest round-trip text for `v`, in exponent form for very small or
/// very large magnitudes.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-4..1e16).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

pub const SCHEMA_VERSION: u32 = 1;

/// Result document of a single fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDocument {
    pub schema: u32,
    pub lambda: f64,
    pub lambda_max: f64,
    pub y_lambda: Vec<f64>,
    pub spline: PwlSpline,
    pub sparsity: usize,
    pub loss_l2: f64,
    pub objective: f64,
    pub tv: f64,
    pub iterations: usize,
    pub kkt_residual: f64,
    pub converged: bool,
    pub runs: Vec<SaturationRun>,
    pub dof: usize,
}

impl FitDocument {
    pub fn new(f: &Fit, lambda_max: f64) -> Self {
        Self {
            schema: SCHEMA_VERSION,
            lambda: f.lambda,
            lambda_max,
            y_lambda: f.y_lambda.clone(),
            spline: f.spline.clone(),
            sparsity: f.sparsity,
            loss_l2: f.loss_l2,
            objective: f.objective,
            tv: f.tv,
            iterations: f.solver.iterations,
            kkt_residual: f.solver.kkt_residual,
            converged: f.solver.converged,
            runs: f.report.runs.clone(),
            dof: f.report.dof,
        }
    }
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("documents serialize");
    s.push('\n');
    s
}

/// Writes through a temporary file in the target directory and renames it
/// into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let io = |e: std::io::Error| Error::Io(format!("{}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}
