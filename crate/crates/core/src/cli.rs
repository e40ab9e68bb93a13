//! Experiment configuration, CSV output and rate fitting.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{ExampleId, ProblemSpec};
use crate::solver::{PreconditionerKind, StopMode};
use crate::uzawa::{run_uzawa, GammaRule, SolverMode, StepRecord, StopReason, UzawaConfig};

pub const CSV_HEADER: &str = "# fembem-uzawa csv v1";
pub const CSV_COLUMNS: &str =
    "iterUZ,nE,errUZAWAH1,errUZAWABEM,estFEM,estBEM,estTOT,kBEM,kFEM,gamma,epsilon";

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub example: ExampleId,
    pub uzawa: UzawaConfig,
    pub output: Option<PathBuf>,
    pub seed: u64,
}

fn parse_value<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config {
        line,
        message: format!("invalid value for {key}: {value:?}"),
    })
}

fn check_range(line: usize, key: &str, ok: bool, range: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config {
            line,
            message: format!("{key} must be in {range}"),
        })
    }
}

/// Parse `key = value` lines; `#` starts a comment. `example` is required,
/// everything else has a default.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut example = None;
    let mut c = UzawaConfig::default();
    let mut tau = 1e-3;
    let mut lambda = None;
    let mut exact = false;
    let mut output = None;
    let mut seed = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap().trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(Error::Config {
                line,
                message: format!("expected `key = value`, got {content:?}"),
            });
        };
        let (key, value) = (key.trim(), value.trim());
        match key {
            "example" => example = Some(parse_value::<ExampleId>(line, key, value)?),
            "algorithm" => {
                c.gamma_rule = match value {
                    "fixed" | "fixed_gamma" => GammaRule::Fixed,
                    "adaptive" | "adaptive_gamma" => GammaRule::Adaptive,
                    _ => {
                        return Err(Error::Config {
                            line,
                            message: format!("unknown algorithm {value:?}"),
                        })
                    }
                }
            }
            "alpha" => {
                c.alpha = parse_value(line, key, value)?;
                check_range(line, key, c.alpha > 0.0, "(0, inf)")?;
            }
            "gamma" => {
                c.gamma = parse_value(line, key, value)?;
                check_range(line, key, c.gamma > 0.0 && c.gamma < 1.0, "(0, 1)")?;
            }
            "theta" => {
                c.theta = parse_value(line, key, value)?;
                check_range(line, key, c.theta > 0.0 && c.theta <= 1.0, "(0, 1]")?;
            }
            "tau" => {
                tau = parse_value(line, key, value)?;
                check_range(line, key, tau > 0.0 && tau < 1.0, "(0, 1)")?;
            }
            "lambda" => {
                let l: f64 = parse_value(line, key, value)?;
                check_range(line, key, (0.0..1.0).contains(&l), "[0, 1)")?;
                lambda = Some(l);
            }
            "epsilon1" => {
                c.epsilon1 = parse_value(line, key, value)?;
                check_range(line, key, c.epsilon1 > 0.0, "(0, inf)")?;
            }
            "c_bem" | "c_fem" => {
                let v: f64 = parse_value(line, key, value)?;
                check_range(line, key, v > 0.0, "(0, inf)")?;
                if key == "c_bem" {
                    c.c_bem = v;
                } else {
                    c.c_fem = v;
                }
            }
            "solver" => {
                exact = match value {
                    "exact" => true,
                    "pcg" => false,
                    _ => {
                        return Err(Error::Config {
                            line,
                            message: format!("unknown solver {value:?}"),
                        })
                    }
                }
            }
            "preconditioner" => {
                c.fem_preconditioner = match value {
                    "identity" => PreconditionerKind::Identity,
                    "jacobi" => PreconditionerKind::Jacobi,
                    "multilevel" => PreconditionerKind::LocalMultilevelDiagonal,
                    _ => {
                        return Err(Error::Config {
                            line,
                            message: format!("unknown preconditioner {value:?}"),
                        })
                    }
                }
            }
            "max_elements" => {
                c.max_elements = parse_value(line, key, value)?;
                check_range(line, key, c.max_elements > 0, "[1, inf)")?;
            }
            "max_outer" => {
                c.max_outer = parse_value(line, key, value)?;
                check_range(line, key, c.max_outer > 0, "[1, inf)")?;
            }
            "max_inner" => {
                c.max_inner = parse_value(line, key, value)?;
                check_range(line, key, c.max_inner > 0, "[1, inf)")?;
            }
            "nu_target" => {
                c.nu_target = parse_value(line, key, value)?;
                check_range(line, key, c.nu_target >= 0.0, "[0, inf)")?;
            }
            "output" => output = Some(PathBuf::from(value)),
            "seed" => seed = parse_value(line, key, value)?,
            _ => {
                return Err(Error::Config {
                    line,
                    message: format!("unknown key {key:?}"),
                })
            }
        }
    }
    let example = example.ok_or_else(|| Error::MissingKey("example".into()))?;
    c.solver = if exact {
        SolverMode::Exact
    } else {
        SolverMode::Pcg(match lambda {
            Some(l) => StopMode::Lambda(l),
            None => StopMode::Relative(tau),
        })
    };
    Ok(RunConfig {
        example,
        uzawa: c,
        output,
        seed,
    })
}

/// One CSV line per outer iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsvRow {
    pub j: usize,
    pub n_elements: usize,
    pub err_h1: f64,
    pub err_gamma: f64,
    pub est_fem: f64,
    pub est_bem: f64,
    pub est_tot: f64,
    pub k_bem: usize,
    pub k_fem: usize,
    pub gamma: f64,
    pub epsilon: f64,
}

impl From<&StepRecord> for CsvRow {
    fn from(r: &StepRecord) -> Self {
        Self {
            j: r.j,
            n_elements: r.n_elements,
            err_h1: r.err_h1,
            err_gamma: r.err_gamma,
            est_fem: r.est_fem,
            est_bem: r.est_bem,
            est_tot: r.est_tot,
            k_bem: r.k_bem,
            k_fem: r.k_fem,
            gamma: r.gamma,
            epsilon: r.epsilon,
        }
    }
}

impl CsvRow {
    pub fn to_line(&self) -> String {
        format!(
            "{},{},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{},{},{:.8e},{:.8e}",
            self.j,
            self.n_elements,
            self.err_h1,
            self.err_gamma,
            self.est_fem,
            self.est_bem,
            self.est_tot,
            self.k_bem,
            self.k_fem,
            self.gamma,
            self.epsilon
        )
    }

    pub fn parse(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 11 {
            return Err(Error::InsufficientData(format!("expected 11 fields, got {}", f.len())));
        }
        let bad = |k: usize| Error::InsufficientData(format!("bad field {k}: {:?}", f[k]));
        let u = |k: usize| f[k].parse::<usize>().map_err(|_| bad(k));
        let r = |k: usize| f[k].parse::<f64>().map_err(|_| bad(k));
        Ok(Self {
            j: u(0)?,
            n_elements: u(1)?,
            err_h1: r(2)?,
            err_gamma: r(3)?,
            est_fem: r(4)?,
            est_bem: r(5)?,
            est_tot: r(6)?,
            k_bem: u(7)?,
            k_fem: u(8)?,
            gamma: r(9)?,
            epsilon: r(10)?,
        })
    }
}

/// Data lines of a CSV produced by [`run_experiment`]; comments and the
/// column line are skipped.
pub fn read_csv(text: &str) -> Result<Vec<CsvRow>> {
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty() && !l.starts_with("iterUZ"))
        .map(CsvRow::parse)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Column {
    ErrH1,
    ErrGamma,
    /// `errH1 + errGamma`.
    ErrTotal,
    EstFem,
    EstBem,
    EstTot,
}

impl Column {
    pub fn value(self, row: &CsvRow) -> f64 {
        match self {
            Column::ErrH1 => row.err_h1,
            Column::ErrGamma => row.err_gamma,
            Column::ErrTotal => row.err_h1 + row.err_gamma,
            Column::EstFem => row.est_fem,
            Column::EstBem => row.est_bem,
            Column::EstTot => row.est_tot,
        }
    }
}

/// Least-squares slope of `log y` against `log n` over the points with
/// `n >= max(n) / 10`. At least five such points are required.
pub fn fit_loglog_slope(n: &[f64], y: &[f64]) -> Result<f64> {
    if n.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: n.len(),
            got: y.len(),
        });
    }
    let nmax = n.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let pts: Vec<(f64, f64)> = n
        .iter()
        .zip(y)
        .filter(|(&a, &b)| a >= nmax / 10.0 && a > 0.0 && b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 5 {
        return Err(Error::InsufficientData(format!(
            "{} points in the final decade, need 5",
            pts.len()
        )));
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("all points have the same element count".into()));
    }
    Ok(sxy / sxx)
}

pub fn fit_slope(rows: &[CsvRow], column: Column) -> Result<f64> {
    let n: Vec<f64> = rows.iter().map(|r| r.n_elements as f64).collect();
    let y: Vec<f64> = rows.iter().map(|r| column.value(r)).collect();
    fit_loglog_slope(&n, &y)
}

/// CSV text for a finished (or aborted) run.
pub fn format_csv(config: &RunConfig, rows: &[CsvRow], trailer: &[String]) -> String {
    let mut s = String::new();
    let u = &config.uzawa;
    writeln!(s, "{CSV_HEADER}").unwrap();
    writeln!(
        s,
        "# example={} algorithm={:?} alpha={} gamma={} theta={} epsilon1={} solver={:?}",
        config.example, u.gamma_rule, u.alpha, u.gamma, u.theta, u.epsilon1, u.solver
    )
    .unwrap();
    writeln!(s, "{CSV_COLUMNS}").unwrap();
    for r in rows {
        writeln!(s, "{}", r.to_line()).unwrap();
    }
    for t in trailer {
        writeln!(s, "# {t}").unwrap();
    }
    s
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub rows: Vec<CsvRow>,
    pub records: Vec<StepRecord>,
    /// `None` if a solver failed; the error is in `failure`.
    pub stop: Option<StopReason>,
    pub failure: Option<String>,
    pub warnings: Vec<String>,
    pub csv: String,
}

fn warnings(records: &[StepRecord]) -> Vec<String> {
    let mut out = Vec::new();
    for r in records {
        if !r.bem_converged {
            out.push(format!("step {}: BEM inner loop hit its iteration limit", r.j));
        }
        if !r.fem_converged {
            out.push(format!("step {}: FEM inner loop hit its iteration limit", r.j));
        }
        if r.gamma_clamped {
            out.push(format!("step {}: update ratio >= 1, gamma clamped", r.j));
        }
    }
    out
}

/// Run the configured experiment and write the CSV to `config.output` if set.
/// Solver failures end the run early and are reported in the trailer.
pub fn run_experiment(config: &RunConfig, mut observe: impl FnMut(&StepRecord)) -> Result<ExperimentOutcome> {
    let spec = ProblemSpec::new(config.example);
    let mut records = Vec::new();
    let result = run_uzawa(&spec, &config.uzawa, |r| {
        observe(r);
        records.push(r.clone());
    });
    let (stop, failure) = match result {
        Ok(t) => (Some(t.stop), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let rows: Vec<CsvRow> = records.iter().map(CsvRow::from).collect();
    let warnings = warnings(&records);
    let mut trailer = warnings.clone();
    match (&stop, &failure) {
        (Some(s), _) => trailer.push(format!("stop: {s:?}")),
        (None, Some(e)) => trailer.push(format!("solver failure: {e}")),
        _ => {}
    }
    let csv = format_csv(config, &rows, &trailer);
    if let Some(path) = &config.output {
        write_file(path, &csv)?;
    }
    Ok(ExperimentOutcome {
        rows,
        records,
        stop,
        failure,
        warnings,
        csv,
    })
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    std::fs::write(path, text)?;
    Ok(())
}
