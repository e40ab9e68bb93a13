use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fembem_uzawa::cli::{fit_slope, parse_config, run_experiment, Column};

#[derive(Parser)]
#[command(name = "uzawa", version, about = "Adaptive FEM-BEM coupling experiments")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file and write a CSV.
    Run {
        config: PathBuf,
        /// CSV destination (overrides `output` in the config; stdout if neither is set).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Stop once the mesh has more than N triangles.
        #[arg(long, value_name = "N")]
        budget_elements: Option<usize>,
        /// Print one line per outer iteration to stderr.
        #[arg(long)]
        verbose: bool,
    },
}

fn main() -> ExitCode {
    let Command::Run {
        config,
        out,
        budget_elements,
        verbose,
    } = Args::parse().command;
    let text = match std::fs::read_to_string(&config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("cannot read {}: {e}", config.display());
            return ExitCode::from(2);
        }
    };
    let mut cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{}: {e}", config.display());
            return ExitCode::from(2);
        }
    };
    if let Some(n) = budget_elements {
        cfg.uzawa.max_elements = n;
    }
    if out.is_some() {
        cfg.output = out;
    }
    let outcome = run_experiment(&cfg, |r| {
        if verbose {
            eprintln!(
                "j={:4} nE={:7} errH1={:.3e} errGamma={:.3e} nu={:.3e} kBEM={} kFEM={}",
                r.j, r.n_elements, r.err_h1, r.err_gamma, r.est_tot, r.k_bem, r.k_fem
            );
        }
    });
    let outcome = match outcome {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
    };
    if cfg.output.is_none() {
        print!("{}", outcome.csv);
    }
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    if verbose {
        if let Ok(s) = fit_slope(&outcome.rows, Column::ErrTotal) {
            eprintln!("slope of errH1+errGamma over the final decade: {s:.3}");
        }
    }
    if let Some(e) = outcome.failure {
        eprintln!("solver failure: {e}");
        return ExitCode::from(3);
    }
    ExitCode::SUCCESS
}
