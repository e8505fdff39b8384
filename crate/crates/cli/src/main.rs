//! `spinlab <subcommand> [--config PATH] [--seed U64] [--threads INT]
//! [--out DIR] [--single-thread]`
//!
//! Exit codes: 0 when every check passes, 1 when a check fails, 2 for
//! configuration errors (including an unknown subcommand), 3 for any other
//! error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use spinlab::experiment::{run, ExperimentConfig, Subcommand};
use spinlab::field::MemoryBudget;
use spinlab::Error;

#[derive(Debug, Parser)]
#[command(name = "spinlab", version, about = "Spherical mixed p-spin experiments")]
struct Cli {
    /// One of: covariance-check, coarea-check, poincare-check,
    /// free-energy-sweep, superadd-table, interp-endpoints,
    /// interp-derivative, positivity-scan, lipschitz-audit,
    /// lemma-estimate-audit.
    subcommand: String,

    /// TOML config; defaults apply to every missing key.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Overrides the master seed of the config.
    #[arg(long)]
    seed: Option<u64>,

    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,

    /// Overrides the output directory of the config.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Runs every cell on one thread in canonical order.
    #[arg(long)]
    single_thread: bool,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } => 2,
        _ => 3,
    }
}

fn execute(cli: Cli) -> Result<bool, Error> {
    let sub: Subcommand = cli.subcommand.parse()?;
    let mut config = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    if let Some(o) = cli.out {
        config.out_dir = o;
    }
    let threads = if cli.single_thread { Some(1) } else { cli.threads };
    if let Some(t) = threads {
        if t == 0 {
            return Err(Error::Config {
                key: "threads".into(),
                reason: "must be positive".into(),
            });
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::Config {
                key: "threads".into(),
                reason: e.to_string(),
            })?;
    }
    let memory = MemoryBudget::from_env()?;
    let outcome = run(&config, sub, memory)?;
    for c in &outcome.report.checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    println!("wrote {}", outcome.written.csv.display());
    println!("wrote {}", outcome.written.summary.display());
    Ok(outcome.passed())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
