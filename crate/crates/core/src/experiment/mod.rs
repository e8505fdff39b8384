//! Config-driven batch runner. Each [`Subcommand`] reads an
//! [`ExperimentConfig`], computes its table, and writes
//! `<out_dir>/<experiment>/<subcommand>.csv` plus an entry in
//! `<out_dir>/<experiment>/summary.json`.
//!
//! Seeds: every subcommand derives its streams from
//! `derive_seed(config.seed, <subcommand>, <cell>)`, so a rerun with the same
//! config reproduces the CSV byte for byte. Only the summary timestamp
//! changes.

mod config;
mod output;
mod runners;

use std::fmt;
use std::str::FromStr;

pub use config::{
    CoareaSection, CovarianceSection, DerivativeSection, EndpointsSection, ExperimentConfig, FreeEnergySection,
    LemmaSection, LipschitzSection, PoincareSection, PositivitySection, SuperaddSection,
};
pub use output::{render_csv, Check, Report, RunSummary, Summary, Written, SCHEMA_VERSION};

use crate::error::{Error, Result};
use crate::field::MemoryBudget;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Subcommand {
    CovarianceCheck,
    CoareaCheck,
    PoincareCheck,
    FreeEnergySweep,
    SuperaddTable,
    InterpEndpoints,
    InterpDerivative,
    PositivityScan,
    LipschitzAudit,
    LemmaEstimateAudit,
}

impl Subcommand {
    pub const ALL: [Subcommand; 10] = [
        Subcommand::CovarianceCheck,
        Subcommand::CoareaCheck,
        Subcommand::PoincareCheck,
        Subcommand::FreeEnergySweep,
        Subcommand::SuperaddTable,
        Subcommand::InterpEndpoints,
        Subcommand::InterpDerivative,
        Subcommand::PositivityScan,
        Subcommand::LipschitzAudit,
        Subcommand::LemmaEstimateAudit,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Subcommand::CovarianceCheck => "covariance-check",
            Subcommand::CoareaCheck => "coarea-check",
            Subcommand::PoincareCheck => "poincare-check",
            Subcommand::FreeEnergySweep => "free-energy-sweep",
            Subcommand::SuperaddTable => "superadd-table",
            Subcommand::InterpEndpoints => "interp-endpoints",
            Subcommand::InterpDerivative => "interp-derivative",
            Subcommand::PositivityScan => "positivity-scan",
            Subcommand::LipschitzAudit => "lipschitz-audit",
            Subcommand::LemmaEstimateAudit => "lemma-estimate-audit",
        }
    }
}

impl fmt::Display for Subcommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Subcommand {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Subcommand::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::Config {
                key: "subcommand".into(),
                reason: format!(
                    "unknown subcommand `{s}`; expected one of {}",
                    Subcommand::ALL.map(|c| c.as_str()).join(", ")
                ),
            })
    }
}

/// Result of [`run`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub report: Report,
    pub written: Written,
}

impl RunOutcome {
    pub fn passed(&self) -> bool {
        self.report.passed()
    }
}

/// Computes the table of `sub` without touching the filesystem.
pub fn compute(config: &ExperimentConfig, sub: Subcommand, memory: MemoryBudget) -> Result<Report> {
    config.validate(memory)?;
    let seed = crate::rng::derive_seed(config.seed, sub.as_str(), 0);
    match sub {
        Subcommand::CovarianceCheck => runners::covariance(config, seed),
        Subcommand::CoareaCheck => runners::coarea(config),
        Subcommand::PoincareCheck => runners::poincare(config, seed),
        Subcommand::FreeEnergySweep => runners::free_energy_sweep(config, seed, memory),
        Subcommand::SuperaddTable => runners::superadd(config, seed, memory),
        Subcommand::InterpEndpoints => runners::endpoints(config, seed, memory),
        Subcommand::InterpDerivative => runners::derivative(config, seed),
        Subcommand::PositivityScan => runners::positivity(config, seed, memory),
        Subcommand::LipschitzAudit => runners::lipschitz(config, seed),
        Subcommand::LemmaEstimateAudit => runners::lemma(config, seed),
    }
}

/// Validates, computes and writes the outputs of `sub`.
pub fn run(config: &ExperimentConfig, sub: Subcommand, memory: MemoryBudget) -> Result<RunOutcome> {
    let report = compute(config, sub, memory)?;
    let written = output::write_outputs(sub, config, &report)?;
    Ok(RunOutcome { report, written })
}
