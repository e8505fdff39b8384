use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::Subcommand;
use crate::error::{Error, Result};

/// Version of every CSV layout and of `summary.json`.
pub const SCHEMA_VERSION: u32 = 1;

/// One pass/fail judgement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

/// Rows and checks produced by one subcommand.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            rows: Vec::new(),
            checks: Vec::new(),
        }
    }

    pub fn row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.columns.len());
        self.rows.push(cells);
    }

    pub fn check(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check::new(name, passed, detail));
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Renders a cell; floats use the shortest round-trip form.
pub fn cell<T: std::fmt::Display>(v: T) -> String {
    v.to_string()
}

/// CSV text: two `#` lines (schema and resolved config as JSON), the
/// header row, then the rows.
pub fn render_csv(sub: Subcommand, config: &ExperimentConfig, report: &Report) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    writeln!(out, "# schema: spinlab.{}.v{}", sub.as_str(), SCHEMA_VERSION)?;
    writeln!(out, "# config: {}", serde_json::to_string(config)?)?;
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(&report.columns)?;
        for row in &report.rows {
            w.write_record(row)?;
        }
        w.flush()?;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub timestamp_unix: u64,
    pub csv: PathBuf,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub config: ExperimentConfig,
}

/// `summary.json`: one entry per subcommand run in the experiment directory.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub experiment: String,
    pub runs: BTreeMap<String, RunSummary>,
}

impl Summary {
    pub fn read(path: &Path) -> Result<Option<Self>> {
        match fs::read_to_string(path) {
            Ok(s) => Ok(Some(serde_json::from_str(&s)?)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(Error::Io(e)),
        }
    }
}

/// Paths written by one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Written {
    pub csv: PathBuf,
    pub summary: PathBuf,
}

pub fn write_outputs(sub: Subcommand, config: &ExperimentConfig, report: &Report) -> Result<Written> {
    let dir = config.out_dir.join(&config.experiment);
    fs::create_dir_all(&dir)?;
    let csv = dir.join(format!("{}.csv", sub.as_str()));
    fs::write(&csv, render_csv(sub, config, report)?)?;
    let summary_path = dir.join("summary.json");
    let mut summary = Summary::read(&summary_path)?.unwrap_or_default();
    summary.schema_version = SCHEMA_VERSION;
    summary.experiment = config.experiment.clone();
    let timestamp_unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    summary.runs.insert(
        sub.as_str().to_string(),
        RunSummary {
            schema_version: SCHEMA_VERSION,
            timestamp_unix,
            csv: csv.clone(),
            passed: report.passed(),
            checks: report.checks.clone(),
            config: config.clone(),
        },
    );
    fs::write(&summary_path, serde_json::to_string_pretty(&summary)?)?;
    Ok(Written {
        csv,
        summary: summary_path,
    })
}
