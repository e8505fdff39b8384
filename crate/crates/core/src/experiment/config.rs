use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::MemoryBudget;
use crate::interpolation::McmcParams;
use crate::mixture::{check_c, Mixture};

fn config_err(key: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::Config {
        key: key.into(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CovarianceSection {
    pub n_pairs: usize,
    pub n_draws: usize,
    pub max_z: f64,
}

impl Default for CovarianceSection {
    fn default() -> Self {
        Self {
            n_pairs: 20,
            n_draws: 10_000,
            max_z: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoareaSection {
    /// Band half-widths; empty means the top-level `a`.
    pub a_values: Vec<f64>,
    pub tolerance: f64,
}

impl Default for CoareaSection {
    fn default() -> Self {
        Self {
            a_values: Vec::new(),
            tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PoincareSection {
    pub n_values: Vec<usize>,
    pub m: usize,
    pub k: usize,
}

impl Default for PoincareSection {
    fn default() -> Self {
        Self {
            n_values: vec![2, 10_000],
            m: 2,
            k: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FreeEnergySection {
    /// Whether the sweep estimates `F̄_N` rather than `F_N`.
    pub perturbed: bool,
    pub oracle_draws: usize,
    pub oracle_n_inner: usize,
    pub max_z: f64,
}

impl Default for FreeEnergySection {
    fn default() -> Self {
        Self {
            perturbed: false,
            oracle_draws: 20,
            oracle_n_inner: 100_000,
            max_z: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SuperaddSection {
    pub sigmas: f64,
    /// Allowed negative defect per unit of `M`.
    pub slack_per_m: f64,
}

impl Default for SuperaddSection {
    fn default() -> Self {
        Self {
            sigmas: 3.0,
            slack_per_m: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EndpointsSection {
    pub sigmas: f64,
}

impl Default for EndpointsSection {
    fn default() -> Self {
        Self { sigmas: 3.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DerivativeSection {
    pub ts: Vec<f64>,
    pub h: f64,
    pub sigmas: f64,
}

impl Default for DerivativeSection {
    fn default() -> Self {
        Self {
            ts: vec![0.25, 0.5, 0.75],
            h: 0.05,
            sigmas: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PositivitySection {
    pub ts: Vec<f64>,
    pub random_pairs: usize,
    /// Mixtures for the `U⁺` sign audit; empty means the top-level mixture.
    pub audit_mixtures: Vec<Vec<f64>>,
}

impl Default for PositivitySection {
    fn default() -> Self {
        Self {
            ts: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            random_pairs: 1_000_000,
            audit_mixtures: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LipschitzSection {
    /// Total dimensions `N + M`, each split as evenly as possible.
    pub n_total: Vec<usize>,
}

impl Default for LipschitzSection {
    fn default() -> Self {
        Self { n_total: vec![16] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LemmaSection {
    pub n_pairs: usize,
    /// Offsets of `r` from `√M`.
    pub offsets: Vec<f64>,
}

impl Default for LemmaSection {
    fn default() -> Self {
        Self {
            n_pairs: 10_000,
            offsets: vec![0.3, -0.3],
        }
    }
}

/// Resolved experiment configuration. Top-level keys are shared by every
/// subcommand; each subcommand also reads its own table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// `γ_1, γ_2, …`.
    pub mixture: Vec<f64>,
    pub p_max: Option<usize>,
    pub c: f64,
    pub a: f64,
    pub eps: f64,
    /// Sizes `N`; product experiments pair them with `m`.
    pub n: Vec<usize>,
    pub m: Vec<usize>,
    pub n_disorder: usize,
    pub n_inner: usize,
    pub chain_len: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub n_probes: usize,
    pub covariance_check: CovarianceSection,
    pub coarea_check: CoareaSection,
    pub poincare_check: PoincareSection,
    pub free_energy_sweep: FreeEnergySection,
    pub superadd_table: SuperaddSection,
    pub interp_endpoints: EndpointsSection,
    pub interp_derivative: DerivativeSection,
    pub positivity_scan: PositivitySection,
    pub lipschitz_audit: LipschitzSection,
    pub lemma_estimate_audit: LemmaSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: "default".into(),
            seed: 0,
            out_dir: PathBuf::from("results"),
            mixture: vec![0.0, 1.0],
            p_max: None,
            c: 0.375,
            a: 0.5,
            eps: 0.2,
            n: vec![4],
            m: vec![4],
            n_disorder: 64,
            n_inner: 20_000,
            chain_len: 12_000,
            burn_in: 2_000,
            thin: 5,
            n_probes: 200,
            covariance_check: CovarianceSection::default(),
            coarea_check: CoareaSection::default(),
            poincare_check: PoincareSection::default(),
            free_energy_sweep: FreeEnergySection::default(),
            superadd_table: SuperaddSection::default(),
            interp_endpoints: EndpointsSection::default(),
            interp_derivative: DerivativeSection::default(),
            positivity_scan: PositivitySection::default(),
            lipschitz_audit: LipschitzSection::default(),
            lemma_estimate_audit: LemmaSection::default(),
        }
    }
}

fn parse_err(e: toml::de::Error) -> Error {
    // the first backquoted name in toml's message is the offending key
    let msg = e.message().to_string();
    let key = msg.split('`').nth(1).unwrap_or("config").to_string();
    config_err(key, msg)
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(parse_err)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| config_err(path.display().to_string(), e.to_string()))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn mixture(&self) -> Result<Mixture> {
        let m = match self.p_max {
            Some(p) => Mixture::with_p_max(&self.mixture, p),
            None => Mixture::new(&self.mixture),
        };
        m.map_err(|e| config_err("mixture", e.to_string()))
    }

    pub fn mcmc(&self) -> McmcParams {
        McmcParams {
            burn_in: self.burn_in,
            thin: self.thin,
            chain_len: self.chain_len,
            ..McmcParams::default()
        }
    }

    /// `(N, M)` pairs for the product-space subcommands.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.n.iter().copied().zip(self.m.iter().copied()).collect()
    }

    /// Checks every invariant of the schema; errors name the failing key.
    pub fn validate(&self, memory: MemoryBudget) -> Result<()> {
        let mix = self.mixture()?;
        check_c(self.c).map_err(|e| config_err("c", e.to_string()))?;
        if !(self.a > 0.0 && self.a < 1.0) {
            return Err(config_err("a", format!("{} is not in (0, 1)", self.a)));
        }
        if !(0.0..1.0).contains(&self.eps) {
            return Err(config_err("eps", format!("{} is not in [0, 1)", self.eps)));
        }
        if self.experiment.is_empty() || self.experiment.contains(['/', '\\']) {
            return Err(config_err("experiment", "must be a nonempty plain name"));
        }
        for (key, v) in [
            ("n_disorder", self.n_disorder),
            ("n_inner", self.n_inner),
            ("chain_len", self.chain_len),
            ("thin", self.thin),
            ("n_probes", self.n_probes),
        ] {
            if v == 0 {
                return Err(config_err(key, "must be positive"));
            }
        }
        if self.n_disorder < 8 {
            return Err(config_err("n_disorder", "need at least 8 disorder draws"));
        }
        self.mcmc()
            .validate()
            .map_err(|e| config_err("chain_len", e.to_string()))?;
        if self.n.is_empty() || self.n.contains(&0) {
            return Err(config_err("n", "need a nonempty list of positive sizes"));
        }
        if self.m.len() != self.n.len() || self.m.contains(&0) {
            return Err(config_err("m", "must list one positive size per entry of n"));
        }
        let degrees: Vec<usize> = (1..=mix.p_max()).collect();
        for (n, m) in self.pairs() {
            memory
                .check(n + m, &degrees)
                .map_err(|e| config_err("n", format!("N + M = {}: {e}", n + m)))?;
        }
        let sections: [(&str, bool); 8] = [
            (
                "covariance_check",
                self.covariance_check.n_pairs > 0 && self.covariance_check.n_draws >= 100,
            ),
            ("coarea_check", self.coarea_check.tolerance > 0.0),
            (
                "poincare_check",
                self.poincare_check.k >= 1000 && self.poincare_check.m > 0,
            ),
            (
                "free_energy_sweep",
                self.free_energy_sweep.oracle_draws > 0 && self.free_energy_sweep.oracle_n_inner >= 100,
            ),
            ("interp_derivative", self.interp_derivative.h > 0.0),
            ("positivity_scan", self.positivity_scan.random_pairs > 0),
            ("lipschitz_audit", !self.lipschitz_audit.n_total.iter().any(|&n| n < 2)),
            ("lemma_estimate_audit", self.lemma_estimate_audit.n_pairs > 0),
        ];
        for (key, ok) in sections {
            if !ok {
                return Err(config_err(key, "budgets must be positive (see defaults)"));
            }
        }
        for &a in &self.coarea_check.a_values {
            if !(a > 0.0 && a < 1.0) {
                return Err(config_err("coarea_check.a_values", format!("{a} is not in (0, 1)")));
            }
        }
        for &t in self.interp_derivative.ts.iter().chain(&self.positivity_scan.ts) {
            if !(0.0..=1.0).contains(&t) {
                return Err(config_err("ts", format!("{t} is not in [0, 1]")));
            }
        }
        for gammas in &self.positivity_scan.audit_mixtures {
            Mixture::new(gammas).map_err(|e| config_err("positivity_scan.audit_mixtures", e.to_string()))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let c = ExperimentConfig::default();
        c.validate(MemoryBudget::default()).unwrap();
        let back = ExperimentConfig::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn partial_file_fills_defaults() {
        let c = ExperimentConfig::from_toml_str(
            "experiment = \"x\"\nmixture = [0.0, 0.5]\nn = [1, 2]\nm = [1, 2]\n[superadd_table]\nslack_per_m = 0.1\n",
        )
        .unwrap();
        assert_eq!(c.superadd_table.slack_per_m, 0.1);
        assert_eq!(c.superadd_table.sigmas, 3.0);
        assert_eq!(c.pairs(), vec![(1, 1), (2, 2)]);
        c.validate(MemoryBudget::default()).unwrap();
    }

    #[test]
    fn errors_name_the_key() {
        let key = |s: &str| match ExperimentConfig::from_toml_str(s).and_then(|c| c.validate(MemoryBudget::default())) {
            Err(Error::Config { key, .. }) => key,
            other => panic!("expected a config error, got {other:?}"),
        };
        assert_eq!(key("bogus = 1"), "bogus");
        assert_eq!(key("[superadd_table]\nbogus = 1"), "bogus");
        assert_eq!(key("c = 0.6"), "c");
        assert_eq!(key("a = 1.0"), "a");
        assert_eq!(key("n_inner = 0"), "n_inner");
        assert_eq!(key("n = [4, 4]"), "m");
        assert_eq!(key("mixture = [-1.0]"), "mixture");
        let tiny = ExperimentConfig {
            n: vec![400],
            m: vec![400],
            ..ExperimentConfig::default()
        };
        assert!(matches!(tiny.validate(MemoryBudget::from_mib(1)), Err(Error::Config { key, .. }) if key == "n"));
    }
}
