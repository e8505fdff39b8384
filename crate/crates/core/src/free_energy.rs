//! Log-partition estimators and quenched free energies.
//!
//! `log ∫ e^{H} dμ` is computed either by a deterministic quadrature rule
//! (spheres of dimension ≤ 3 and small products of them) or by plain Monte
//! Carlo with log-mean-exp. The Monte Carlo estimator is biased downward by
//! Jensen; its jackknife bias estimate is reported next to the value and
//! never subtracted.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
pub use crate::field::Energy;
use crate::field::{DisorderSpec, FieldBundle, MemoryBudget, SingleSphereDisorder};
use crate::mixture::{expected_eta_at_one, Mixture};
use crate::quadrature::gauss_legendre;
use crate::rng::{self, derive_seed};
use crate::sphere::fill_uniform_sphere;
use crate::stats::{combined_stderr, pairwise_sum, MeanEstimate};

/// Largest product quadrature rule evaluated exactly.
pub const MAX_PRODUCT_NODES: usize = 1 << 20;

/// Integration domain with its uniform probability measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Domain {
    /// `S_N` with `μ_N`.
    Sphere(usize),
    /// `S_N × S_M` with `μ_N × μ_M`, points concatenated as `(ρ, τ)`.
    Product(usize, usize),
}

impl Domain {
    pub fn dim(&self) -> usize {
        match *self {
            Domain::Sphere(n) => n,
            Domain::Product(n, m) => n + m,
        }
    }

    /// Number of sites used for per-site normalization.
    pub fn sites(&self) -> usize {
        self.dim()
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Domain::Sphere(0) | Domain::Product(0, _) | Domain::Product(_, 0) => {
                Err(invalid("domain", "dimensions must be at least 1"))
            }
            _ => Ok(()),
        }
    }

    /// Overwrites `buf` with a uniform sample.
    pub fn sample_into<R: Rng + ?Sized>(&self, buf: &mut [f64], rng: &mut R) {
        match *self {
            Domain::Sphere(n) => fill_uniform_sphere(buf, (n as f64).sqrt(), rng),
            Domain::Product(n, m) => {
                let (a, b) = buf.split_at_mut(n);
                fill_uniform_sphere(a, (n as f64).sqrt(), rng);
                fill_uniform_sphere(b, (m as f64).sqrt(), rng);
            }
        }
    }

    /// Whether [`exact_log_partition`] supports this domain.
    pub fn has_exact_rule(&self, rule: &RuleSize) -> bool {
        match *self {
            Domain::Sphere(n) => n <= 3,
            Domain::Product(n, m) => {
                n <= 3 && m <= 3 && rule.nodes(n).saturating_mul(rule.nodes(m)) <= MAX_PRODUCT_NODES
            }
        }
    }
}

/// Node counts of the sphere rules: `circle` equispaced nodes on `S_2`,
/// `polar × azimuth` Gauss–Legendre/trapezoid nodes on `S_3`. `rotation`
/// shifts every azimuthal angle (used to test rotation invariance).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuleSize {
    pub circle: usize,
    pub polar: usize,
    pub azimuth: usize,
    pub rotation: f64,
}

impl Default for RuleSize {
    fn default() -> Self {
        Self {
            circle: 4096,
            polar: 256,
            azimuth: 512,
            rotation: 0.0,
        }
    }
}

impl RuleSize {
    fn nodes(&self, n: usize) -> usize {
        match n {
            1 => 2,
            2 => self.circle,
            3 => self.polar * self.azimuth,
            _ => usize::MAX,
        }
    }

    /// Halved node counts (convergence studies).
    pub fn halved(&self) -> Self {
        Self {
            circle: self.circle / 2,
            polar: self.polar / 2,
            azimuth: self.azimuth / 2,
            rotation: self.rotation,
        }
    }
}

/// Points of `S_n` (n ≤ 3) with weights summing to one.
fn sphere_rule(n: usize, rule: &RuleSize) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let r = (n as f64).sqrt();
    let two_pi = 2.0 * std::f64::consts::PI;
    match n {
        1 => Ok((vec![vec![1.0], vec![-1.0]], vec![0.5, 0.5])),
        2 => {
            let k = rule.circle;
            let pts = (0..k)
                .map(|i| {
                    let th = two_pi * i as f64 / k as f64 + rule.rotation;
                    vec![r * th.cos(), r * th.sin()]
                })
                .collect();
            Ok((pts, vec![1.0 / k as f64; k]))
        }
        3 => {
            // dμ = (1/2) dz · (1/2π) dφ
            let (z, wz) = gauss_legendre(rule.polar);
            let k = rule.azimuth;
            let mut pts = Vec::with_capacity(z.len() * k);
            let mut w = Vec::with_capacity(z.len() * k);
            for (zi, wi) in z.iter().zip(&wz) {
                let rho = (1.0 - zi * zi).max(0.0).sqrt();
                for j in 0..k {
                    let ph = two_pi * j as f64 / k as f64 + rule.rotation;
                    pts.push(vec![r * rho * ph.cos(), r * rho * ph.sin(), r * zi]);
                    w.push(0.5 * wi / k as f64);
                }
            }
            Ok((pts, w))
        }
        _ => Err(Error::UnsupportedDimension(format!(
            "no quadrature rule for S_{n}; exact rules cover N <= 3"
        ))),
    }
}

fn domain_rule(domain: Domain, rule: &RuleSize) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    domain.validate()?;
    match domain {
        Domain::Sphere(n) => sphere_rule(n, rule),
        Domain::Product(n, m) => {
            if !domain.has_exact_rule(rule) {
                return Err(Error::UnsupportedDimension(format!(
                    "product rule for S_{n} x S_{m} exceeds {MAX_PRODUCT_NODES} nodes"
                )));
            }
            let (pa, wa) = sphere_rule(n, rule)?;
            let (pb, wb) = sphere_rule(m, rule)?;
            let mut pts = Vec::with_capacity(pa.len() * pb.len());
            let mut w = Vec::with_capacity(pa.len() * pb.len());
            for (a, x) in pa.iter().zip(&wa) {
                for (b, y) in pb.iter().zip(&wb) {
                    pts.push(a.iter().chain(b).copied().collect());
                    w.push(x * y);
                }
            }
            Ok((pts, w))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ExactQuadrature,
    PlainMc,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::ExactQuadrature => "exact_quadrature",
            Method::PlainMc => "plain_mc",
        }
    }
}

/// One estimate of `log ∫ e^{H} dμ` for a fixed disorder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogPartition {
    pub value: f64,
    /// Zero for quadrature.
    pub stderr: f64,
    /// Jackknife estimate of `E[value] − log Z` (zero for quadrature).
    pub jackknife_bias: f64,
    pub method: Method,
}

fn check_dim(energy: &impl Energy, domain: Domain) -> Result<()> {
    if energy.dim() != domain.dim() {
        return Err(Error::DimensionMismatch {
            expected: domain.dim(),
            got: energy.dim(),
        });
    }
    Ok(())
}

/// Quadrature value of `log ∫ e^{H} dμ` with the default rule.
pub fn exact_log_partition(energy: &impl Energy, domain: Domain) -> Result<f64> {
    exact_log_partition_with(energy, domain, &RuleSize::default())
}

pub fn exact_log_partition_with(energy: &impl Energy, domain: Domain, rule: &RuleSize) -> Result<f64> {
    check_dim(energy, domain)?;
    let (pts, w) = domain_rule(domain, rule)?;
    let vals: Vec<f64> = pts.iter().map(|x| energy.energy(x)).collect();
    // normalize by Σ w so a constant field gives exactly its constant
    let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let num: Vec<f64> = vals.iter().zip(&w).map(|(v, w)| w * (v - max).exp()).collect();
    Ok(max + (pairwise_sum(&num) / pairwise_sum(&w)).ln())
}

/// Plain Monte Carlo `log((1/n) Σ e^{H(σ_i)})` over uniform `σ_i`.
///
/// The standard error is the delta-method value `sd(w)/(√n · mean(w))` for
/// `w_i = e^{H(σ_i) − max H}`.
pub fn mc_log_partition<R: Rng + ?Sized>(
    energy: &impl Energy,
    domain: Domain,
    n_inner: usize,
    rng: &mut R,
) -> Result<LogPartition> {
    domain.validate()?;
    check_dim(energy, domain)?;
    if n_inner < 100 {
        return Err(invalid("n_inner", "need at least 100 inner samples"));
    }
    let mut buf = vec![0.0; domain.dim()];
    let vals: Vec<f64> = (0..n_inner)
        .map(|_| {
            domain.sample_into(&mut buf, rng);
            energy.energy(&buf)
        })
        .collect();
    Ok(log_mean_exp(&vals))
}

/// Log-mean-exp of `vals` with delta-method stderr and jackknife bias.
pub fn log_mean_exp(vals: &[f64]) -> LogPartition {
    let n = vals.len() as f64;
    let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = vals.iter().map(|v| (v - max).exp()).collect();
    let total = pairwise_sum(&w);
    let value = max + (total / n).ln();
    let est = MeanEstimate::from_samples(&w);
    let stderr = est.stderr / est.mean;
    let loo: Vec<f64> = w.iter().map(|wi| (((total - wi).max(0.0)) / (n - 1.0)).ln()).collect();
    let loo_mean = max + pairwise_sum(&loo) / n;
    LogPartition {
        value,
        stderr,
        jackknife_bias: (n - 1.0) * (loo_mean - value),
        method: Method::PlainMc,
    }
}

/// How the inner integral is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InnerMethod {
    /// Quadrature when a rule exists, Monte Carlo otherwise.
    #[default]
    Auto,
    Exact,
    Mc,
}

pub fn log_partition<R: Rng + ?Sized>(
    energy: &impl Energy,
    domain: Domain,
    inner: InnerMethod,
    n_inner: usize,
    rng: &mut R,
) -> Result<LogPartition> {
    let exact = match inner {
        InnerMethod::Exact => true,
        InnerMethod::Mc => false,
        InnerMethod::Auto => domain.has_exact_rule(&RuleSize::default()),
    };
    if exact {
        Ok(LogPartition {
            value: exact_log_partition(energy, domain)?,
            stderr: 0.0,
            jackknife_bias: 0.0,
            method: Method::ExactQuadrature,
        })
    } else {
        mc_log_partition(energy, domain, n_inner, rng)
    }
}

/// Sampling budgets of a quenched estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budgets {
    pub n_disorder: usize,
    pub n_inner: usize,
    pub inner: InnerMethod,
    pub memory: MemoryBudget,
}

impl Budgets {
    pub fn new(n_disorder: usize, n_inner: usize) -> Self {
        Self {
            n_disorder,
            n_inner,
            inner: InnerMethod::Auto,
            memory: MemoryBudget::default(),
        }
    }

    pub fn with_inner(mut self, inner: InnerMethod) -> Self {
        self.inner = inner;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n_disorder < 8 {
            return Err(invalid("n_disorder", "need at least 8 disorder replicas"));
        }
        Ok(())
    }
}

/// Disorder-averaged free energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreeEnergyEstimate {
    /// Per-site value `E log Z / sites`.
    pub value: f64,
    /// `E log Z = sites · value`.
    pub total: f64,
    /// Standard error of `value` over disorder replicas.
    pub stderr: f64,
    /// Mean jackknife bias of the inner estimates, per site.
    pub jackknife_bias: f64,
    pub sites: usize,
    pub n_disorder: usize,
    pub n_inner: usize,
    pub seed: u64,
    pub method: Method,
}

impl FreeEnergyEstimate {
    pub fn total_stderr(&self) -> f64 {
        self.stderr * self.sites as f64
    }
}

/// Per-replica record of a quenched estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicaRecord {
    pub index: usize,
    pub seed: u64,
    pub log_z: f64,
    pub inner_stderr: f64,
    pub jackknife_bias: f64,
    pub method: Method,
}

/// A quenched estimate with the replica values it averages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuenchedRun {
    pub estimate: FreeEnergyEstimate,
    pub replicas: Vec<ReplicaRecord>,
}

fn aggregate(replicas: Vec<ReplicaRecord>, sites: usize, budgets: &Budgets, seed: u64) -> QuenchedRun {
    let logs: Vec<f64> = replicas.iter().map(|r| r.log_z).collect();
    let biases: Vec<f64> = replicas.iter().map(|r| r.jackknife_bias).collect();
    let est = MeanEstimate::from_samples(&logs);
    let method = if replicas.iter().all(|r| r.method == Method::ExactQuadrature) {
        Method::ExactQuadrature
    } else {
        Method::PlainMc
    };
    let s = sites as f64;
    QuenchedRun {
        estimate: FreeEnergyEstimate {
            value: est.mean / s,
            total: est.mean,
            stderr: est.stderr / s,
            jackknife_bias: pairwise_sum(&biases) / biases.len() as f64 / s,
            sites,
            n_disorder: replicas.len(),
            n_inner: if method == Method::ExactQuadrature {
                0
            } else {
                budgets.n_inner
            },
            seed,
            method,
        },
        replicas,
    }
}

/// Evaluates `f(index, replica_seed)` over all replicas in parallel and
/// returns the records in index order.
fn over_replicas<F>(budgets: &Budgets, seed: u64, label: &str, f: F) -> Result<Vec<ReplicaRecord>>
where
    F: Fn(u64) -> Result<LogPartition> + Sync,
{
    (0..budgets.n_disorder)
        .into_par_iter()
        .map(|d| {
            let rs = derive_seed(seed, label, d as u64);
            let lp = f(rs)?;
            Ok(ReplicaRecord {
                index: d,
                seed: rs,
                log_z: lp.value,
                inner_stderr: lp.stderr,
                jackknife_bias: lp.jackknife_bias,
                method: lp.method,
            })
        })
        .collect()
}

/// Single-sphere problem: `H_N`, optionally perturbed (`F̄_N`).
#[derive(Debug, Clone, PartialEq)]
pub struct SingleSpec {
    pub n: usize,
    pub mixture: Mixture,
    pub c: Option<f64>,
    pub zero_field: bool,
}

impl SingleSpec {
    pub fn new(n: usize, mixture: Mixture, c: Option<f64>) -> Self {
        Self {
            n,
            mixture,
            c,
            zero_field: false,
        }
    }

    pub fn zeroed(mut self) -> Self {
        self.zero_field = true;
        self
    }
}

/// `log Z` of one single-sphere replica. The disorder depends on `seed`
/// only, so estimates with and without the perturbation are paired.
pub fn single_log_partition(spec: &SingleSpec, budgets: &Budgets, seed: u64) -> Result<LogPartition> {
    let dis = SingleSphereDisorder::sample(spec.n, &spec.mixture, spec.c, spec.zero_field, seed, budgets.memory)?;
    let energy = dis.h_bar().compile();
    let mut inner = rng::child(seed, "inner", 0);
    log_partition(
        &energy,
        Domain::Sphere(spec.n),
        budgets.inner,
        budgets.n_inner,
        &mut inner,
    )
}

/// `F_N = (1/N) E log ∫ e^{H_N} dμ_N`, or `F̄_N` (expectation also over
/// `x`) when `spec.c` is set.
pub fn quenched_free_energy(spec: &SingleSpec, budgets: &Budgets, seed: u64) -> Result<QuenchedRun> {
    budgets.validate()?;
    if spec.n == 0 {
        return Err(invalid("N", "dimension must be at least 1"));
    }
    let replicas = over_replicas(budgets, seed, "disorder", |rs| single_log_partition(spec, budgets, rs))?;
    Ok(aggregate(replicas, spec.n, budgets, seed))
}

/// Hamiltonian used on `S_N × S_M`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProductMode {
    /// `H̄_{N+M}(ρ, τ)` restricted to the product.
    RestrictedHbar,
    /// `H̃_{N,M}^{x,y}(ρ, τ)`.
    DecoupledHtilde,
}

/// `log Z` on `S_N × S_M` for the bundle seeded by `bundle_seed`; the
/// inner stream is `child(bundle_seed, inner_label, 0)`.
pub fn product_log_partition(
    spec: &DisorderSpec,
    mode: ProductMode,
    budgets: &Budgets,
    bundle_seed: u64,
    inner_label: &str,
) -> Result<LogPartition> {
    let bundle = FieldBundle::sample(spec, bundle_seed)?;
    let domain = Domain::Product(spec.n, spec.m);
    let mut inner = rng::child(bundle_seed, inner_label, 0);
    match mode {
        ProductMode::RestrictedHbar => {
            let e = bundle.h_bar_total().compile();
            log_partition(&e, domain, budgets.inner, budgets.n_inner, &mut inner)
        }
        ProductMode::DecoupledHtilde => {
            let e = bundle.decoupled();
            log_partition(&e, domain, budgets.inner, budgets.n_inner, &mut inner)
        }
    }
}

/// `(1/(N+M)) E log ∫_{S_N×S_M} e^{H} dμ_N×μ_M` over bundles seeded by
/// `derive_seed(seed, "bundle", d)`.
pub fn product_free_energy(
    spec: &DisorderSpec,
    mode: ProductMode,
    budgets: &Budgets,
    seed: u64,
) -> Result<QuenchedRun> {
    budgets.validate()?;
    let replicas = over_replicas(budgets, seed, "bundle", |bs| {
        product_log_partition(spec, mode, budgets, bs, "inner")
    })?;
    Ok(aggregate(replicas, spec.n + spec.m, budgets, seed))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperadditivityDefect {
    /// `(N+M)F̄_{N+M} − N F̄_N − M F̄_M`.
    pub defect: f64,
    pub stderr: f64,
    pub joint: FreeEnergyEstimate,
    pub first: FreeEnergyEstimate,
    pub second: FreeEnergyEstimate,
}

/// Defect from three single-sphere estimates. Each dimension `k` uses the
/// seed `derive_seed(seed, "size", k)`, so `N = M` reuses one estimate for
/// both terms (with fully correlated error) and swapping `N, M` reproduces
/// the same numbers.
pub fn superadditivity_defect(
    n: usize,
    m: usize,
    mixture: &Mixture,
    c: Option<f64>,
    budgets: &Budgets,
    seed: u64,
) -> Result<SuperadditivityDefect> {
    let est = |k: usize| -> Result<FreeEnergyEstimate> {
        let spec = SingleSpec::new(k, mixture.clone(), c);
        Ok(quenched_free_energy(&spec, budgets, derive_seed(seed, "size", k as u64))?.estimate)
    };
    let joint = est(n + m)?;
    let first = est(n)?;
    let second = if m == n { first } else { est(m)? };
    let defect = joint.total - first.total - second.total;
    let stderr = if m == n {
        combined_stderr(&[joint.total_stderr(), 2.0 * first.total_stderr()])
    } else {
        combined_stderr(&[joint.total_stderr(), first.total_stderr(), second.total_stderr()])
    };
    Ok(SuperadditivityDefect {
        defect,
        stderr,
        joint,
        first,
        second,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleDraw {
    pub seed: u64,
    pub exact: f64,
    pub mc: f64,
    pub stderr: f64,
    pub jackknife_bias: f64,
}

impl OracleDraw {
    pub fn z_score(&self) -> f64 {
        (self.mc - self.exact) / self.stderr
    }
}

/// Plain Monte Carlo against quadrature on the same disorder draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleAgreement {
    pub n: usize,
    pub draws: Vec<OracleDraw>,
    /// Mean of `mc − exact` over draws.
    pub mean_diff: f64,
    /// Inner Monte Carlo error of `mean_diff`.
    pub stderr: f64,
}

impl OracleAgreement {
    pub fn z_score(&self) -> f64 {
        self.mean_diff / self.stderr
    }
}

/// For `n_draws` disorder draws at `N ≤ 3`, compares [`mc_log_partition`]
/// with [`exact_log_partition`] on the same field. Draw `d` uses the replica
/// seed `derive_seed(seed, "disorder", d)`.
pub fn oracle_agreement(
    n: usize,
    mixture: &Mixture,
    c: Option<f64>,
    n_draws: usize,
    n_inner: usize,
    seed: u64,
) -> Result<OracleAgreement> {
    if n_draws == 0 {
        return Err(invalid("n_draws", "need at least one draw"));
    }
    let draws: Vec<OracleDraw> = (0..n_draws)
        .into_par_iter()
        .map(|d| {
            let rs = derive_seed(seed, "disorder", d as u64);
            let dis = SingleSphereDisorder::sample(n, mixture, c, false, rs, MemoryBudget::default())?;
            let e = dis.h_bar().compile();
            let exact = exact_log_partition(&e, Domain::Sphere(n))?;
            let mc = mc_log_partition(&e, Domain::Sphere(n), n_inner, &mut rng::child(rs, "inner", 0))?;
            Ok(OracleDraw {
                seed: rs,
                exact,
                mc: mc.value,
                stderr: mc.stderr,
                jackknife_bias: mc.jackknife_bias,
            })
        })
        .collect::<Result<_>>()?;
    let k = draws.len() as f64;
    let diffs: Vec<f64> = draws.iter().map(|d| d.mc - d.exact).collect();
    let errs: Vec<f64> = draws.iter().map(|d| d.stderr).collect();
    Ok(OracleAgreement {
        n,
        mean_diff: pairwise_sum(&diffs) / k,
        stderr: combined_stderr(&errs) / k,
        draws,
    })
}

/// Paired comparison of `F̄_N` and `F_N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationGap {
    pub n: usize,
    /// `F̄_N − F_N` (per site).
    pub gap: f64,
    pub stderr: f64,
    /// `E_x η_N^x(1) / N`.
    pub bound: f64,
    pub n_disorder: usize,
}

impl PerturbationGap {
    pub fn abs_gap(&self) -> f64 {
        self.gap.abs()
    }
}

/// `F̄_N − F_N` from per-replica differences: both runs of replica `d` share
/// the couplings of `H_N` and the inner sample stream, only the
/// perturbation differs.
pub fn perturbation_gap(n: usize, mixture: &Mixture, c: f64, budgets: &Budgets, seed: u64) -> Result<PerturbationGap> {
    budgets.validate()?;
    let on = SingleSpec::new(n, mixture.clone(), Some(c));
    let off = SingleSpec::new(n, mixture.clone(), None);
    let diffs: Vec<f64> = (0..budgets.n_disorder)
        .into_par_iter()
        .map(|d| {
            let rs = derive_seed(seed, "disorder", d as u64);
            Ok(single_log_partition(&on, budgets, rs)?.value - single_log_partition(&off, budgets, rs)?.value)
        })
        .collect::<Result<_>>()?;
    let est = MeanEstimate::from_samples(&diffs);
    let s = n as f64;
    Ok(PerturbationGap {
        n,
        gap: est.mean / s,
        stderr: est.stderr / s,
        bound: expected_eta_at_one(n, c, mixture.p_max()) / s,
        n_disorder: budgets.n_disorder,
    })
}
