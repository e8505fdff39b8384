//! Interpolation between the coupled system on `S_N × S_M` and two
//! independent subsystems:
//!
//! `H_t(ρ, τ) = √t H_{N+M}(ρ, τ) + √(1−t) (H_N(ρ) + H_M(τ)) + s_N g_N^x(ρ) + s_M g_M^y(τ)`,
//!
//! with Gibbs measure `G_t ∝ e^{H_t} d(μ_N × μ_M)` and `φ(t) = E log Z_t`.
//! Gaussian integration by parts gives `φ'(t) = −½ E⟨U⟩_t` with
//! `U = (N+M)ξ(R) − Nξ(R¹) − Mξ(R²)` evaluated on two replicas.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::{CompiledField, DisorderSpec, Energy, FieldBundle, Hamiltonian};
use crate::free_energy::{log_partition, product_log_partition, Budgets, Domain, ProductMode};
use crate::mixture::Mixture;
use crate::rng::{self, derive_seed};
use crate::sphere::{fill_uniform_sphere, overlaps, overlaps_concat, OverlapTriple, ProductConfig};
use crate::stats::MeanEstimate;

fn check_t(t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::DomainError {
            what: "t",
            value: t,
            domain: "[0, 1]",
        });
    }
    Ok(())
}

/// `H_t(ρ, τ)` evaluated term by term from the bundle's Hamiltonians.
///
/// The summation order makes both endpoints bit-identical to their
/// reference forms: `t = 1` gives `H_{N+M} + s_N g_N^x + s_M g_M^y` (the
/// bundle's decoupled Hamiltonian) and `t = 0` gives
/// `(H_N + s_N g_N^x)(ρ) + (H_M + s_M g_M^y)(τ)`.
pub fn h_t(bundle: &FieldBundle, t: f64, rho: &[f64], tau: &[f64]) -> Result<f64> {
    check_t(t)?;
    for (v, d) in [(rho, bundle.n()), (tau, bundle.m())] {
        if v.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: v.len(),
            });
        }
    }
    let joined: Vec<f64> = rho.iter().chain(tau).copied().collect();
    let a = t.sqrt() * bundle.h_total().value(&joined);
    let b = (1.0 - t).sqrt();
    let left = b * bundle.h_n().value(rho) + bundle.g_n().value(rho);
    let right = b * bundle.h_m().value(tau) + bundle.g_m().value(tau);
    Ok(a + left + right)
}

/// [`h_t`] as a compiled [`Energy`] on concatenated `(ρ, τ)`.
#[derive(Debug, Clone)]
pub struct InterpolatingEnergy {
    n: usize,
    t: f64,
    main: CompiledField,
    left: CompiledField,
    right: CompiledField,
}

impl InterpolatingEnergy {
    pub fn new(bundle: &FieldBundle, t: f64) -> Result<Self> {
        check_t(t)?;
        let b = (1.0 - t).sqrt();
        Ok(Self {
            n: bundle.n(),
            t,
            main: bundle.h_total().scaled(t.sqrt()).compile(),
            left: bundle.h_n().scaled(b).plus(&bundle.g_n())?.compile(),
            right: bundle.h_m().scaled(b).plus(&bundle.g_m())?.compile(),
        })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.main.n() - self.n
    }
}

impl Energy for InterpolatingEnergy {
    fn dim(&self) -> usize {
        self.main.n()
    }
    fn energy(&self, x: &[f64]) -> f64 {
        let (rho, tau) = x.split_at(self.n);
        self.main.value(x) + self.left.value(rho) + self.right.value(tau)
    }
}

/// Metropolis settings. `chain_len` counts every step including burn-in;
/// one sample is kept every `thin` steps after burn-in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McmcParams {
    /// Half-width `α` of the rotation angle `θ ~ U(−α, α)`.
    pub proposal_angle: f64,
    pub burn_in: usize,
    pub thin: usize,
    pub chain_len: usize,
    /// Adapt `α` during burn-in towards 30–50% acceptance.
    pub tune: bool,
}

impl Default for McmcParams {
    fn default() -> Self {
        Self {
            proposal_angle: 0.5,
            burn_in: 2_000,
            thin: 5,
            chain_len: 12_000,
            tune: true,
        }
    }
}

impl McmcParams {
    pub fn validate(&self) -> Result<()> {
        if self.thin == 0 {
            return Err(invalid("thin", "must be positive"));
        }
        if self.chain_len < self.burn_in + 10 * self.thin {
            return Err(invalid("chain_len", "need chain_len >= burn_in + 10 * thin"));
        }
        if !(self.proposal_angle > 0.0 && self.proposal_angle <= std::f64::consts::PI) {
            return Err(Error::DomainError {
                what: "proposal_angle",
                value: self.proposal_angle,
                domain: "(0, pi]",
            });
        }
        Ok(())
    }

    pub fn n_samples(&self) -> usize {
        (self.chain_len - self.burn_in) / self.thin
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainDiagnostics {
    /// Post-burn-in acceptance rate; for importance resampling the
    /// effective-sample-size fraction of the proposals.
    pub acceptance_rate: f64,
    pub chain_len: usize,
    pub burn_in: usize,
    pub proposal_angle: f64,
    /// Acceptance below 1% or above 99%.
    pub non_ergodic: bool,
}

/// Samples of `G_t` as concatenated `(ρ, τ)` vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GibbsSampleSet {
    pub n: usize,
    pub m: usize,
    pub samples: Vec<Vec<f64>>,
    pub diagnostics: ChainDiagnostics,
}

impl GibbsSampleSet {
    pub fn configs(&self) -> Result<Vec<ProductConfig>> {
        self.samples
            .iter()
            .map(|x| ProductConfig::from_concat(x, self.n))
            .collect()
    }

    /// Mean of `f` over replica pairs `(self[k], other[k])`.
    pub fn pair_mean(&self, other: &GibbsSampleSet, f: impl Fn(&[f64], &[f64]) -> f64) -> f64 {
        let k = self.samples.len().min(other.samples.len());
        let vals: Vec<f64> = (0..k).map(|i| f(&self.samples[i], &other.samples[i])).collect();
        crate::stats::pairwise_sum(&vals) / k as f64
    }
}

/// Rotates `x ∈ S_d(r)` by `θ ~ U(−α, α)` in the plane of `x` and a random
/// tangent direction; in dimension one flips the sign with probability ½.
fn propose_block<R: Rng + ?Sized>(x: &mut [f64], alpha: f64, scratch: &mut [f64], rng: &mut R) {
    let d = x.len();
    if d == 1 {
        if rng.random::<bool>() {
            x[0] = -x[0];
        }
        return;
    }
    let r2: f64 = x.iter().map(|v| v * v).sum();
    let r = r2.sqrt();
    let v = &mut scratch[..d];
    loop {
        for vi in v.iter_mut() {
            *vi = StandardNormal.sample(rng);
        }
        let proj = v.iter().zip(x.iter()).map(|(a, b)| a * b).sum::<f64>() / r2;
        v.iter_mut().zip(x.iter()).for_each(|(a, b)| *a -= proj * b);
        let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if nv > 1e-12 {
            v.iter_mut().for_each(|a| *a /= nv);
            break;
        }
    }
    let theta = rng.random_range(-alpha..alpha);
    let (s, c) = theta.sin_cos();
    x.iter_mut().zip(v.iter()).for_each(|(a, b)| *a = c * *a + s * r * b);
    let nr = x.iter().map(|a| a * a).sum::<f64>().sqrt();
    x.iter_mut().for_each(|a| *a *= r / nr);
}

/// Metropolis chain on `S_N × S_M` targeting `e^{E} d(μ_N × μ_M)`.
pub fn gibbs_sample<E: Energy + ?Sized, R: Rng + ?Sized>(
    energy: &E,
    n: usize,
    m: usize,
    params: &McmcParams,
    rng: &mut R,
) -> Result<GibbsSampleSet> {
    params.validate()?;
    if energy.dim() != n + m {
        return Err(Error::DimensionMismatch {
            expected: n + m,
            got: energy.dim(),
        });
    }
    let domain = Domain::Product(n, m);
    let mut x = vec![0.0; n + m];
    domain.sample_into(&mut x, rng);
    let mut e = energy.energy(&x);
    let mut prop = x.clone();
    let mut scratch = vec![0.0; n.max(m)];
    let mut alpha = params.proposal_angle;
    let mut window_acc = 0usize;
    let mut accepted = 0usize;
    let mut samples = Vec::with_capacity(params.n_samples());
    const WINDOW: usize = 100;
    for step in 1..=params.chain_len {
        prop.copy_from_slice(&x);
        {
            let (a, b) = prop.split_at_mut(n);
            propose_block(a, alpha, &mut scratch, rng);
            propose_block(b, alpha, &mut scratch, rng);
        }
        let ep = energy.energy(&prop);
        let log_u: f64 = rng.random::<f64>().ln();
        let accept = log_u < ep - e;
        if accept {
            std::mem::swap(&mut x, &mut prop);
            e = ep;
        }
        if step <= params.burn_in {
            window_acc += accept as usize;
            if params.tune && step % WINDOW == 0 {
                let rate = window_acc as f64 / WINDOW as f64;
                if rate > 0.5 {
                    alpha = (alpha * 1.25).min(std::f64::consts::PI);
                } else if rate < 0.3 {
                    alpha *= 0.8;
                }
                window_acc = 0;
            }
        } else {
            accepted += accept as usize;
            if (step - params.burn_in).is_multiple_of(params.thin) {
                samples.push(x.clone());
            }
        }
    }
    let rate = accepted as f64 / (params.chain_len - params.burn_in) as f64;
    Ok(GibbsSampleSet {
        n,
        m,
        samples,
        diagnostics: ChainDiagnostics {
            acceptance_rate: rate,
            chain_len: params.chain_len,
            burn_in: params.burn_in,
            proposal_angle: alpha,
            non_ergodic: !(0.01..=0.99).contains(&rate),
        },
    })
}

/// Samples `G` by resampling `n_proposals` uniform points with weights
/// `e^{E}`; exact in the limit of many proposals. Restricted to
/// `N + M ≤ 6`, where uniform proposals cover the sphere well.
pub fn importance_resample<E: Energy + ?Sized, R: Rng + ?Sized>(
    energy: &E,
    n: usize,
    m: usize,
    n_proposals: usize,
    n_samples: usize,
    rng: &mut R,
) -> Result<GibbsSampleSet> {
    if n + m > 6 {
        return Err(Error::UnsupportedDimension(format!(
            "importance resampling is limited to N + M <= 6, got {}",
            n + m
        )));
    }
    if energy.dim() != n + m {
        return Err(Error::DimensionMismatch {
            expected: n + m,
            got: energy.dim(),
        });
    }
    if n_proposals == 0 || n_samples == 0 {
        return Err(invalid("n_proposals", "need at least one proposal and one sample"));
    }
    let domain = Domain::Product(n, m);
    let mut pts = Vec::with_capacity(n_proposals);
    let mut logw = Vec::with_capacity(n_proposals);
    for _ in 0..n_proposals {
        let mut x = vec![0.0; n + m];
        domain.sample_into(&mut x, rng);
        logw.push(energy.energy(&x));
        pts.push(x);
    }
    let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logw.iter().map(|l| (l - max).exp()).collect();
    let dist = rand::distr::weighted::WeightedIndex::new(&w).map_err(|e| invalid("weights", e.to_string()))?;
    let samples = (0..n_samples).map(|_| pts[dist.sample(rng)].clone()).collect();
    let sw: f64 = w.iter().sum();
    let sw2: f64 = w.iter().map(|v| v * v).sum();
    let ess = sw * sw / sw2 / n_proposals as f64;
    Ok(GibbsSampleSet {
        n,
        m,
        samples,
        diagnostics: ChainDiagnostics {
            acceptance_rate: ess,
            chain_len: n_proposals,
            burn_in: 0,
            proposal_angle: 0.0,
            non_ergodic: false,
        },
    })
}

/// Exact Gibbs measure on `S_1 × S_1 = {±1}²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourPointGibbs {
    pub points: [[f64; 2]; 4],
    pub probs: [f64; 4],
    /// `log Z = log (¼ Σ e^{E})`.
    pub log_z: f64,
}

impl FourPointGibbs {
    pub fn new<E: Energy + ?Sized>(energy: &E) -> Result<Self> {
        if energy.dim() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                got: energy.dim(),
            });
        }
        let points = [[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]];
        let e: Vec<f64> = points.iter().map(|p| energy.energy(p)).collect();
        let max = e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = e.iter().map(|v| (v - max).exp()).collect();
        let total: f64 = w.iter().sum();
        let mut probs = [0.0; 4];
        for (p, wi) in probs.iter_mut().zip(&w) {
            *p = wi / total;
        }
        Ok(Self {
            points,
            probs,
            log_z: max + (total / 4.0).ln(),
        })
    }

    /// `⟨f(x¹, x²)⟩` under the product of two copies.
    pub fn pair_expectation(&self, f: impl Fn(&[f64], &[f64]) -> f64) -> f64 {
        let mut acc = 0.0;
        for (a, pa) in self.points.iter().zip(&self.probs) {
            for (b, pb) in self.points.iter().zip(&self.probs) {
                acc += pa * pb * f(a, b);
            }
        }
        acc
    }
}

/// `U = (N+M)ξ(R) − Nξ(R¹) − Mξ(R²)`; overlaps are clamped to `[−1, 1]`.
pub fn u_from_overlaps(o: &OverlapTriple, n: usize, m: usize, mixture: &Mixture) -> f64 {
    let c = |v: f64| v.clamp(-1.0, 1.0);
    // grouped so that equal overlaps cancel exactly
    let xi_r = mixture.xi(c(o.r));
    n as f64 * (xi_r - mixture.xi(c(o.r1))) + m as f64 * (xi_r - mixture.xi(c(o.r2)))
}

pub fn u_functional(pair1: &ProductConfig, pair2: &ProductConfig, mixture: &Mixture) -> Result<f64> {
    // a configuration overlaps itself at exactly 1
    let o = if pair1 == pair2 {
        OverlapTriple::from_parts(1.0, 1.0, 1, 1)
    } else {
        overlaps(pair1, pair2)?
    };
    Ok(u_from_overlaps(&o, pair1.rho.dim(), pair1.tau.dim(), mixture))
}

/// `|U| ≤ 2M(ξ(1) + ξ'(1))` for all overlaps in `[−1, 1]`.
pub fn u_abs_bound(m: usize, mixture: &Mixture) -> f64 {
    2.0 * m as f64 * (mixture.xi(1.0) + mixture.xi_prime(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UPlus {
    /// `U⁺` built from the clipped overlaps `R¹ ∨ 0`, `R² ∨ 0`.
    pub u_plus: f64,
    /// `2εM(ξ'(1) + ξ''(1))`, bounding `U − U⁺` when `R¹ ∧ R² ≥ −ε`.
    pub gap_bound: f64,
}

pub fn u_plus_from_overlaps(r1: f64, r2: f64, n: usize, m: usize, mixture: &Mixture, eps: f64) -> UPlus {
    let p1 = r1.clamp(0.0, 1.0);
    let p2 = r2.clamp(0.0, 1.0);
    let o = OverlapTriple::from_parts(p1, p2, n, m);
    UPlus {
        u_plus: u_from_overlaps(&o, n, m, mixture),
        gap_bound: 2.0 * eps * m as f64 * (mixture.xi_prime(1.0) + mixture.xi_second(1.0)),
    }
}

pub fn u_plus_functional(pair1: &ProductConfig, pair2: &ProductConfig, mixture: &Mixture, eps: f64) -> Result<UPlus> {
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::DomainError {
            what: "eps",
            value: eps,
            domain: "[0, 1)",
        });
    }
    let o = overlaps(pair1, pair2)?;
    Ok(u_plus_from_overlaps(
        o.r1,
        o.r2,
        pair1.rho.dim(),
        pair1.tau.dim(),
        mixture,
        eps,
    ))
}

/// Rounding allowance when testing `U⁺ ≤ 0`, relative to `(N+M)ξ(1)`.
pub const U_PLUS_RTOL: f64 = 1e-12;

/// Sign audit of `U⁺` over the 0.01-grid of `(R¹, R²) ∈ [0, 1]²` and over
/// overlaps of random uniform pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UPlusAudit {
    pub grid_points: usize,
    pub grid_violations: usize,
    pub random_pairs: usize,
    pub random_violations: usize,
    /// Largest `U⁺` seen.
    pub max_u_plus: f64,
}

impl UPlusAudit {
    pub fn violations(&self) -> usize {
        self.grid_violations + self.random_violations
    }
}

pub fn u_plus_audit(n: usize, m: usize, mixture: &Mixture, n_random: usize, seed: u64) -> Result<UPlusAudit> {
    if n == 0 || m == 0 {
        return Err(invalid("N, M", "both dimensions must be at least 1"));
    }
    let tol = U_PLUS_RTOL * (n + m) as f64 * mixture.xi(1.0);
    let mut grid_violations = 0;
    let mut max_u_plus = f64::NEG_INFINITY;
    for i in 0..=100 {
        for j in 0..=100 {
            let u = u_plus_from_overlaps(i as f64 / 100.0, j as f64 / 100.0, n, m, mixture, 0.0).u_plus;
            grid_violations += (u > tol) as usize;
            max_u_plus = max_u_plus.max(u);
        }
    }
    const CHUNK: usize = 4096;
    let chunks: Vec<(usize, f64)> = (0..n_random.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut s = rng::child(seed, "u_plus", c as u64);
            let len = CHUNK.min(n_random - c * CHUNK);
            let mut bad = 0;
            let mut top = f64::NEG_INFINITY;
            for _ in 0..len {
                let a = uniform_concat(n, m, &mut s);
                let b = uniform_concat(n, m, &mut s);
                let o = overlaps_concat(&a, &b, n);
                let u = u_plus_from_overlaps(o.r1, o.r2, n, m, mixture, 0.0).u_plus;
                bad += (u > tol) as usize;
                top = top.max(u);
            }
            (bad, top)
        })
        .collect();
    Ok(UPlusAudit {
        grid_points: 101 * 101,
        grid_violations,
        random_pairs: n_random,
        random_violations: chunks.iter().map(|c| c.0).sum(),
        max_u_plus: chunks.iter().map(|c| c.1).fold(max_u_plus, f64::max),
    })
}

/// One point of the `φ(t)` curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiPoint {
    pub t: f64,
    pub phi: f64,
    pub stderr: f64,
    pub n_disorder: usize,
}

fn bundle_seed(seed: u64, d: usize) -> u64 {
    derive_seed(seed, "bundle", d as u64)
}

/// `φ(t) = E log Z_t` on a grid. Bundle `d` is seeded by
/// `derive_seed(seed, "bundle", d)` at every `t` (and in
/// [`crate::free_energy::product_free_energy`]); the inner stream for grid
/// point `k` is `child(bundle_seed, "phi", k)`.
pub fn phi_curve(spec: &DisorderSpec, ts: &[f64], budgets: &Budgets, seed: u64) -> Result<Vec<PhiPoint>> {
    for &t in ts {
        check_t(t)?;
    }
    ts.iter()
        .enumerate()
        .map(|(k, &t)| {
            let vals: Vec<f64> = (0..budgets.n_disorder)
                .into_par_iter()
                .map(|d| phi_replica(spec, t, k, budgets, bundle_seed(seed, d)))
                .collect::<Result<_>>()?;
            let est = MeanEstimate::from_samples(&vals);
            Ok(PhiPoint {
                t,
                phi: est.mean,
                stderr: est.stderr,
                n_disorder: vals.len(),
            })
        })
        .collect()
}

fn phi_replica(spec: &DisorderSpec, t: f64, k: usize, budgets: &Budgets, bs: u64) -> Result<f64> {
    let bundle = FieldBundle::sample(spec, bs)?;
    let e = InterpolatingEnergy::new(&bundle, t)?;
    let mut inner = rng::child(bs, "phi", k as u64);
    Ok(log_partition(
        &e,
        Domain::Product(spec.n, spec.m),
        budgets.inner,
        budgets.n_inner,
        &mut inner,
    )?
    .value)
}

/// Paired comparison of two estimators over the same bundles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedComparison {
    pub left: MeanEstimate,
    pub right: MeanEstimate,
    /// Mean and standard error of the per-bundle differences.
    pub difference: MeanEstimate,
}

impl PairedComparison {
    fn from_pairs(pairs: &[(f64, f64)]) -> Self {
        let l: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let r: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let d: Vec<f64> = pairs.iter().map(|p| p.0 - p.1).collect();
        Self {
            left: MeanEstimate::from_samples(&l),
            right: MeanEstimate::from_samples(&r),
            difference: MeanEstimate::from_samples(&d),
        }
    }

    /// `|mean difference|` in units of its standard error.
    pub fn z_score(&self) -> f64 {
        if self.difference.stderr == 0.0 {
            if self.difference.mean == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            self.difference.mean.abs() / self.difference.stderr
        }
    }

    pub fn within(&self, sigmas: f64) -> bool {
        self.z_score() <= sigmas
    }

    /// `|left − right|` in units of `√(se_left² + se_right²)`, treating the
    /// two disorder averages as separate estimates.
    pub fn combined_z(&self) -> f64 {
        let se = self.left.stderr.hypot(self.right.stderr);
        let d = (self.left.mean - self.right.mean).abs();
        if se == 0.0 {
            if d == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            d / se
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EndpointCheck {
    /// `φ(0)` against `log Z_N(H̄_N) + log Z_M(H̄_M)` of the same bundle.
    pub at_zero: PairedComparison,
    /// `φ(1)` against the decoupled product free energy of the same bundle.
    pub at_one: PairedComparison,
}

/// Endpoint identities `φ(0) = N F̄_N + M F̄_M` and `φ(1) = E log ∫ e^{H̃}`.
/// Each side is estimated with its own inner stream.
pub fn endpoint_check(spec: &DisorderSpec, budgets: &Budgets, seed: u64) -> Result<EndpointCheck> {
    let rows: Vec<[(f64, f64); 2]> = (0..budgets.n_disorder)
        .into_par_iter()
        .map(|d| {
            let bs = bundle_seed(seed, d);
            let bundle = FieldBundle::sample(spec, bs)?;
            let phi0 = phi_replica(spec, 0.0, 0, budgets, bs)?;
            let phi1 = phi_replica(spec, 1.0, 1, budgets, bs)?;
            let single = |h: Hamiltonian, dim: usize, label: &str| -> Result<f64> {
                let e = h.compile();
                let mut s = rng::child(bs, label, 0);
                Ok(log_partition(&e, Domain::Sphere(dim), budgets.inner, budgets.n_inner, &mut s)?.value)
            };
            let sum = single(bundle.h_bar_n(), spec.n, "single_n")? + single(bundle.h_bar_m(), spec.m, "single_m")?;
            let dec = product_log_partition(spec, ProductMode::DecoupledHtilde, budgets, bs, "inner")?.value;
            Ok([(phi0, sum), (phi1, dec)])
        })
        .collect::<Result<_>>()?;
    let zero: Vec<(f64, f64)> = rows.iter().map(|r| r[0]).collect();
    let one: Vec<(f64, f64)> = rows.iter().map(|r| r[1]).collect();
    Ok(EndpointCheck {
        at_zero: PairedComparison::from_pairs(&zero),
        at_one: PairedComparison::from_pairs(&one),
    })
}

/// Per-bundle replica statistics at one `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicaStats {
    /// `⟨U⟩_t`.
    pub mean_u: f64,
    /// `⟨1{R¹ ≤ −ε}⟩_t`.
    pub mass_neg: f64,
    /// `⟨1{R¹ ≥ ε}⟩_t`.
    pub mass_pos: f64,
    pub acceptance: f64,
    pub non_ergodic: bool,
}

fn replica_stats(bundle: &FieldBundle, t: f64, eps: f64, mcmc: &McmcParams, bs: u64) -> Result<ReplicaStats> {
    let (n, m) = (bundle.n(), bundle.m());
    let e = InterpolatingEnergy::new(bundle, t)?;
    let mix = bundle.mixture();
    if n == 1 && m == 1 {
        let g = FourPointGibbs::new(&e)?;
        let ov = |a: &[f64], b: &[f64]| overlaps_concat(a, b, 1);
        return Ok(ReplicaStats {
            mean_u: g.pair_expectation(|a, b| u_from_overlaps(&ov(a, b), 1, 1, mix)),
            mass_neg: g.pair_expectation(|a, b| (ov(a, b).r1 <= -eps) as u8 as f64),
            mass_pos: g.pair_expectation(|a, b| (ov(a, b).r1 >= eps) as u8 as f64),
            acceptance: 1.0,
            non_ergodic: false,
        });
    }
    let c1 = gibbs_sample(&e, n, m, mcmc, &mut rng::child(bs, "chain", 0))?;
    let c2 = gibbs_sample(&e, n, m, mcmc, &mut rng::child(bs, "chain", 1))?;
    let ov = |a: &[f64], b: &[f64]| overlaps_concat(a, b, n);
    Ok(ReplicaStats {
        mean_u: c1.pair_mean(&c2, |a, b| u_from_overlaps(&ov(a, b), n, m, mix)),
        mass_neg: c1.pair_mean(&c2, |a, b| (ov(a, b).r1 <= -eps) as u8 as f64),
        mass_pos: c1.pair_mean(&c2, |a, b| (ov(a, b).r1 >= eps) as u8 as f64),
        acceptance: 0.5 * (c1.diagnostics.acceptance_rate + c2.diagnostics.acceptance_rate),
        non_ergodic: c1.diagnostics.non_ergodic || c2.diagnostics.non_ergodic,
    })
}

/// Replica statistics at `t` for bundles `0..n_disorder` of `seed`. Two
/// independent chains per bundle supply the replica pairs; `N = M = 1`
/// uses the exact four-point Gibbs measure instead.
pub fn replica_scan(
    spec: &DisorderSpec,
    t: f64,
    eps: f64,
    mcmc: &McmcParams,
    n_disorder: usize,
    seed: u64,
) -> Result<Vec<ReplicaStats>> {
    check_t(t)?;
    (0..n_disorder)
        .into_par_iter()
        .map(|d| {
            let bs = bundle_seed(seed, d);
            let bundle = FieldBundle::sample(spec, bs)?;
            replica_stats(&bundle, t, eps, mcmc, bs)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiPrime {
    /// `−½ E⟨U⟩_t`.
    pub value: f64,
    pub stderr: f64,
    pub mean_u: f64,
    pub n_disorder: usize,
    /// Bundles whose chains were flagged non-ergodic.
    pub non_ergodic: usize,
}

/// `φ'(t) = −½ E⟨U⟩_t`.
pub fn phi_prime_ibp(spec: &DisorderSpec, t: f64, mcmc: &McmcParams, n_disorder: usize, seed: u64) -> Result<PhiPrime> {
    let stats = replica_scan(spec, t, 0.0, mcmc, n_disorder, seed)?;
    let us: Vec<f64> = stats.iter().map(|s| s.mean_u).collect();
    let est = MeanEstimate::from_samples(&us);
    Ok(PhiPrime {
        value: -0.5 * est.mean,
        stderr: 0.5 * est.stderr,
        mean_u: est.mean,
        n_disorder,
        non_ergodic: stats.iter().filter(|s| s.non_ergodic).count(),
    })
}

/// `−½⟨U⟩_t` against the central difference of `log Z_t` with step `h`,
/// per bundle, for `N = M = 1` where both are exact.
pub fn derivative_fd_check(
    spec: &DisorderSpec,
    t: f64,
    h: f64,
    n_disorder: usize,
    seed: u64,
) -> Result<PairedComparison> {
    if spec.n != 1 || spec.m != 1 {
        return Err(Error::UnsupportedDimension(
            "the exact derivative check needs N = M = 1".into(),
        ));
    }
    if !(h > 0.0 && t - h >= 0.0 && t + h <= 1.0) {
        return Err(invalid("h", "t ± h must stay inside [0, 1]"));
    }
    let pairs: Vec<(f64, f64)> = (0..n_disorder)
        .into_par_iter()
        .map(|d| {
            let bundle = FieldBundle::sample(spec, bundle_seed(seed, d))?;
            let mix = bundle.mixture();
            let lz = |s: f64| -> Result<f64> { Ok(FourPointGibbs::new(&InterpolatingEnergy::new(&bundle, s)?)?.log_z) };
            let fd = (lz(t + h)? - lz(t - h)?) / (2.0 * h);
            let g = FourPointGibbs::new(&InterpolatingEnergy::new(&bundle, t)?)?;
            let ibp = -0.5 * g.pair_expectation(|a, b| u_from_overlaps(&overlaps_concat(a, b, 1), 1, 1, mix));
            Ok((ibp, fd))
        })
        .collect::<Result<_>>()?;
    Ok(PairedComparison::from_pairs(&pairs))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NegativityMass {
    /// `E G_t^{⊗2}(R¹ ≤ −ε)`.
    pub mass: f64,
    pub stderr: f64,
    /// `E G_t^{⊗2}(R¹ ≥ ε)`, the mirrored event.
    pub mirrored: f64,
    pub mirrored_stderr: f64,
    pub n_disorder: usize,
}

pub fn overlap_negativity_mass(
    spec: &DisorderSpec,
    t: f64,
    eps: f64,
    mcmc: &McmcParams,
    n_disorder: usize,
    seed: u64,
) -> Result<NegativityMass> {
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::DomainError {
            what: "eps",
            value: eps,
            domain: "[0, 1)",
        });
    }
    let stats = replica_scan(spec, t, eps, mcmc, n_disorder, seed)?;
    let neg = MeanEstimate::from_samples(&stats.iter().map(|s| s.mass_neg).collect::<Vec<_>>());
    let pos = MeanEstimate::from_samples(&stats.iter().map(|s| s.mass_pos).collect::<Vec<_>>());
    Ok(NegativityMass {
        mass: neg.mean,
        stderr: neg.stderr,
        mirrored: pos.mean,
        mirrored_stderr: pos.stderr,
        n_disorder,
    })
}

/// Uniform product sample, exposed for checks on the sampler.
pub fn uniform_concat<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Vec<f64> {
    let mut x = vec![0.0; n + m];
    let (a, b) = x.split_at_mut(n);
    fill_uniform_sphere(a, (n as f64).sqrt(), rng);
    fill_uniform_sphere(b, (m as f64).sqrt(), rng);
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixture::expected_eta_at_one;
    use crate::sphere::{uniform_product, SphericalConfig};
    use crate::stats::ks_statistic;
    use approx::assert_relative_eq;

    fn spec(n: usize, m: usize, mix: Mixture, c: Option<f64>) -> DisorderSpec {
        DisorderSpec::new(n, m, mix, c)
    }

    #[test]
    fn endpoints_are_exact() {
        let b = FieldBundle::sample(&spec(3, 2, Mixture::new(&[0.5, 1.0, 0.7]).unwrap(), Some(0.375)), 4).unwrap();
        let mut s = rng::stream(1);
        for _ in 0..10 {
            let p = uniform_product(3, 2, &mut s).unwrap();
            let (rho, tau) = (p.rho.coords(), p.tau.coords());
            assert_eq!(h_t(&b, 1.0, rho, tau).unwrap(), b.decoupled_evaluate(rho, tau).unwrap());
            let zero = b.h_n().value(rho) + b.g_n().value(rho) + (b.h_m().value(tau) + b.g_m().value(tau));
            assert_eq!(h_t(&b, 0.0, rho, tau).unwrap(), zero);
            let bar = b.h_bar_n().value(rho) + b.h_bar_m().value(tau);
            assert_relative_eq!(h_t(&b, 0.0, rho, tau).unwrap(), bar, epsilon = 1e-12);
            let e = InterpolatingEnergy::new(&b, 0.37).unwrap();
            let x = p.concat();
            assert_relative_eq!(e.energy(&x), h_t(&b, 0.37, rho, tau).unwrap(), epsilon = 1e-12);
        }
        assert!(h_t(&b, 1.5, &[1.0; 3], &[1.0; 2]).is_err());
        assert!(h_t(&b, 0.5, &[1.0; 2], &[1.0; 2]).is_err());
    }

    #[test]
    fn variance_is_independent_of_t() {
        let (n, m) = (2, 1);
        let mix = Mixture::new(&[0.6, 0.8]).unwrap();
        let sp = spec(n, m, mix.clone(), Some(0.375));
        let rho = [1.0, -1.0];
        let tau = [1.0];
        let k = 10_000;
        let theory = (n + m) as f64 * mix.xi(1.0)
            + expected_eta_at_one(n, 0.375, mix.p_max())
            + expected_eta_at_one(m, 0.375, mix.p_max());
        for t in [0.0, 0.3, 1.0] {
            let sq: Vec<f64> = (0..k)
                .map(|d| {
                    let b = FieldBundle::sample(&sp, derive_seed(17, "var", d)).unwrap();
                    h_t(&b, t, &rho, &tau).unwrap().powi(2)
                })
                .collect();
            let est = MeanEstimate::from_samples(&sq);
            assert!(
                (est.mean - theory).abs() < 5.0 * est.stderr,
                "t={t}: {est:?} vs {theory}"
            );
        }
    }

    #[test]
    fn zero_field_chain_is_uniform() {
        let sp = spec(3, 2, Mixture::pure(2), None).zeroed();
        let b = FieldBundle::sample(&sp, 1).unwrap();
        let e = InterpolatingEnergy::new(&b, 0.5).unwrap();
        let params = McmcParams {
            chain_len: 22_000,
            thin: 10,
            ..McmcParams::default()
        };
        let c1 = gibbs_sample(&e, 3, 2, &params, &mut rng::stream(2)).unwrap();
        let c2 = gibbs_sample(&e, 3, 2, &params, &mut rng::stream(3)).unwrap();
        // ρ_1/√3 is uniform on [−1, 1] for uniform ρ ∈ S_3
        let xs: Vec<f64> = c1.samples.iter().map(|x| x[0] / 3f64.sqrt()).collect();
        let ks = ks_statistic(&xs, |v| ((v + 1.0) / 2.0).clamp(0.0, 1.0));
        assert!(ks < crate::stats::ks_critical_value(xs.len(), 0.01), "{ks}");
        // R¹ has mean 0 and variance 1/N
        let r1: Vec<f64> = c1
            .samples
            .iter()
            .zip(&c2.samples)
            .map(|(a, b)| overlaps_concat(a, b, 3).r1)
            .collect();
        let m1 = MeanEstimate::from_samples(&r1);
        assert!(m1.mean.abs() < 3.0 * m1.stderr, "{m1:?}");
        let sq: Vec<f64> = r1.iter().map(|r| r * r).collect();
        let m2 = MeanEstimate::from_samples(&sq);
        assert!((m2.mean - 1.0 / 3.0).abs() < 3.0 * m2.stderr, "{m2:?}");
        assert!(c1.configs().unwrap().len() == params.n_samples());
    }

    #[test]
    fn chain_matches_four_point_oracle() {
        let sp = spec(1, 1, Mixture::new(&[0.8, 1.2]).unwrap(), Some(0.375));
        let b = FieldBundle::sample(&sp, 5).unwrap();
        let e = InterpolatingEnergy::new(&b, 0.6).unwrap();
        let exact = FourPointGibbs::new(&e).unwrap();
        let params = McmcParams {
            burn_in: 100,
            thin: 1,
            chain_len: 40_100,
            ..McmcParams::default()
        };
        let chain = gibbs_sample(&e, 1, 1, &params, &mut rng::stream(8)).unwrap();
        let ir = importance_resample(&e, 1, 1, 40_000, 40_000, &mut rng::stream(9)).unwrap();
        for set in [&chain, &ir] {
            let k = set.samples.len() as f64;
            for (pt, p) in exact.points.iter().zip(&exact.probs) {
                let hits = set.samples.iter().filter(|x| x[0] == pt[0] && x[1] == pt[1]).count() as f64;
                // a two-state flip chain is close to independent; allow for mild correlation
                let sd = (p * (1.0 - p) / k).sqrt();
                assert!((hits / k - p).abs() < 3.0 * 2.0 * sd, "{pt:?}: {} vs {p}", hits / k);
            }
        }
        assert!(importance_resample(&e, 4, 3, 10, 10, &mut rng::stream(0)).is_err());
    }

    #[test]
    fn chain_length_stability() {
        let sp = spec(3, 2, Mixture::pure(2), Some(0.375));
        let b = FieldBundle::sample(&sp, 2).unwrap();
        let e = InterpolatingEnergy::new(&b, 0.5).unwrap();
        let mean_r1 = |len: usize, seed: u64| {
            let p = McmcParams {
                chain_len: len,
                ..McmcParams::default()
            };
            let a = gibbs_sample(&e, 3, 2, &p, &mut rng::stream(seed)).unwrap();
            let c = gibbs_sample(&e, 3, 2, &p, &mut rng::stream(seed + 100)).unwrap();
            assert!(!a.diagnostics.non_ergodic);
            let r: Vec<f64> = a
                .samples
                .iter()
                .zip(&c.samples)
                .map(|(x, y)| overlaps_concat(x, y, 3).r1)
                .collect();
            // thinned samples still correlate; inflate by a batch-means style factor
            let est = MeanEstimate::from_samples(&r);
            (est.mean, est.stderr * 3.0)
        };
        let (a, sa) = mean_r1(12_000, 1);
        let (c, sc) = mean_r1(22_000, 2);
        assert!(
            (a - c).abs() < 3.0 * (sa * sa + sc * sc).sqrt(),
            "{a} ± {sa} vs {c} ± {sc}"
        );
    }

    #[test]
    fn mcmc_params_are_validated() {
        let bad = McmcParams {
            burn_in: 100,
            thin: 10,
            chain_len: 150,
            ..McmcParams::default()
        };
        assert!(bad.validate().is_err());
        let e = InterpolatingEnergy::new(
            &FieldBundle::sample(&spec(2, 2, Mixture::pure(2), None), 0).unwrap(),
            0.5,
        )
        .unwrap();
        assert!(gibbs_sample(&e, 2, 1, &McmcParams::default(), &mut rng::stream(0)).is_err());
    }

    fn pair_with_overlaps(n: usize, m: usize, same_rho: bool, tau_sign: Option<f64>) -> (ProductConfig, ProductConfig) {
        // coordinate vectors give exact overlaps 1, −1 or 0
        let rho = SphericalConfig::on_standard_sphere({
            let mut v = vec![0.0; n];
            v[0] = (n as f64).sqrt();
            v
        })
        .unwrap();
        let tau = SphericalConfig::on_standard_sphere({
            let mut v = vec![0.0; m];
            v[0] = (m as f64).sqrt();
            v
        })
        .unwrap();
        let rho2 = if same_rho {
            rho.clone()
        } else {
            let mut v = vec![0.0; n];
            v[1] = (n as f64).sqrt();
            SphericalConfig::on_standard_sphere(v).unwrap()
        };
        let tau2 = match tau_sign {
            Some(s) => SphericalConfig::on_standard_sphere(tau.coords().iter().map(|x| s * x).collect()).unwrap(),
            None => {
                let mut v = vec![0.0; m];
                v[1] = (m as f64).sqrt();
                SphericalConfig::on_standard_sphere(v).unwrap()
            }
        };
        (ProductConfig::new(rho, tau), ProductConfig::new(rho2, tau2))
    }

    #[test]
    fn u_examples() {
        let mix = Mixture::pure(2);
        let (a, b) = pair_with_overlaps(4, 4, true, None);
        assert_eq!(u_functional(&a, &a, &mix).unwrap(), 0.0);
        // R¹ = 1, R² = 0: 8(ξ(½) − ½ξ(1) − ½ξ(0)) = −2
        assert_relative_eq!(u_functional(&a, &b, &mix).unwrap(), -2.0, epsilon = 1e-14);
        let other = uniform_product(3, 4, &mut rng::stream(0)).unwrap();
        assert!(u_functional(&a, &other, &mix).is_err());
    }

    #[test]
    fn u_bound_on_random_pairs() {
        let mut s = rng::stream(3);
        for mix in [
            Mixture::pure(2),
            Mixture::pure(3),
            Mixture::new(&[1.0, 1.0, 1.0]).unwrap(),
        ] {
            for (n, m) in [(1, 1), (4, 2), (8, 8)] {
                let bound = u_abs_bound(m, &mix);
                for _ in 0..20_000 {
                    let a = uniform_concat(n, m, &mut s);
                    let b = uniform_concat(n, m, &mut s);
                    let u = u_from_overlaps(&overlaps_concat(&a, &b, n), n, m, &mix);
                    assert!(u.abs() <= bound * (1.0 + 1e-12), "{u} vs {bound}");
                }
            }
        }
    }

    #[test]
    fn u_plus_examples() {
        let mix = Mixture::pure(3);
        let (a, b) = pair_with_overlaps(4, 4, true, None);
        let up = u_plus_functional(&a, &b, &mix, 0.2).unwrap();
        assert_eq!(up.u_plus, u_functional(&a, &b, &mix).unwrap());
        assert_relative_eq!(up.gap_bound, 2.0 * 0.2 * 4.0 * (3.0 + 6.0), epsilon = 1e-12);
        let (a, b) = pair_with_overlaps(4, 4, true, Some(-1.0));
        let flipped = ProductConfig::new(
            SphericalConfig::on_standard_sphere(a.rho.coords().iter().map(|x| -x).collect()).unwrap(),
            b.tau.clone(),
        );
        assert_eq!(u_plus_functional(&a, &flipped, &mix, 0.2).unwrap().u_plus, 0.0);
        assert!(u_plus_functional(&a, &b, &mix, 1.0).is_err());
    }

    #[test]
    fn u_plus_grid_maximum_on_diagonal() {
        let mix = Mixture::pure(3);
        let mut best = (f64::NEG_INFINITY, 0, 0);
        for i in 0..=100 {
            for j in 0..=100 {
                let v = u_plus_from_overlaps(i as f64 / 100.0, j as f64 / 100.0, 8, 8, &mix, 0.0).u_plus;
                assert!(v <= 1e-12, "{v} at {i},{j}");
                if v > best.0 {
                    best = (v, i, j);
                }
            }
        }
        assert!(best.0.abs() < 1e-12);
        for i in 0..=100 {
            let v = u_plus_from_overlaps(i as f64 / 100.0, i as f64 / 100.0, 8, 8, &mix, 0.0).u_plus;
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn zero_field_interpolation() {
        let sp = spec(2, 2, Mixture::pure(2), Some(0.375)).zeroed();
        let b = Budgets::new(8, 200);
        for p in phi_curve(&sp, &[0.0, 0.5, 1.0], &b, 1).unwrap() {
            assert_eq!(p.phi, 0.0);
        }
        // uniform replicas: R¹, R² = ±1 independently, U = −2 when they differ
        let pp = phi_prime_ibp(
            &spec(1, 1, Mixture::pure(2), Some(0.375)).zeroed(),
            0.5,
            &McmcParams::default(),
            8,
            1,
        )
        .unwrap();
        assert_eq!(pp.mean_u, -1.0);
        let mass = overlap_negativity_mass(
            &spec(1, 1, Mixture::pure(2), None).zeroed(),
            0.5,
            0.0,
            &McmcParams::default(),
            8,
            1,
        )
        .unwrap();
        // four equally likely points: R¹ = ±1 with probability ½ each
        assert_eq!(mass.mass, 0.5);
    }

    #[test]
    fn zero_field_negativity_half_by_symmetry() {
        let sp = spec(3, 2, Mixture::pure(2), None).zeroed();
        let params = McmcParams {
            chain_len: 7_000,
            burn_in: 1_000,
            ..McmcParams::default()
        };
        let mass = overlap_negativity_mass(&sp, 0.5, 0.0, &params, 8, 4).unwrap();
        assert!((mass.mass - 0.5).abs() < 3.0 * mass.stderr.max(0.01), "{mass:?}");
    }

    #[test]
    fn derivative_matches_fd_small_run() {
        let sp = spec(1, 1, Mixture::new(&[0.7, 1.0]).unwrap(), Some(0.375));
        for t in [0.25, 0.5, 0.75] {
            let c = derivative_fd_check(&sp, t, 0.05, 100, 3).unwrap();
            assert!(c.within(3.0), "t={t}: {c:?}");
        }
        assert!(derivative_fd_check(&spec(2, 1, Mixture::pure(2), None), 0.5, 0.05, 10, 0).is_err());
        assert!(derivative_fd_check(&sp, 0.02, 0.05, 10, 0).is_err());
    }

    #[test]
    fn endpoint_identities_small() {
        let sp = spec(1, 2, Mixture::pure(2), Some(0.375));
        let c = endpoint_check(&sp, &Budgets::new(16, 2_000), 5).unwrap();
        // all exact rules here: φ(0) is exactly log Z_N + log Z_M
        assert!(c.at_zero.difference.mean.abs() < 1e-10, "{c:?}");
        assert!(c.at_one.difference.mean.abs() < 1e-10, "{c:?}");
    }

    #[test]
    fn u_plus_audit_small() {
        for mix in [
            Mixture::pure(2),
            Mixture::pure(3),
            Mixture::new(&[1.0, 1.0, 1.0]).unwrap(),
        ] {
            let a = u_plus_audit(2, 3, &mix, 10_000, 1).unwrap();
            assert_eq!(a.violations(), 0, "{a:?}");
            assert_eq!(a.grid_points, 10_201);
            assert!(a.max_u_plus.abs() <= U_PLUS_RTOL * 5.0 * mix.xi(1.0));
        }
    }
}
