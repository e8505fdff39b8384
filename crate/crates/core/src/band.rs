//! Band-restricted partition integrals on `S_{N+M}`, the split of
//! `S_N × S_M` by the sign of the radial derivative of `H̄_{N+M}` in `τ`,
//! probe-based Lipschitz constants of `H̄_{N+M}` on a ball, and a pointwise
//! audit of the Taylor chain comparing `H̄ ∘ f_r` with `H̄`.
//!
//! `X(r)` is reported per unit product measure, i.e. as the mean of
//! `e^{H̄(f_r(ρ, τ))}` under uniform `(ρ, τ) ∈ S_N × S_M`. The raw integral
//! differs by `ν_N(S_N(η(r))) ν_M(S_M(r))`.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::{CompiledField, FieldBundle, Hamiltonian};
use crate::rng;
use crate::sphere::{eta_radius, fill_uniform_sphere, scale_map_concat};
use crate::stats::pairwise_sum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BandSide {
    All,
    Plus,
    Minus,
}

/// `d/ds H̄_{N+M}(ρ, τ + s τ/‖τ‖)` at `s = 0`.
pub fn radial_derivative(h_bar_total: &Hamiltonian, n: usize, rho: &[f64], tau: &[f64]) -> Result<f64> {
    let m = h_bar_total.n().saturating_sub(n);
    if rho.len() != n || tau.len() != m || m == 0 {
        return Err(Error::DimensionMismatch {
            expected: h_bar_total.n(),
            got: rho.len() + tau.len(),
        });
    }
    let norm = tau.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(invalid("tau", "radial direction undefined at the origin"));
    }
    let x: Vec<f64> = rho.iter().chain(tau).copied().collect();
    let dir: Vec<f64> = std::iter::repeat_n(0.0, n)
        .chain(tau.iter().map(|v| v / norm))
        .collect();
    h_bar_total.directional_derivative(&x, &dir)
}

fn side_of(derivative: f64) -> Side {
    // an exact zero goes to the plus side
    if derivative >= 0.0 {
        Side::Plus
    } else {
        Side::Minus
    }
}

/// Membership of `(ρ, τ) ∈ S_N × S_M` in `D⁺` or `D⁻`.
pub fn d_split_membership(bundle: &FieldBundle, rho: &[f64], tau: &[f64]) -> Result<Side> {
    let (n, m) = (bundle.n(), bundle.m());
    if rho.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: rho.len(),
        });
    }
    if tau.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: tau.len(),
        });
    }
    for (v, d) in [(rho, n), (tau, m)] {
        let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let want = (d as f64).sqrt();
        if (r - want).abs() > 1e-9 * want {
            return Err(invalid(
                "configuration",
                format!("norm {r} is not the standard radius {want}"),
            ));
        }
    }
    Ok(side_of(radial_derivative(&bundle.h_bar_total(), n, rho, tau)?))
}

/// Normalized band integral with its Monte Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandIntegral {
    pub value: f64,
    pub stderr: f64,
    /// `log value`; finite even when `value` overflows.
    pub log_value: f64,
}

/// `X(r)` and its two restrictions from one shared sample; `all.value` is
/// `plus.value + minus.value`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandSplit {
    pub all: BandIntegral,
    pub plus: BandIntegral,
    pub minus: BandIntegral,
    /// Fraction of samples in `D⁺`.
    pub plus_fraction: f64,
    pub n_inner: usize,
}

impl BandSplit {
    pub fn side(&self, side: BandSide) -> BandIntegral {
        match side {
            BandSide::All => self.all,
            BandSide::Plus => self.plus,
            BandSide::Minus => self.minus,
        }
    }
}

fn check_r(n: usize, m: usize, r: f64) -> Result<()> {
    let total = (n + m) as f64;
    if !(r > 0.0 && r < total.sqrt()) {
        return Err(Error::DomainError {
            what: "r",
            value: r,
            domain: "(0, sqrt(N+M))",
        });
    }
    Ok(())
}

/// Mean and standard error of `e^{shift} w_i`, with `w_i ∈ [0, 1]`.
fn scaled_mean(w: &[f64], shift: f64) -> (f64, f64, f64) {
    let k = w.len() as f64;
    let mean = pairwise_sum(w) / k;
    let dev: Vec<f64> = w.iter().map(|x| (x - mean) * (x - mean)).collect();
    let sd = (pairwise_sum(&dev) / (k - 1.0)).sqrt();
    let scale = shift.exp();
    (scale * mean, scale * sd / k.sqrt(), shift + mean.ln())
}

/// Monte Carlo estimate of `X(r)`, `X⁺(r)` and `X⁻(r)` from `n_inner`
/// uniform points of `S_N × S_M`; membership is decided at the pre-image.
pub fn x_band_split<R: Rng + ?Sized>(bundle: &FieldBundle, r: f64, n_inner: usize, rng: &mut R) -> Result<BandSplit> {
    let (n, m) = (bundle.n(), bundle.m());
    check_r(n, m, r)?;
    if n_inner < 2 {
        return Err(invalid("n_inner", "need at least two samples"));
    }
    let h = bundle.h_bar_total();
    let fast = h.compile();
    let mut pts = Vec::with_capacity(n_inner);
    for _ in 0..n_inner {
        let mut x = vec![0.0; n + m];
        let (a, b) = x.split_at_mut(n);
        fill_uniform_sphere(a, (n as f64).sqrt(), rng);
        fill_uniform_sphere(b, (m as f64).sqrt(), rng);
        pts.push(x);
    }
    let evals: Vec<(f64, Side)> = pts
        .par_iter()
        .map(|x| {
            let mut y = vec![0.0; n + m];
            scale_map_concat(x, n, r, &mut y);
            let d = radial_derivative(&h, n, &x[..n], &x[n..]).expect("dimensions checked");
            (fast.value(&y), side_of(d))
        })
        .collect();
    let shift = evals.iter().map(|e| e.0).fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = evals.iter().map(|e| (e.0 - shift).exp()).collect();
    let masked = |s: Side| -> Vec<f64> {
        evals
            .iter()
            .zip(&w)
            .map(|(e, w)| if e.1 == s { *w } else { 0.0 })
            .collect()
    };
    let integral = |v: &[f64]| {
        let (value, stderr, log_value) = scaled_mean(v, shift);
        BandIntegral {
            value,
            stderr,
            log_value,
        }
    };
    let plus = integral(&masked(Side::Plus));
    let minus = integral(&masked(Side::Minus));
    let whole = integral(&w);
    let value = plus.value + minus.value;
    let n_plus = evals.iter().filter(|e| e.1 == Side::Plus).count();
    Ok(BandSplit {
        all: BandIntegral {
            value,
            stderr: whole.stderr,
            log_value: whole.log_value,
        },
        plus,
        minus,
        plus_fraction: n_plus as f64 / n_inner as f64,
        n_inner,
    })
}

pub fn x_band_integral<R: Rng + ?Sized>(
    bundle: &FieldBundle,
    r: f64,
    side: BandSide,
    n_inner: usize,
    rng: &mut R,
) -> Result<BandIntegral> {
    Ok(x_band_split(bundle, r, n_inner, rng)?.side(side))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeMethod {
    Random,
    GradientAscentPolish,
}

/// Probe maxima of `‖∇H̄‖` and `|uᵀ∇²H̄ u|` over the ball of `radius`.
/// Both are lower bounds on the true maxima.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzEstimates {
    pub l1: f64,
    pub l2: f64,
    pub n_probes: usize,
    pub probe_method: ProbeMethod,
    pub radius: f64,
    /// `l1 / √(N+M)`.
    pub l1_normalized: f64,
}

const POLISH_STEPS: usize = 12;
const MAX_HALVINGS: usize = 8;

fn project(x: &mut [f64], radius: f64) {
    let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if r > radius {
        x.iter_mut().for_each(|v| *v *= radius / r);
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn grad_norm(h: &Hamiltonian, x: &[f64]) -> f64 {
    norm(&h.gradient(x).expect("dimension checked"))
}

/// Largest `|λ|` of the Hessian with its eigenvector.
fn top_curvature(h: &Hamiltonian, x: &[f64]) -> (f64, Vec<f64>) {
    let hess: DMatrix<f64> = h.hessian(x).expect("dimension checked");
    let eig = SymmetricEigen::new(hess);
    let (i, lam) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .expect("nonempty");
    (*lam, eig.eigenvectors.column(i).iter().copied().collect())
}

/// Backtracking ascent of `f` along `dir` from `x`, kept inside the ball.
fn ascend(x: &mut Vec<f64>, fx: &mut f64, dir: &[f64], radius: f64, f: impl Fn(&[f64]) -> f64, best: &mut f64) -> bool {
    let dn = norm(dir);
    if dn == 0.0 {
        return false;
    }
    let mut step = 0.25 * radius;
    for _ in 0..MAX_HALVINGS {
        let mut y: Vec<f64> = x.iter().zip(dir).map(|(a, d)| a + step * d / dn).collect();
        project(&mut y, radius);
        let fy = f(&y);
        *best = best.max(fy);
        if fy > *fx {
            *x = y;
            *fx = fy;
            return true;
        }
        step *= 0.5;
    }
    false
}

/// Polishes one start point for both constants; returns `(max ‖∇H‖, max |λ|)`
/// over every point evaluated.
fn polish(h: &Hamiltonian, start: &[f64], radius: f64, polish: bool) -> (f64, f64) {
    let mut x = start.to_vec();
    let mut g1 = grad_norm(h, &x);
    let mut best1 = g1;
    let (lam, _) = top_curvature(h, &x);
    let mut best2 = lam.abs();
    if !polish {
        return (best1, best2);
    }
    for _ in 0..POLISH_STEPS {
        let g = h.gradient(&x).expect("dimension checked");
        // ∇(½‖∇H‖²) = ∇²H ∇H
        let dir = h.hessian_vector(&x, &g).expect("dimension checked");
        if !ascend(&mut x, &mut g1, &dir, radius, |y| grad_norm(h, y), &mut best1) {
            break;
        }
    }
    let mut x = start.to_vec();
    let (mut lam, mut u) = top_curvature(h, &x);
    let mut f2 = lam.abs();
    for _ in 0..POLISH_STEPS {
        let mut dir = h.curvature_gradient(&x, &u).expect("dimension checked");
        if lam < 0.0 {
            dir.iter_mut().for_each(|d| *d = -*d);
        }
        let mut trial = x.clone();
        let curv = |y: &[f64]| top_curvature(h, y).0.abs();
        if !ascend(&mut trial, &mut f2, &dir, radius, curv, &mut best2) {
            break;
        }
        x = trial;
        (lam, u) = top_curvature(h, &x);
    }
    (best1, best2)
}

fn probe_start(i: usize, seed: u64, dim: usize, radius: f64) -> Vec<f64> {
    let mut s = rng::child(seed, "probe", i as u64);
    let mut x = vec![0.0; dim];
    fill_uniform_sphere(&mut x, radius, &mut s);
    // alternate between the boundary and the interior of the ball
    if i % 2 == 1 {
        let u: f64 = s.random();
        let scale = u.powf(1.0 / dim as f64);
        x.iter_mut().for_each(|v| *v *= scale);
    }
    x
}

fn probe_set(h: &Hamiltonian, starts: &[Vec<f64>], radius: f64, method: ProbeMethod) -> (f64, f64) {
    let polish_on = method == ProbeMethod::GradientAscentPolish;
    starts
        .par_iter()
        .map(|x| polish(h, x, radius, polish_on))
        .collect::<Vec<_>>()
        .into_iter()
        .fold((0.0, 0.0), |(a, b), (c, d)| (f64::max(a, c), f64::max(b, d)))
}

/// Probe estimates of `max ‖∇H̄_{N+M}‖` and `max |uᵀ∇²H̄_{N+M} u|` over
/// `‖σ‖ ≤ radius`. Probe `i` draws its start from `child(seed, "probe", i)`,
/// so adding probes never lowers the estimates.
pub fn lipschitz_estimates(
    bundle: &FieldBundle,
    radius: f64,
    n_probes: usize,
    method: ProbeMethod,
    seed: u64,
) -> Result<LipschitzEstimates> {
    if n_probes < 100 {
        return Err(invalid("n_probes", format!("need at least 100 probes, got {n_probes}")));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::DomainError {
            what: "radius",
            value: radius,
            domain: "(0, inf)",
        });
    }
    let h = bundle.h_bar_total();
    let dim = h.n();
    let starts: Vec<Vec<f64>> = (0..n_probes).map(|i| probe_start(i, seed, dim, radius)).collect();
    let (l1, l2) = probe_set(&h, &starts, radius, method);
    Ok(LipschitzEstimates {
        l1,
        l2,
        n_probes,
        probe_method: method,
        radius,
        l1_normalized: l1 / (dim as f64).sqrt(),
    })
}

/// Ball radius containing both legs of the Taylor chain from `(ρ, τ)` to
/// `f_r(ρ, τ)`: `√(N + max(r, √M)²)`.
pub fn chain_radius(n: usize, m: usize, r: f64) -> f64 {
    let top = r.max((m as f64).sqrt());
    (n as f64 + top * top).sqrt()
}

/// Outcome of [`lemma_estimate_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LemmaAudit {
    pub violations: usize,
    /// Sampled pairs that fell on the audited side.
    pub checked: usize,
    pub sampled: usize,
    pub side: Side,
    pub lipschitz: LipschitzEstimates,
    /// Extra probing rounds triggered by violations.
    pub reprobe_rounds: usize,
    /// Smallest slack `H̄(f_r) − (H̄ − l1|η−√N| − l2|r−√M|²)` observed.
    pub min_slack: f64,
}

const MAX_REPROBE_ROUNDS: usize = 5;

struct Pair {
    x: Vec<f64>,
    h0: f64,
    h1: f64,
}

/// Samples `n_pairs` uniform `(ρ, τ)`, keeps those in `D⁺` (for `r ≥ √M`)
/// or `D⁻` (for `r < √M`), and counts pairs with
/// `H̄(f_r(ρ, τ)) < H̄(ρ, τ) − l1 |η(r) − √N| − l2 |r − √M|²`.
/// Violations mean the probe constants were too small: the violating paths
/// are then used as extra probe starts and the count is redone.
pub fn lemma_estimate_check(
    bundle: &FieldBundle,
    r: f64,
    n_pairs: usize,
    n_probes: usize,
    seed: u64,
) -> Result<LemmaAudit> {
    let (n, m) = (bundle.n(), bundle.m());
    check_r(n, m, r)?;
    let sqrt_m = (m as f64).sqrt();
    let side = if r >= sqrt_m { Side::Plus } else { Side::Minus };
    let h = bundle.h_bar_total();
    let fast: CompiledField = h.compile();
    let mut s = rng::child(seed, "pairs", 0);
    let mut xs = Vec::with_capacity(n_pairs);
    for _ in 0..n_pairs {
        let mut x = vec![0.0; n + m];
        let (a, b) = x.split_at_mut(n);
        fill_uniform_sphere(a, (n as f64).sqrt(), &mut s);
        fill_uniform_sphere(b, sqrt_m, &mut s);
        xs.push(x);
    }
    let pairs: Vec<Pair> = xs
        .into_par_iter()
        .filter_map(|x| {
            let d = radial_derivative(&h, n, &x[..n], &x[n..]).expect("dimensions checked");
            (side_of(d) == side).then(|| {
                let mut y = vec![0.0; n + m];
                scale_map_concat(&x, n, r, &mut y);
                Pair {
                    h0: fast.value(&x),
                    h1: fast.value(&y),
                    x,
                }
            })
        })
        .collect();
    let radius = chain_radius(n, m, r);
    let mut lip = lipschitz_estimates(bundle, radius, n_probes, ProbeMethod::GradientAscentPolish, seed)?;
    let d1 = (eta_radius(n, m, r)? - (n as f64).sqrt()).abs();
    let d2 = (r - sqrt_m).powi(2);
    let slacks = |lip: &LipschitzEstimates| -> Vec<f64> {
        pairs
            .iter()
            .map(|p| {
                let tol = 1e-10 * (1.0 + p.h0.abs());
                p.h1 - (p.h0 - lip.l1 * d1 - lip.l2 * d2) + tol
            })
            .collect()
    };
    let mut sl = slacks(&lip);
    let mut rounds = 0;
    while rounds < MAX_REPROBE_ROUNDS && sl.iter().any(|v| *v < 0.0) {
        rounds += 1;
        let mut starts = Vec::new();
        for (p, _) in pairs.iter().zip(&sl).filter(|(_, v)| **v < 0.0) {
            starts.extend(chain_points(&p.x, n, r));
        }
        let (a, b) = probe_set(&h, &starts, radius, ProbeMethod::GradientAscentPolish);
        lip.l1 = lip.l1.max(a);
        lip.l2 = lip.l2.max(b);
        lip.l1_normalized = lip.l1 / ((n + m) as f64).sqrt();
        lip.n_probes += starts.len();
        sl = slacks(&lip);
    }
    Ok(LemmaAudit {
        violations: sl.iter().filter(|v| **v < 0.0).count(),
        checked: pairs.len(),
        sampled: n_pairs,
        side,
        lipschitz: lip,
        reprobe_rounds: rounds,
        min_slack: sl.iter().copied().fold(f64::INFINITY, f64::min),
    })
}

/// Points on the two legs `(ρ, s τ̂)` and `(t ρ̂, r τ̂)` of the chain.
fn chain_points(x: &[f64], n: usize, r: f64) -> Vec<Vec<f64>> {
    let m = x.len() - n;
    let (sn, sm) = ((n as f64).sqrt(), (m as f64).sqrt());
    let eta = ((n + m) as f64 - r * r).max(0.0).sqrt();
    let mut out = Vec::new();
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let s = sm + f * (r - sm);
        out.push(
            x.iter()
                .enumerate()
                .map(|(i, v)| if i < n { *v } else { v * s / sm })
                .collect(),
        );
        let t = sn + f * (eta - sn);
        out.push(
            x.iter()
                .enumerate()
                .map(|(i, v)| if i < n { v * t / sn } else { v * r / sm })
                .collect(),
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{CouplingTensors, DisorderSpec};
    use crate::free_energy::{product_log_partition, Budgets, ProductMode};
    use crate::mixture::Mixture;
    use crate::sphere::uniform_product;
    use crate::stats::MeanEstimate;
    use approx::assert_relative_eq;

    fn bundle(n: usize, m: usize, mix: Mixture, c: Option<f64>, seed: u64) -> FieldBundle {
        FieldBundle::sample(&DisorderSpec::new(n, m, mix, c), seed).unwrap()
    }

    fn zero_bundle(n: usize, m: usize) -> FieldBundle {
        FieldBundle::sample(&DisorderSpec::new(n, m, Mixture::pure(2), Some(0.375)).zeroed(), 0).unwrap()
    }

    #[test]
    fn zero_field_membership_and_integrals() {
        let b = zero_bundle(3, 2);
        let p = uniform_product(3, 2, &mut rng::stream(0)).unwrap();
        assert_eq!(
            d_split_membership(&b, p.rho.coords(), p.tau.coords()).unwrap(),
            Side::Plus
        );
        let split = x_band_split(&b, 1.1, 500, &mut rng::stream(1)).unwrap();
        assert_eq!(split.all.value, 1.0);
        assert_eq!(split.all.stderr, 0.0);
        assert_eq!(split.plus.value, 1.0);
        assert_eq!(split.minus.value, 0.0);
        let lip = lipschitz_estimates(&b, 2.0, 100, ProbeMethod::GradientAscentPolish, 3).unwrap();
        assert_eq!((lip.l1, lip.l2), (0.0, 0.0));
        let audit = lemma_estimate_check(&b, 2f64.sqrt() + 0.3, 200, 100, 4).unwrap();
        assert_eq!(audit.violations, 0);
        assert_eq!(audit.checked, 200);
    }

    #[test]
    fn linear_field_membership() {
        // H̄ = Σ J_i σ_i with J ≡ 1 on ℝ^3: the radial τ derivative is Στ_i/‖τ‖
        let couplings = std::sync::Arc::new(CouplingTensors::from_entries(3, 0, vec![(1, vec![1.0; 3])]).unwrap());
        let h = Hamiltonian::mixed(couplings, &Mixture::pure(1)).unwrap();
        let d = radial_derivative(&h, 1, &[1.0], &[1.0, 1.0]).unwrap();
        assert_relative_eq!(d, 2f64.sqrt(), epsilon = 1e-14);
        let neg = h.clone().scaled(-1.0);
        assert!(radial_derivative(&neg, 1, &[1.0], &[1.0, 1.0]).unwrap() < 0.0);
        assert!(radial_derivative(&h, 2, &[1.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn negated_couplings_flip_membership() {
        let b = bundle(2, 3, Mixture::new(&[0.5, 1.0, 0.8]).unwrap(), Some(0.375), 9);
        let h = b.h_bar_total();
        let neg = h.clone().scaled(-1.0);
        let mut s = rng::stream(2);
        for _ in 0..50 {
            let p = uniform_product(2, 3, &mut s).unwrap();
            let d = radial_derivative(&h, 2, p.rho.coords(), p.tau.coords()).unwrap();
            let dn = radial_derivative(&neg, 2, p.rho.coords(), p.tau.coords()).unwrap();
            assert_ne!(side_of(d), side_of(dn));
            assert_eq!(
                d_split_membership(&b, p.rho.coords(), p.tau.coords()).unwrap(),
                side_of(d)
            );
        }
        assert!(d_split_membership(&b, &[1.0, 1.0, 1.0], &[1.0; 2]).is_err());
        assert!(d_split_membership(&b, &[2.0, 0.0], &[1.0; 3]).is_err());
    }

    #[test]
    fn split_adds_up() {
        let b = bundle(3, 3, Mixture::new(&[0.0, 1.0, 0.5]).unwrap(), Some(0.375), 1);
        let split = x_band_split(&b, 1.5, 2_000, &mut rng::stream(5)).unwrap();
        assert_eq!(split.all.value, split.plus.value + split.minus.value);
        assert!(split.plus.value > 0.0 && split.minus.value > 0.0);
        assert!(split.plus_fraction > 0.0 && split.plus_fraction < 1.0);
        assert_relative_eq!(split.all.log_value, split.all.value.ln(), epsilon = 1e-12);
        assert!(x_band_split(&b, 0.0, 10, &mut rng::stream(0)).is_err());
        assert!(x_band_split(&b, 6f64.sqrt(), 10, &mut rng::stream(0)).is_err());
    }

    #[test]
    fn four_point_oracle() {
        // S_1 × S_1 = {±1}², f_r(ρ, τ) = (η ρ, r τ)
        let b = bundle(1, 1, Mixture::new(&[0.6, 1.0]).unwrap(), Some(0.375), 12);
        let h = b.h_bar_total();
        let r = 0.8;
        let eta = (2.0f64 - r * r).sqrt();
        let pts = [[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]];
        let mut plus = 0.0;
        let mut all = 0.0;
        for p in pts {
            let w = h.value(&[eta * p[0], r * p[1]]).exp() / 4.0;
            all += w;
            if radial_derivative(&h, 1, &p[..1], &p[1..]).unwrap() >= 0.0 {
                plus += w;
            }
        }
        let est = x_band_split(&b, r, 40_000, &mut rng::stream(6)).unwrap();
        assert!((est.all.value - all).abs() < 3.0 * est.all.stderr, "{est:?} vs {all}");
        assert!(
            (est.plus.value - plus).abs() < 3.0 * est.plus.stderr.max(1e-12),
            "{est:?} vs {plus}"
        );
    }

    #[test]
    fn band_at_sqrt_m_is_product_partition() {
        let spec = DisorderSpec::new(2, 2, Mixture::pure(2), Some(0.375));
        let seed = 31;
        let b = FieldBundle::sample(&spec, seed).unwrap();
        let z = product_log_partition(
            &spec,
            ProductMode::RestrictedHbar,
            &Budgets::new(8, 1_000),
            seed,
            "inner",
        )
        .unwrap();
        let x = x_band_integral(&b, 2f64.sqrt(), BandSide::All, 50_000, &mut rng::stream(7)).unwrap();
        let combined = (x.stderr.powi(2) + (z.stderr * z.value.exp()).powi(2)).sqrt();
        assert!((x.value - z.value.exp()).abs() < 3.0 * combined, "{x:?} vs {z:?}");
    }

    #[test]
    fn linear_field_lipschitz_is_coupling_norm() {
        let b = bundle(2, 2, Mixture::pure(1), None, 3);
        let h = b.h_bar_total();
        let exact = norm(&h.gradient(&[0.0; 4]).unwrap());
        let lip = lipschitz_estimates(&b, 2.0, 100, ProbeMethod::GradientAscentPolish, 1).unwrap();
        assert_relative_eq!(lip.l1, exact, max_relative = 1e-9);
        assert!(lip.l2.abs() < 1e-12);
        assert!(lipschitz_estimates(&b, 2.0, 99, ProbeMethod::Random, 1).is_err());
    }

    #[test]
    fn lipschitz_monotone_in_probes() {
        let b = bundle(2, 2, Mixture::new(&[0.3, 1.0, 0.5]).unwrap(), Some(0.375), 4);
        let few = lipschitz_estimates(&b, 2.0, 100, ProbeMethod::Random, 8).unwrap();
        let more = lipschitz_estimates(&b, 2.0, 200, ProbeMethod::Random, 8).unwrap();
        let polished = lipschitz_estimates(&b, 2.0, 100, ProbeMethod::GradientAscentPolish, 8).unwrap();
        assert!(more.l1 >= few.l1 && more.l2 >= few.l2);
        assert!(polished.l1 >= few.l1 && polished.l2 >= few.l2);
    }

    #[test]
    fn lipschitz_concentrates() {
        let vals: Vec<f64> = (0..50)
            .map(|d| {
                let b = bundle(8, 8, Mixture::pure(2), None, rng::derive_seed(2, "lip", d));
                lipschitz_estimates(&b, 4.0, 100, ProbeMethod::GradientAscentPolish, d)
                    .unwrap()
                    .l1_normalized
            })
            .collect();
        let e = MeanEstimate::from_samples(&vals);
        assert!(e.std_dev() < e.mean / 3.0, "{e:?}");
    }

    #[test]
    fn audit_at_sqrt_m_has_no_displacement() {
        let b = bundle(3, 2, Mixture::pure(2), Some(0.375), 6);
        let a = lemma_estimate_check(&b, 2f64.sqrt(), 500, 100, 2).unwrap();
        assert_eq!(a.violations, 0);
        assert_eq!(a.side, Side::Plus);
        assert!(a.min_slack >= 0.0);
        assert_eq!(chain_radius(3, 2, 1.0), 5f64.sqrt());
    }

    #[test]
    fn audit_small_run_both_sides() {
        let b = bundle(4, 4, Mixture::pure(2), Some(0.375), 5);
        for (r, side) in [(2.3, Side::Plus), (1.7, Side::Minus)] {
            let a = lemma_estimate_check(&b, r, 1_000, 100, 3).unwrap();
            assert_eq!(a.side, side);
            assert_eq!(a.violations, 0, "{a:?}");
            assert!(a.checked > 0 && a.checked < 1_000);
        }
    }
}
