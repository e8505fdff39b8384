//! Spheres `S_N(r) = {‖σ‖ = r}` in `ℝ^N`, products `S_N × S_M`, and the
//! geometry relating `S_{N+M}` to them.
//!
//! The map `φ(σ) = ‖τ‖` for `σ = (ρ, τ) ∈ S_{N+M}` has level sets
//! `S_N(η(r)) × S_M(r)` with `η(r) = √(N+M−r²)` and Jacobian
//! `η(‖τ‖)/√(N+M)`. Integrating the constant function along these level sets
//! gives the band measure of `{‖τ‖ ∈ I}`; [`band_measure`] returns it both
//! from that one-dimensional integral and from the exact law
//! `‖τ‖²/(N+M) ~ Beta(M/2, N/2)`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::beta::beta_reg;
use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, Error, Result};
use crate::quadrature::adaptive_simpson;
use crate::rng;
use crate::stats::{ks_critical_value, ks_statistic, standard_normal_cdf};

const RADIUS_RTOL: f64 = 1e-9;

/// A point of `S_N(radius)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphericalConfig {
    coords: Vec<f64>,
    radius: f64,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl SphericalConfig {
    /// Checks `‖coords‖ = radius` to 1e-9 relative.
    pub fn new(coords: Vec<f64>, radius: f64) -> Result<Self> {
        if coords.is_empty() {
            return Err(invalid("coords", "empty configuration"));
        }
        if radius.is_nan() || radius <= 0.0 {
            return Err(Error::DomainError {
                what: "radius",
                value: radius,
                domain: "(0, inf)",
            });
        }
        let r = norm(&coords);
        if (r - radius).abs() > RADIUS_RTOL * radius {
            return Err(invalid("coords", format!("norm {r} does not match radius {radius}")));
        }
        Ok(Self { coords, radius })
    }

    /// Rescales `coords` onto `S_N(radius)`.
    pub fn projected(coords: Vec<f64>, radius: f64) -> Result<Self> {
        let r = norm(&coords);
        if r == 0.0 {
            return Err(invalid("coords", "cannot project the origin"));
        }
        let scaled = coords.iter().map(|x| x * radius / r).collect();
        Self::new(scaled, radius)
    }

    /// Point on the standard sphere `S_N = S_N(√N)`.
    pub fn on_standard_sphere(coords: Vec<f64>) -> Result<Self> {
        let r = (coords.len() as f64).sqrt();
        Self::new(coords, r)
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }
}

/// `(ρ, τ) ∈ S_N(r_1) × S_M(r_2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductConfig {
    pub rho: SphericalConfig,
    pub tau: SphericalConfig,
}

impl ProductConfig {
    pub fn new(rho: SphericalConfig, tau: SphericalConfig) -> Self {
        Self { rho, tau }
    }

    /// Splits a concatenated vector into `ρ ∈ ℝ^n`, `τ` and checks both
    /// norms against the standard radii.
    pub fn from_concat(x: &[f64], n: usize) -> Result<Self> {
        if n == 0 || n >= x.len() {
            return Err(invalid("n", "split point must leave both factors nonempty"));
        }
        Ok(Self {
            rho: SphericalConfig::on_standard_sphere(x[..n].to_vec())?,
            tau: SphericalConfig::on_standard_sphere(x[n..].to_vec())?,
        })
    }

    pub fn concat(&self) -> Vec<f64> {
        self.rho.coords.iter().chain(&self.tau.coords).copied().collect()
    }

    /// Radius of the concatenated point, `√(‖ρ‖² + ‖τ‖²)`.
    pub fn total_radius(&self) -> f64 {
        self.rho.radius.hypot(self.tau.radius)
    }
}

/// Overlaps of two product configurations: `r1 = ρ¹·ρ²/N`,
/// `r2 = τ¹·τ²/M`, `r = (N r1 + M r2)/(N+M)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapTriple {
    pub r1: f64,
    pub r2: f64,
    pub r: f64,
}

impl OverlapTriple {
    pub fn from_parts(r1: f64, r2: f64, n: usize, m: usize) -> Self {
        let total = (n + m) as f64;
        // equal parts give r = r1 exactly, not up to rounding
        let r = if r1 == r2 {
            r1
        } else {
            n as f64 / total * r1 + m as f64 / total * r2
        };
        Self { r1, r2, r }
    }
}

pub fn overlaps(pair1: &ProductConfig, pair2: &ProductConfig) -> Result<OverlapTriple> {
    let (n, m) = (pair1.rho.dim(), pair1.tau.dim());
    for (got, expected) in [(pair2.rho.dim(), n), (pair2.tau.dim(), m)] {
        if got != expected {
            return Err(Error::DimensionMismatch { expected, got });
        }
    }
    Ok(overlaps_concat(&pair1.concat(), &pair2.concat(), n))
}

/// [`overlaps`] on concatenated coordinates split at `n`.
pub fn overlaps_concat(a: &[f64], b: &[f64], n: usize) -> OverlapTriple {
    let m = a.len() - n;
    let r1 = dot(&a[..n], &b[..n]) / n as f64;
    let r2 = dot(&a[n..], &b[n..]) / m as f64;
    OverlapTriple::from_parts(r1, r2, n, m)
}

/// Overwrites `buf` with a uniform point of `S_{len}(radius)` (normalized
/// Gaussian vector).
pub fn fill_uniform_sphere<R: Rng + ?Sized>(buf: &mut [f64], radius: f64, rng: &mut R) {
    loop {
        let mut s = 0.0;
        for v in buf.iter_mut() {
            let g: f64 = StandardNormal.sample(rng);
            *v = g;
            s += g * g;
        }
        if s > 0.0 {
            if buf.len() == 1 {
                // exact ±radius
                buf[0] = radius.copysign(buf[0]);
                return;
            }
            let k = radius / s.sqrt();
            buf.iter_mut().for_each(|v| *v *= k);
            return;
        }
    }
}

/// Uniform sample on `S_N(radius)`.
pub fn uniform_sphere<R: Rng + ?Sized>(n: usize, radius: f64, rng: &mut R) -> Result<SphericalConfig> {
    if n == 0 {
        return Err(invalid("N", "dimension must be at least 1"));
    }
    if radius.is_nan() || radius <= 0.0 {
        return Err(Error::DomainError {
            what: "radius",
            value: radius,
            domain: "(0, inf)",
        });
    }
    let mut coords = vec![0.0; n];
    fill_uniform_sphere(&mut coords, radius, rng);
    Ok(SphericalConfig { coords, radius })
}

/// Uniform sample of `μ_N × μ_M` on `S_N × S_M`.
pub fn uniform_product<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Result<ProductConfig> {
    Ok(ProductConfig {
        rho: uniform_sphere(n, (n as f64).sqrt(), rng)?,
        tau: uniform_sphere(m, (m as f64).sqrt(), rng)?,
    })
}

/// `η(r) = √(N+M−r²)` for `0 ≤ r ≤ √(N+M)`.
pub fn eta_radius(n: usize, m: usize, r: f64) -> Result<f64> {
    let total = (n + m) as f64;
    if !(r >= 0.0 && r * r <= total * (1.0 + 1e-15)) {
        return Err(Error::DomainError {
            what: "r",
            value: r,
            domain: "[0, sqrt(N+M)]",
        });
    }
    Ok((total - r * r).max(0.0).sqrt())
}

/// Jacobian of `σ ↦ ‖τ‖` on `S_{N+M}` at `‖τ‖ = r`: `η(r)/√(N+M)`.
pub fn coarea_jacobian(n: usize, m: usize, r: f64) -> Result<f64> {
    Ok(eta_radius(n, m, r)? / ((n + m) as f64).sqrt())
}

/// `f_r(ρ, τ) = (η(r)/√N · ρ, r/√M · τ)`, mapping `S_N × S_M` onto
/// `S_N(η(r)) × S_M(r)` for `r ∈ (0, √(N+M))`.
pub fn scale_map_f_r(rho: &SphericalConfig, tau: &SphericalConfig, r: f64) -> Result<ProductConfig> {
    let (n, m) = (rho.dim(), tau.dim());
    for (c, d) in [(rho, n), (tau, m)] {
        let want = (d as f64).sqrt();
        if (c.radius - want).abs() > RADIUS_RTOL * want {
            return Err(invalid("configuration", "f_r acts on the standard spheres S_N x S_M"));
        }
    }
    let total = (n + m) as f64;
    if !(r > 0.0 && r < total.sqrt()) {
        return Err(Error::DomainError {
            what: "r",
            value: r,
            domain: "(0, sqrt(N+M))",
        });
    }
    let eta = eta_radius(n, m, r)?;
    let a = eta / (n as f64).sqrt();
    let b = r / (m as f64).sqrt();
    Ok(ProductConfig {
        rho: SphericalConfig {
            coords: rho.coords.iter().map(|x| a * x).collect(),
            radius: eta,
        },
        tau: SphericalConfig {
            coords: tau.coords.iter().map(|x| b * x).collect(),
            radius: r,
        },
    })
}

/// In-place [`scale_map_f_r`] on concatenated coordinates (no checks).
pub(crate) fn scale_map_concat(x: &[f64], n: usize, r: f64, out: &mut [f64]) {
    let m = x.len() - n;
    let eta = ((n + m) as f64 - r * r).max(0.0).sqrt();
    let a = eta / (n as f64).sqrt();
    let b = r / (m as f64).sqrt();
    for (i, (o, v)) in out.iter_mut().zip(x).enumerate() {
        *o = if i < n { a * v } else { b * v };
    }
}

/// `ln ν(S_d(√d))`, the (d−1)-dimensional Hausdorff measure of the standard
/// sphere (`S_1` is two points).
pub fn ln_standard_sphere_volume(d: usize) -> f64 {
    let df = d as f64;
    std::f64::consts::LN_2 + 0.5 * df * std::f64::consts::PI.ln() - ln_gamma(0.5 * df) + 0.5 * (df - 1.0) * df.ln()
}

/// Normalized measure `μ_{N+M}(‖τ‖ ∈ [lo, hi])` by two routes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandMeasure {
    /// From `‖τ‖²/(N+M) ~ Beta(M/2, N/2)`.
    pub exact: f64,
    /// From the one-dimensional coarea integral of the constant function.
    pub coarea_numeric: f64,
}

impl BandMeasure {
    pub fn relative_gap(&self) -> f64 {
        (self.exact - self.coarea_numeric).abs() / self.exact.abs().max(f64::MIN_POSITIVE)
    }
}

/// Exact band probability from the Beta law of `‖τ‖²/(N+M)`.
pub fn band_probability_exact(n: usize, m: usize, lo: f64, hi: f64) -> f64 {
    let total = (n + m) as f64;
    let cdf = |r: f64| {
        let u = (r * r / total).clamp(0.0, 1.0);
        beta_reg(0.5 * m as f64, 0.5 * n as f64, u)
    };
    cdf(hi) - cdf(lo)
}

/// Integrates `√(N+M)/η(r) · (η(r)/√N)^{N−1} (r/√M)^{M−1} ν_N(S_N) ν_M(S_M)`
/// over `[lo, hi]` and divides by `ν_{N+M}(S_{N+M})`. The integral is taken
/// in `θ` with `r = √(N+M) sin θ`, which absorbs the `1/η` endpoint
/// singularity; each term is assembled in log space.
pub fn band_probability_coarea(n: usize, m: usize, lo: f64, hi: f64) -> f64 {
    let total = (n + m) as f64;
    let big_r = total.sqrt();
    let ln_vol = ln_standard_sphere_volume(n) + ln_standard_sphere_volume(m) - ln_standard_sphere_volume(n + m);
    let (nf, mf) = (n as f64, m as f64);
    let pow_term = |exp: f64, base: f64, scale: f64| {
        if exp == 0.0 {
            0.0
        } else {
            exp * (base.ln() - 0.5 * scale.ln())
        }
    };
    let integrand = |theta: f64| {
        let r = big_r * theta.sin();
        let eta = big_r * theta.cos();
        // (√(N+M)/η) dr = √(N+M) dθ
        let ln_f = big_r.ln() + pow_term(nf - 1.0, eta, nf) + pow_term(mf - 1.0, r, mf) + ln_vol;
        ln_f.exp()
    };
    let to_theta = |r: f64| (r / big_r).clamp(0.0, 1.0).asin();
    adaptive_simpson(&integrand, to_theta(lo), to_theta(hi), 1e-10)
}

pub fn band_measure(n: usize, m: usize, lo: f64, hi: f64) -> Result<BandMeasure> {
    if n == 0 || m == 0 {
        return Err(invalid("N, M", "both dimensions must be at least 1"));
    }
    let top = ((n + m) as f64).sqrt();
    if !(lo >= 0.0 && lo <= hi && hi <= top * (1.0 + 1e-15)) {
        return Err(Error::DomainError {
            what: "band",
            value: if lo < 0.0 || lo > hi { lo } else { hi },
            domain: "0 <= lo <= hi <= sqrt(N+M)",
        });
    }
    let hi = hi.min(top);
    Ok(BandMeasure {
        exact: band_probability_exact(n, m, lo, hi),
        coarea_numeric: band_probability_coarea(n, m, lo, hi),
    })
}

/// The band `I = [√M − a, √M + a]` clipped to `[0, √(N+M)]`.
pub fn default_band(n: usize, m: usize, a: f64) -> (f64, f64) {
    let c = (m as f64).sqrt();
    ((c - a).max(0.0), (c + a).min(((n + m) as f64).sqrt()))
}

/// `N → ∞` limit of `μ_{N+M}(‖τ‖ ∈ [√M − a, √M + a])`:
/// `P(‖W_M‖² − M − a² ∈ [−2a√M, 2a√M])` for a standard Gaussian `W_M`.
pub fn band_fraction_limit(m: usize, a: f64) -> f64 {
    let chi = ChiSquared::new(m as f64).expect("m >= 1");
    let c = (m as f64).sqrt();
    let lo = (c - a).max(0.0);
    chi.cdf((c + a).powi(2)) - chi.cdf(lo * lo)
}

/// Large-`M` limit of [`band_fraction_limit`] under the CLT
/// `(‖W_M‖² − M)/√(2M) → N(0, 1)`: `P(|Z| ≤ √2 a)`.
pub fn clt_band_limit(a: f64) -> f64 {
    2.0 * standard_normal_cdf(std::f64::consts::SQRT_2 * a) - 1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoincareCheck {
    pub ks_statistic: f64,
    pub threshold: f64,
}

impl PoincareCheck {
    pub fn passes(&self) -> bool {
        self.ks_statistic < self.threshold
    }
}

/// Draws `k` uniform points of `S_{N+M}`, projects each to its last `M`
/// coordinates, and compares the functional `Σ τ_i / √M` with the standard
/// normal by a KS test. The threshold is the asymptotic 1% critical value.
pub fn poincare_check(n: usize, m: usize, k: usize, seed: u64) -> Result<PoincareCheck> {
    if k < 1000 {
        return Err(invalid("K", "need at least 1000 samples"));
    }
    if n == 0 || m == 0 {
        return Err(invalid("N, M", "both dimensions must be at least 1"));
    }
    const CHUNK: usize = 256;
    let total = n + m;
    let radius = (total as f64).sqrt();
    let samples: Vec<f64> = (0..k.div_ceil(CHUNK))
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut s = rng::child(seed, "poincare", c as u64);
            let count = CHUNK.min(k - c * CHUNK);
            let mut buf = vec![0.0; total];
            (0..count)
                .map(|_| {
                    fill_uniform_sphere(&mut buf, radius, &mut s);
                    buf[n..].iter().sum::<f64>() / (m as f64).sqrt()
                })
                .collect::<Vec<_>>()
        })
        .collect();
    Ok(PoincareCheck {
        ks_statistic: ks_statistic(&samples, standard_normal_cdf),
        threshold: ks_critical_value(k, 0.01),
    })
}
