//! The mixture polynomial `ξ(t) = Σ_p γ_p² t^p` and the perturbation
//! parameters `x_p ∈ [1, 2]`, `s_N = N^c`.
//!
//! The infinite mixture is truncated at `p_max`; the summability condition on
//! the tail becomes vacuous under truncation and is not modeled.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Default truncation degree for config-driven runs.
pub const DEFAULT_P_MAX: usize = 4;
/// Default perturbation exponent, the midpoint of `(1/4, 1/2)`.
pub const DEFAULT_C: f64 = 0.375;
/// Number of equispaced points used to decide convexity on `[-1, 1]`.
pub const CONVEXITY_GRID: usize = 10_001;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Mixture {
    /// `gammas[p - 1] = γ_p`.
    gammas: Vec<f64>,
}

impl TryFrom<Vec<f64>> for Mixture {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Mixture::new(&v)
    }
}

impl From<Mixture> for Vec<f64> {
    fn from(m: Mixture) -> Self {
        m.gammas
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvexityReport {
    pub even: bool,
    pub convex_on_unit: bool,
    pub convex_on_symmetric: bool,
}

impl Mixture {
    /// Validates `γ_1, …, γ_{p_max}`.
    pub fn new(coeffs: &[f64]) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(invalid("mixture", "coefficient list is empty"));
        }
        for (i, &g) in coeffs.iter().enumerate() {
            if !g.is_finite() {
                return Err(invalid("mixture", format!("gamma_{} is not finite", i + 1)));
            }
            if g < 0.0 {
                return Err(Error::NegativeCoefficient { p: i + 1, value: g });
            }
        }
        if coeffs.iter().all(|&g| g == 0.0) {
            return Err(Error::AllZero);
        }
        Ok(Self {
            gammas: coeffs.to_vec(),
        })
    }

    /// Same as [`Mixture::new`] but zero-padded to `p_max` terms.
    pub fn with_p_max(coeffs: &[f64], p_max: usize) -> Result<Self> {
        if p_max < coeffs.len() {
            let tail_nonzero = coeffs[p_max..].iter().any(|&g| g != 0.0);
            if tail_nonzero {
                return Err(invalid("p_max", format!("{p_max} truncates nonzero coefficients")));
            }
        }
        let mut padded = coeffs[..coeffs.len().min(p_max)].to_vec();
        padded.resize(p_max, 0.0);
        Self::new(&padded)
    }

    /// Pure p-spin mixture `ξ(t) = t^p`.
    pub fn pure(p: usize) -> Self {
        assert!(p >= 1);
        let mut gammas = vec![0.0; p];
        gammas[p - 1] = 1.0;
        Self { gammas }
    }

    pub fn p_max(&self) -> usize {
        self.gammas.len()
    }

    pub fn gamma(&self, p: usize) -> f64 {
        if p == 0 || p > self.gammas.len() {
            0.0
        } else {
            self.gammas[p - 1]
        }
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    /// Degrees with `γ_p > 0`.
    pub fn active_degrees(&self) -> Vec<usize> {
        (1..=self.p_max()).filter(|&p| self.gamma(p) > 0.0).collect()
    }

    /// `d^k ξ / dt^k` at `t`, with no domain check.
    pub fn eval_deriv(&self, t: f64, k: usize) -> f64 {
        // Σ_{p ≥ k} γ_p² p!/(p-k)! t^{p-k}, Horner from the top degree
        let mut acc = 0.0;
        for p in (k.max(1)..=self.p_max()).rev() {
            let g = self.gamma(p);
            let falling: f64 = (0..k).map(|j| (p - j) as f64).product();
            acc = acc * t + g * g * falling;
        }
        // the lowest power reached is t^{max(k,1)-k}
        if k == 0 {
            acc * t
        } else {
            acc
        }
    }

    pub fn xi(&self, t: f64) -> f64 {
        self.eval_deriv(t, 0)
    }

    pub fn xi_prime(&self, t: f64) -> f64 {
        self.eval_deriv(t, 1)
    }

    pub fn xi_second(&self, t: f64) -> f64 {
        self.eval_deriv(t, 2)
    }

    /// `d^k ξ / dt^k` at `t ∈ [-1, 1]`.
    pub fn xi_deriv(&self, t: f64, k: usize) -> Result<f64> {
        if !(-1.0..=1.0).contains(&t) {
            return Err(Error::DomainError {
                what: "t",
                value: t,
                domain: "[-1, 1]",
            });
        }
        if k > 2 {
            return Err(invalid("k", format!("derivative order {k} not in {{0, 1, 2}}")));
        }
        Ok(self.eval_deriv(t, k))
    }

    pub fn is_even(&self) -> bool {
        (1..=self.p_max()).step_by(2).all(|p| self.gamma(p) == 0.0)
    }

    /// Evenness and convexity of `ξ`. Convexity on `[-1, 1]` is decided by
    /// scanning `ξ''` on [`CONVEXITY_GRID`] equispaced points.
    pub fn convexity_report(&self) -> ConvexityReport {
        let tol = 1e-12 * self.xi_second(1.0).max(1.0);
        let convex_on_symmetric = (0..CONVEXITY_GRID).all(|i| {
            let t = -1.0 + 2.0 * i as f64 / (CONVEXITY_GRID - 1) as f64;
            self.xi_second(t) >= -tol
        });
        ConvexityReport {
            even: self.is_even(),
            // nonnegative coefficients: ξ'' ≥ 0 on [0, 1]
            convex_on_unit: true,
            convex_on_symmetric,
        }
    }
}

/// Perturbation parameters `x_p ∈ [1, 2]` (p = 1..p_max) and exponent
/// `c ∈ (1/4, 1/2)` with `s_N = N^c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationParams {
    x: Vec<f64>,
    c: f64,
    /// Replaces `s_N` by a fixed value for every `N`; only for degenerate
    /// test configurations (e.g. `Some(0.0)` switches the perturbation off).
    strength_override: Option<f64>,
}

impl PerturbationParams {
    pub fn new(x: Vec<f64>, c: f64) -> Result<Self> {
        if x.is_empty() {
            return Err(invalid("x", "perturbation needs at least one degree"));
        }
        if let Some((i, &v)) = x.iter().enumerate().find(|(_, v)| !(1.0..=2.0).contains(*v)) {
            return Err(Error::DomainError {
                what: if i == 0 { "x_1" } else { "x_p" },
                value: v,
                domain: "[1, 2]",
            });
        }
        check_c(c)?;
        Ok(Self {
            x,
            c,
            strength_override: None,
        })
    }

    /// Draws `x_p ~ Uniform[1, 2]` for `p = 1..=p_max`.
    pub fn sample<R: Rng + ?Sized>(p_max: usize, c: f64, rng: &mut R) -> Result<Self> {
        let x = (0..p_max).map(|_| rng.random_range(1.0..=2.0)).collect();
        Self::new(x, c)
    }

    pub fn with_strength_override(mut self, s: f64) -> Self {
        self.strength_override = Some(s);
        self
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn p_max(&self) -> usize {
        self.x.len()
    }

    /// `s_N = N^c`.
    pub fn s(&self, n: usize) -> f64 {
        self.strength_override.unwrap_or_else(|| (n as f64).powf(self.c))
    }

    /// `η_N^x(t) = s_N² Σ_p 4^{-p} x_p² t^p`, so that the covariance of the
    /// perturbed Hamiltonian is `N ξ(R) + η_N^x(R)`.
    pub fn eta(&self, n: usize, t: f64) -> Result<f64> {
        if n == 0 {
            return Err(invalid("N", "dimension must be at least 1"));
        }
        if !(-1.0..=1.0).contains(&t) {
            return Err(Error::DomainError {
                what: "t",
                value: t,
                domain: "[-1, 1]",
            });
        }
        Ok(self.eta_unchecked(n, t))
    }

    pub(crate) fn eta_unchecked(&self, n: usize, t: f64) -> f64 {
        let s = self.s(n);
        let mut acc = 0.0;
        let mut tp = 1.0;
        let mut four = 1.0;
        for &xp in &self.x {
            tp *= t;
            four *= 0.25;
            acc += four * xp * xp * tp;
        }
        s * s * acc
    }
}

pub(crate) fn check_c(c: f64) -> Result<()> {
    if !(c > 0.25 && c < 0.5) {
        return Err(Error::DomainError {
            what: "c",
            value: c,
            domain: "(1/4, 1/2)",
        });
    }
    Ok(())
}

/// `E_x η_N^x(1) = s_N² (7/3) Σ_{p ≤ p_max} 4^{-p}` for `x_p ~ Uniform[1, 2]`.
pub fn expected_eta_at_one(n: usize, c: f64, p_max: usize) -> f64 {
    let s2 = (n as f64).powf(2.0 * c);
    let geo: f64 = (1..=p_max).map(|p| 0.25f64.powi(p as i32)).sum();
    s2 * 7.0 / 3.0 * geo
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn validation() {
        let m = Mixture::new(&[0.0, 1.0]).unwrap();
        assert_eq!(m.xi(0.5), 0.25);
        assert!(matches!(
            Mixture::new(&[0.0, -1.0]),
            Err(Error::NegativeCoefficient { p: 2, .. })
        ));
        assert!(matches!(Mixture::new(&[0.0, 0.0]), Err(Error::AllZero)));
        assert!(Mixture::new(&[]).is_err());
        let cubic = Mixture::new(&[1.0, 1.0, 1.0]).unwrap();
        for &t in &[-1.0, -0.3, 0.0, 0.7, 1.0] {
            assert_relative_eq!(cubic.xi(t), t + t * t + t * t * t, epsilon = 1e-15);
        }
    }

    #[test]
    fn derivatives() {
        let two = Mixture::pure(2);
        assert_eq!(two.xi_deriv(0.5, 0).unwrap(), 0.25);
        assert_eq!(two.xi_deriv(1.0, 2).unwrap(), 2.0);
        let m = Mixture::new(&[1.0, 1.0]).unwrap();
        assert_eq!(m.xi_deriv(1.0, 1).unwrap(), 3.0);
        assert!(matches!(m.xi_deriv(1.5, 0), Err(Error::DomainError { .. })));
        assert!(m.xi_deriv(0.5, 3).is_err());
        // gaps in the coefficient list
        let gap = Mixture::new(&[0.5, 0.0, 0.0, 2.0]).unwrap();
        let t: f64 = 0.6;
        assert_relative_eq!(gap.xi(t), 0.25 * t + 4.0 * t.powi(4), epsilon = 1e-15);
        assert_relative_eq!(gap.xi_prime(t), 0.25 + 16.0 * t.powi(3), epsilon = 1e-14);
        assert_relative_eq!(gap.xi_second(t), 48.0 * t * t, epsilon = 1e-14);
    }

    #[test]
    fn with_p_max_pads_and_rejects_truncation() {
        let m = Mixture::with_p_max(&[0.0, 1.0], 4).unwrap();
        assert_eq!(m.p_max(), 4);
        assert_eq!(m.active_degrees(), vec![2]);
        assert!(Mixture::with_p_max(&[0.0, 0.0, 1.0], 2).is_err());
    }

    #[test]
    fn convexity_reports() {
        let r = Mixture::pure(2).convexity_report();
        assert_eq!(
            r,
            ConvexityReport {
                even: true,
                convex_on_unit: true,
                convex_on_symmetric: true
            }
        );
        let r = Mixture::pure(3).convexity_report();
        assert!(!r.even && r.convex_on_unit && !r.convex_on_symmetric);
        let r = Mixture::new(&[1.0, 0.0]).unwrap().convexity_report();
        assert!(!r.even && r.convex_on_unit && r.convex_on_symmetric);
    }

    #[test]
    fn eta_examples() {
        let p = PerturbationParams::new(vec![1.0, 1.0], 0.375).unwrap();
        assert_relative_eq!(p.eta(1, 1.0).unwrap(), 0.3125, epsilon = 1e-15);
        assert_eq!(p.eta(7, 0.0).unwrap(), 0.0);
        let q = PerturbationParams::new(vec![2.0, 2.0], 0.3).unwrap();
        let s = 16f64.powf(0.3);
        // independent evaluation of the two-term sum
        let expected = s * s * (4.0 * 0.25 + 4.0 * 0.0625);
        assert_relative_eq!(q.eta(16, 1.0).unwrap(), expected, epsilon = 1e-13);
    }

    #[test]
    fn perturbation_validation() {
        assert!(PerturbationParams::new(vec![0.5], 0.375).is_err());
        assert!(PerturbationParams::new(vec![1.5], 0.25).is_err());
        assert!(PerturbationParams::new(vec![1.5], 0.5).is_err());
        let p = PerturbationParams::new(vec![1.5], 0.375).unwrap();
        assert!(p.s(1) > 0.0 && p.s(1000) > 0.0);
        assert_eq!(p.clone().with_strength_override(0.0).s(50), 0.0);
    }

    proptest! {
        #[test]
        fn xi_nonnegative_nondecreasing_convex_on_unit(
            gs in prop::collection::vec(0.0f64..2.0, 1..6),
            a in 0.0f64..1.0, b in 0.0f64..1.0,
        ) {
            prop_assume!(gs.iter().any(|&g| g > 0.0));
            let m = Mixture::new(&gs).unwrap();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(m.xi(lo) >= 0.0);
            prop_assert!(m.xi(hi) >= m.xi(lo) - 1e-14);
            prop_assert!(m.xi_second(lo) >= 0.0);
        }

        #[test]
        fn xi_prime_matches_central_differences(
            gs in prop::collection::vec(0.0f64..2.0, 1..6),
            t in -0.99f64..0.99,
        ) {
            prop_assume!(gs.iter().any(|&g| g > 0.0));
            let m = Mixture::new(&gs).unwrap();
            let h = 1e-5;
            let fd = (m.xi(t + h) - m.xi(t - h)) / (2.0 * h);
            prop_assert!((fd - m.xi_prime(t)).abs() <= 1e-8 * (1.0 + m.xi_prime(1.0)));
            let fd2 = (m.xi_prime(t + h) - m.xi_prime(t - h)) / (2.0 * h);
            prop_assert!((fd2 - m.xi_second(t)).abs() <= 1e-7 * (1.0 + m.xi_second(1.0)));
        }
    }
}
