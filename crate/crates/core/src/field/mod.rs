//! Disorder sampling and evaluation of the Gaussian Hamiltonians.
//!
//! * [`CouplingTensors`]: i.i.d. standard normal `J_{i1..ip}` per degree,
//!   stored densely and unsymmetrized (all ordered index tuples).
//! * [`Hamiltonian`]: a weighted sum of multilinear forms
//!   `Σ w_p ⟨J_p, σ^{⊗p}⟩`; the mixed Hamiltonian uses
//!   `w_p = γ_p N^{-(p-1)/2}` and the perturbation `s_N g_N^x` uses
//!   `w_p = s_N 2^{-p} x_p N^{-p/2}` on independent couplings.
//! * [`FieldBundle`]: the joint disorder of the product-space experiments.

mod bundle;
mod compiled;
mod contract;
mod couplings;
mod hamiltonian;

pub use bundle::{DecoupledEnergy, DisorderSpec, FieldBundle, SingleSphereDisorder};
pub use compiled::CompiledField;
pub use couplings::{CouplingTensors, MemoryBudget, MEM_BUDGET_ENV};
pub use hamiltonian::Hamiltonian;

use crate::error::{Error, Result};
use crate::mixture::Mixture;
use crate::rng;
use crate::stats::MeanEstimate;

/// A real function on a fixed-dimensional domain, evaluated at concatenated
/// coordinates.
pub trait Energy: Sync {
    fn dim(&self) -> usize;
    fn energy(&self, x: &[f64]) -> f64;
}

impl<E: Energy + ?Sized> Energy for &E {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn energy(&self, x: &[f64]) -> f64 {
        (**self).energy(x)
    }
}

/// Empirical versus theoretical covariance `E H(σ)H(σ') = N ξ(R)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceCheck {
    pub empirical: f64,
    pub theory: f64,
    pub stderr: f64,
}

impl CovarianceCheck {
    pub fn z_score(&self) -> f64 {
        (self.empirical - self.theory) / self.stderr
    }
}

/// Estimates `E H_N(σ)H_N(σ')` over `k` independent disorder draws for
/// several pairs at once. The field is centered, so the estimator is the
/// mean of the products.
pub fn covariance_check_pairs(
    n: usize,
    mixture: &Mixture,
    pairs: &[(Vec<f64>, Vec<f64>)],
    k: usize,
    seed: u64,
) -> Result<Vec<CovarianceCheck>> {
    use rayon::prelude::*;
    if k < 100 {
        return Err(crate::error::invalid("K", "need at least 100 disorder draws"));
    }
    for (a, b) in pairs {
        for v in [a, b] {
            if v.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: v.len(),
                });
            }
        }
    }
    let budget = MemoryBudget::default();
    let degrees = mixture.active_degrees();
    let products: Vec<Vec<f64>> = (0..k as u64)
        .into_par_iter()
        .map(|d| {
            let j = CouplingTensors::sample(n, &degrees, rng::derive_seed(seed, "cov", d), budget)?;
            let h = Hamiltonian::mixed(std::sync::Arc::new(j), mixture)?;
            Ok(pairs.iter().map(|(a, b)| h.value(a) * h.value(b)).collect())
        })
        .collect::<Result<_>>()?;
    Ok(pairs
        .iter()
        .enumerate()
        .map(|(i, (a, b))| {
            let col: Vec<f64> = products.iter().map(|row| row[i]).collect();
            let est = MeanEstimate::from_samples(&col);
            let r = a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / n as f64;
            CovarianceCheck {
                empirical: est.mean,
                theory: n as f64 * mixture.xi(r),
                stderr: est.stderr,
            }
        })
        .collect())
}

/// Single-pair form of [`covariance_check_pairs`].
pub fn covariance_check(
    n: usize,
    mixture: &Mixture,
    sigma: &[f64],
    sigma_prime: &[f64],
    k: usize,
    seed: u64,
) -> Result<CovarianceCheck> {
    let pairs = [(sigma.to_vec(), sigma_prime.to_vec())];
    Ok(covariance_check_pairs(n, mixture, &pairs, k, seed)?[0])
}
