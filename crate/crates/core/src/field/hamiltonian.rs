use std::sync::Arc;

use nalgebra::DMatrix;

use super::contract::{contract, placements_sum, Slot};
use super::{CompiledField, CouplingTensors, Energy};
use crate::error::{invalid, Error, Result};
use crate::mixture::{Mixture, PerturbationParams};

#[derive(Debug, Clone)]
struct Term {
    couplings: Arc<CouplingTensors>,
    p: usize,
    weight: f64,
}

/// `H(σ) = Σ_terms w · ⟨J_p, σ^{⊗p}⟩` on `ℝ^N`.
///
/// Defined on all of `ℝ^N`, so evaluation inside the ball (needed for the
/// Lipschitz and Taylor estimates) is as valid as on the sphere.
#[derive(Debug, Clone)]
pub struct Hamiltonian {
    n: usize,
    terms: Vec<Term>,
}

impl Hamiltonian {
    pub fn zero(n: usize) -> Self {
        Self { n, terms: vec![] }
    }

    /// `H_N(σ) = Σ_p γ_p N^{-(p-1)/2} Σ J_{i1..ip} σ_{i1}⋯σ_{ip}`.
    pub fn mixed(couplings: Arc<CouplingTensors>, mixture: &Mixture) -> Result<Self> {
        let n = couplings.n();
        let nf = n as f64;
        let mut terms = Vec::new();
        for p in mixture.active_degrees() {
            if couplings.get(p).is_none() {
                return Err(invalid("couplings", format!("missing tensor for degree {p}")));
            }
            terms.push(Term {
                couplings: couplings.clone(),
                p,
                weight: mixture.gamma(p) * nf.powf(-((p - 1) as f64) / 2.0),
            });
        }
        Ok(Self { n, terms })
    }

    /// `s_N g_N^x(σ)` with `g_N^x = Σ_p 2^{-p} x_p g_{N,p}` and
    /// `g_{N,p} = N^{-1/2} H_{N,p}` realized on the given (independent)
    /// couplings, so each term has weight `s_N 2^{-p} x_p N^{-p/2}`.
    pub fn perturbation(couplings: Arc<CouplingTensors>, params: &PerturbationParams) -> Result<Self> {
        let n = couplings.n();
        let nf = n as f64;
        let s = params.s(n);
        let mut terms = Vec::new();
        for (i, &xp) in params.x().iter().enumerate() {
            let p = i + 1;
            if couplings.get(p).is_none() {
                return Err(invalid(
                    "couplings",
                    format!("missing perturbation tensor for degree {p}"),
                ));
            }
            terms.push(Term {
                couplings: couplings.clone(),
                p,
                weight: s * 0.5f64.powi(p as i32) * xp * nf.powf(-(p as f64) / 2.0),
            });
        }
        Ok(Self { n, terms })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn plus(mut self, other: &Hamiltonian) -> Result<Self> {
        if other.n != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: other.n,
            });
        }
        self.terms.extend(other.terms.iter().cloned());
        Ok(self)
    }

    pub fn scaled(mut self, factor: f64) -> Self {
        for t in &mut self.terms {
            t.weight *= factor;
        }
        self
    }

    /// `(p, weight, tensor)` for every term.
    pub(crate) fn terms(&self) -> impl Iterator<Item = (usize, f64, &[f64])> + '_ {
        self.terms.iter().map(|t| (t.p, t.weight, self.tensor(t)))
    }

    /// Value-only evaluator for hot loops.
    pub fn compile(&self) -> CompiledField {
        CompiledField::build(self)
    }

    fn check_dim(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: v.len(),
            });
        }
        Ok(())
    }

    fn tensor<'a>(&self, term: &'a Term) -> &'a [f64] {
        term.couplings.get(term.p).expect("checked at construction")
    }

    /// Value at `σ` without a dimension check.
    pub fn value(&self, sigma: &[f64]) -> f64 {
        debug_assert_eq!(sigma.len(), self.n);
        self.terms
            .iter()
            .map(|t| {
                let slots = vec![Slot::Vec(sigma); t.p];
                t.weight * contract(self.tensor(t), self.n, &slots)[0]
            })
            .sum()
    }

    pub fn evaluate(&self, sigma: &[f64]) -> Result<f64> {
        self.check_dim(sigma)?;
        Ok(self.value(sigma))
    }

    fn accumulate(&self, sigma: &[f64], specials: &[Slot]) -> Vec<f64> {
        let len = if specials.iter().any(|s| matches!(s, Slot::Free)) {
            self.n
        } else {
            1
        };
        let mut acc = vec![0.0; len];
        for t in &self.terms {
            let v = placements_sum(self.tensor(t), self.n, t.p, sigma, specials);
            for (a, b) in acc.iter_mut().zip(v) {
                *a += t.weight * b;
            }
        }
        acc
    }

    /// Euclidean gradient `∇H(σ)`.
    pub fn gradient(&self, sigma: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(sigma)?;
        Ok(self.accumulate(sigma, &[Slot::Free]))
    }

    /// `d·∇H(σ)` for an arbitrary direction `d`.
    pub fn directional_derivative(&self, sigma: &[f64], d: &[f64]) -> Result<f64> {
        self.check_dim(sigma)?;
        self.check_dim(d)?;
        Ok(self.accumulate(sigma, &[Slot::Vec(d)])[0])
    }

    /// `uᵀ ∇²H(σ) u` for a unit vector `u`.
    pub fn directional_second(&self, sigma: &[f64], u: &[f64]) -> Result<f64> {
        self.check_dim(sigma)?;
        self.check_dim(u)?;
        let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(invalid(
                "u",
                format!("direction must be a unit vector, has norm {norm}"),
            ));
        }
        Ok(self.accumulate(sigma, &[Slot::Vec(u), Slot::Vec(u)])[0])
    }

    /// Hessian-vector product `∇²H(σ) u`.
    pub fn hessian_vector(&self, sigma: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(sigma)?;
        self.check_dim(u)?;
        Ok(self.accumulate(sigma, &[Slot::Free, Slot::Vec(u)]))
    }

    /// `∇_σ (uᵀ ∇²H(σ) u)`.
    pub fn curvature_gradient(&self, sigma: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(sigma)?;
        self.check_dim(u)?;
        Ok(self.accumulate(sigma, &[Slot::Free, Slot::Vec(u), Slot::Vec(u)]))
    }

    /// Full Hessian, assembled column by column.
    pub fn hessian(&self, sigma: &[f64]) -> Result<DMatrix<f64>> {
        self.check_dim(sigma)?;
        let mut h = DMatrix::zeros(self.n, self.n);
        let mut e = vec![0.0; self.n];
        for j in 0..self.n {
            e[j] = 1.0;
            let col = self.accumulate(sigma, &[Slot::Free, Slot::Vec(&e)]);
            for (i, v) in col.into_iter().enumerate() {
                h[(i, j)] = v;
            }
            e[j] = 0.0;
        }
        // symmetrize away rounding differences
        Ok((&h + h.transpose()) * 0.5)
    }
}

impl Energy for Hamiltonian {
    fn dim(&self) -> usize {
        self.n
    }
    fn energy(&self, x: &[f64]) -> f64 {
        self.value(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::MemoryBudget;
    use crate::rng;
    use crate::sphere::uniform_sphere;
    use approx::assert_relative_eq;

    fn sampled(n: usize, m: &Mixture, seed: u64) -> Hamiltonian {
        let j = CouplingTensors::sample(n, &m.active_degrees(), seed, MemoryBudget::default()).unwrap();
        Hamiltonian::mixed(Arc::new(j), m).unwrap()
    }

    #[test]
    fn scalar_pure_two_spin() {
        let m = Mixture::new(&[0.0, 0.7]).unwrap();
        let j = CouplingTensors::from_entries(1, 0, vec![(2, vec![1.3])]).unwrap();
        let h = Hamiltonian::mixed(Arc::new(j), &m).unwrap();
        assert_relative_eq!(h.evaluate(&[1.0]).unwrap(), 0.7 * 1.3, epsilon = 1e-15);
        let s = -0.4;
        assert_relative_eq!(h.gradient(&[s]).unwrap()[0], 2.0 * 0.7 * 1.3 * s, epsilon = 1e-15);
        assert_relative_eq!(
            h.directional_second(&[s], &[1.0]).unwrap(),
            2.0 * 0.7 * 1.3,
            epsilon = 1e-15
        );
    }

    #[test]
    fn hand_expansion_two_by_two() {
        let j = CouplingTensors::from_entries(2, 0, vec![(2, vec![0.5, -1.0, 2.0, 0.25])]).unwrap();
        let h = Hamiltonian::mixed(Arc::new(j), &Mixture::pure(2)).unwrap();
        let expected = 2f64.powf(-0.5) * (0.5 - 1.0 + 2.0 + 0.25);
        assert_relative_eq!(h.evaluate(&[1.0, 1.0]).unwrap(), expected, epsilon = 1e-15);
    }

    #[test]
    fn zero_point_and_dimension_errors() {
        let h = sampled(4, &Mixture::new(&[0.0, 1.0, 1.0]).unwrap(), 5);
        assert_eq!(h.evaluate(&[0.0; 4]).unwrap(), 0.0);
        assert!(matches!(
            h.evaluate(&[1.0; 3]),
            Err(Error::DimensionMismatch { expected: 4, got: 3 })
        ));
        assert!(h.directional_second(&[0.0; 4], &[1.0, 1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn pure_one_spin_has_no_curvature() {
        let h = sampled(5, &Mixture::pure(1), 2);
        let sigma = [0.3, -0.2, 1.0, 0.5, 0.0];
        let u = [0.6, 0.8, 0.0, 0.0, 0.0];
        assert_eq!(h.directional_second(&sigma, &u).unwrap(), 0.0);
    }

    #[test]
    fn homogeneity_of_pure_fields() {
        for p in 1..=4 {
            let h = sampled(4, &Mixture::pure(p), 17 + p as u64);
            let sigma = [0.4, -1.1, 0.7, 0.2];
            let lam = 1.7;
            let scaled: Vec<f64> = sigma.iter().map(|x| x * lam).collect();
            assert_relative_eq!(
                h.value(&scaled),
                lam.powi(p as i32) * h.value(&sigma),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn gradient_and_hessian_match_finite_differences() {
        let m = Mixture::new(&[0.5, 1.0, 0.8, 0.3]).unwrap();
        let n = 6;
        let h = sampled(n, &m, 41);
        let mut s = rng::stream(3);
        for _ in 0..10 {
            // interior point of the ball
            let sigma: Vec<f64> = uniform_sphere(n, 0.8 * (n as f64).sqrt(), &mut s)
                .unwrap()
                .coords()
                .to_vec();
            let g = h.gradient(&sigma).unwrap();
            let step = 1e-4 * (n as f64).sqrt();
            let gnorm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
            for i in 0..n {
                let mut a = sigma.clone();
                let mut b = sigma.clone();
                a[i] += step;
                b[i] -= step;
                let fd = (h.value(&a) - h.value(&b)) / (2.0 * step);
                assert!((fd - g[i]).abs() <= 1e-5 * gnorm, "component {i}: {fd} vs {}", g[i]);
            }
            let hess = h.hessian(&sigma).unwrap();
            let u: Vec<f64> = uniform_sphere(n, 1.0, &mut s).unwrap().coords().to_vec();
            let quad = h.directional_second(&sigma, &u).unwrap();
            let uh = nalgebra::DVector::from_vec(u.clone());
            assert_relative_eq!(
                quad,
                (uh.transpose() * &hess * &uh)[0],
                max_relative = 1e-10,
                epsilon = 1e-12
            );
            let plus: Vec<f64> = sigma.iter().zip(&u).map(|(x, d)| x + step * d).collect();
            let minus: Vec<f64> = sigma.iter().zip(&u).map(|(x, d)| x - step * d).collect();
            let fd2 = (h.value(&plus) - 2.0 * h.value(&sigma) + h.value(&minus)) / (step * step);
            assert!((fd2 - quad).abs() <= 1e-4 * (1.0 + quad.abs()), "{fd2} vs {quad}");
            // curvature gradient by central differences of uᵀ∇²H u
            let cg = h.curvature_gradient(&sigma, &u).unwrap();
            for i in 0..n {
                let mut a = sigma.clone();
                let mut b = sigma.clone();
                a[i] += step;
                b[i] -= step;
                let fd = (h.directional_second(&a, &u).unwrap() - h.directional_second(&b, &u).unwrap()) / (2.0 * step);
                assert!((fd - cg[i]).abs() <= 1e-5 * (1.0 + cg[i].abs()));
            }
        }
    }

    #[test]
    fn perturbation_weights() {
        // N = 1, p_max = 1, x_1 = 1: s_1 g = (1/2) J' σ
        let j = CouplingTensors::from_entries(1, 0, vec![(1, vec![0.8])]).unwrap();
        let params = PerturbationParams::new(vec![1.0], 0.375).unwrap();
        let g = Hamiltonian::perturbation(Arc::new(j), &params).unwrap();
        assert_relative_eq!(g.value(&[1.0]), 0.5 * 0.8, epsilon = 1e-15);
        assert_relative_eq!(g.value(&[-1.0]), -0.4, epsilon = 1e-15);
    }
}
