use std::sync::Arc;

use super::couplings::tensor_bytes;
use super::{CompiledField, CouplingTensors, Energy, Hamiltonian, MemoryBudget};
use crate::error::{Error, Result};
use crate::mixture::{check_c, Mixture, PerturbationParams};
use crate::rng;

/// What to sample for one disorder realization.
#[derive(Debug, Clone, PartialEq)]
pub struct DisorderSpec {
    pub n: usize,
    pub m: usize,
    pub mixture: Mixture,
    /// `Some(c)` adds the perturbation with `s_N = N^c`; `None` leaves the
    /// Hamiltonians unperturbed.
    pub c: Option<f64>,
    /// Replace every coupling by zero (degenerate-field checks).
    pub zero_field: bool,
    pub budget: MemoryBudget,
}

impl DisorderSpec {
    pub fn new(n: usize, m: usize, mixture: Mixture, c: Option<f64>) -> Self {
        Self {
            n,
            m,
            mixture,
            c,
            zero_field: false,
            budget: MemoryBudget::default(),
        }
    }

    pub fn zeroed(mut self) -> Self {
        self.zero_field = true;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 {
            return Err(crate::error::invalid("N, M", "both dimensions must be at least 1"));
        }
        if let Some(c) = self.c {
            check_c(c)?;
        }
        let active = self.mixture.active_degrees();
        let pert: Vec<usize> = (1..=self.mixture.p_max()).collect();
        let mut required = tensor_bytes(self.n + self.m, &active)
            .saturating_add(tensor_bytes(self.n, &active))
            .saturating_add(tensor_bytes(self.m, &active));
        if self.c.is_some() {
            required = required
                .saturating_add(tensor_bytes(self.n + self.m, &pert))
                .saturating_add(tensor_bytes(self.n, &pert))
                .saturating_add(tensor_bytes(self.m, &pert));
        }
        if required > self.budget.bytes {
            return Err(Error::ResourceLimit {
                required,
                budget: self.budget.bytes,
            });
        }
        Ok(())
    }
}

/// The joint disorder of the product-space experiments: `H_{N+M}`, `H_N`,
/// `H_M`, the perturbation fields `g_N^x`, `g_M^y`, `g_{N+M}^x`, and the
/// uniform variables `x`, `y`. Every component is drawn from its own child
/// stream, so the components are mutually independent.
///
/// `g_{N+M}^x` shares `x` with `g_N^x`; it enters only through
/// `H̄_{N+M} = H_{N+M} + s_{N+M} g_{N+M}^x`.
#[derive(Debug, Clone)]
pub struct FieldBundle {
    n: usize,
    m: usize,
    mixture: Mixture,
    main: Arc<CouplingTensors>,
    sub_n: Arc<CouplingTensors>,
    sub_m: Arc<CouplingTensors>,
    pert: Option<Perturbations>,
}

#[derive(Debug, Clone)]
struct Perturbations {
    x: PerturbationParams,
    y: PerturbationParams,
    pert_n: Arc<CouplingTensors>,
    pert_m: Arc<CouplingTensors>,
    pert_total: Arc<CouplingTensors>,
}

fn draw(n: usize, degrees: &[usize], seed: u64, label: &str, spec: &DisorderSpec) -> Result<Arc<CouplingTensors>> {
    let t = if spec.zero_field {
        CouplingTensors::zeros(n, degrees)?
    } else {
        CouplingTensors::sample(n, degrees, rng::derive_seed(seed, label, 0), spec.budget)?
    };
    Ok(Arc::new(t))
}

impl FieldBundle {
    pub fn sample(spec: &DisorderSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let (n, m) = (spec.n, spec.m);
        let active = spec.mixture.active_degrees();
        let main = draw(n + m, &active, seed, "main", spec)?;
        let sub_n = draw(n, &active, seed, "sub_n", spec)?;
        let sub_m = draw(m, &active, seed, "sub_m", spec)?;
        let pert = match spec.c {
            None => None,
            Some(c) => {
                let p_max = spec.mixture.p_max();
                let degrees: Vec<usize> = (1..=p_max).collect();
                let x = PerturbationParams::sample(p_max, c, &mut rng::child(seed, "x", 0))?;
                let y = PerturbationParams::sample(p_max, c, &mut rng::child(seed, "y", 0))?;
                Some(Perturbations {
                    x,
                    y,
                    pert_n: draw(n, &degrees, seed, "pert_n", spec)?,
                    pert_m: draw(m, &degrees, seed, "pert_m", spec)?,
                    pert_total: draw(n + m, &degrees, seed, "pert_total", spec)?,
                })
            }
        };
        Ok(Self {
            n,
            m,
            mixture: spec.mixture.clone(),
            main,
            sub_n,
            sub_m,
            pert,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn mixture(&self) -> &Mixture {
        &self.mixture
    }

    pub fn x(&self) -> Option<&PerturbationParams> {
        self.pert.as_ref().map(|p| &p.x)
    }

    pub fn y(&self) -> Option<&PerturbationParams> {
        self.pert.as_ref().map(|p| &p.y)
    }

    /// Same bundle with the perturbation strength pinned to `s` for every
    /// dimension (`0.0` disables the perturbation while keeping its draws).
    pub fn with_perturbation_strength(mut self, s: f64) -> Self {
        if let Some(p) = &mut self.pert {
            p.x = p.x.clone().with_strength_override(s);
            p.y = p.y.clone().with_strength_override(s);
        }
        self
    }

    /// `H_{N+M}`.
    pub fn h_total(&self) -> Hamiltonian {
        Hamiltonian::mixed(self.main.clone(), &self.mixture).expect("bundle tensors match mixture")
    }

    pub fn h_n(&self) -> Hamiltonian {
        Hamiltonian::mixed(self.sub_n.clone(), &self.mixture).expect("bundle tensors match mixture")
    }

    pub fn h_m(&self) -> Hamiltonian {
        Hamiltonian::mixed(self.sub_m.clone(), &self.mixture).expect("bundle tensors match mixture")
    }

    /// `s_{N+M} g_{N+M}^x`, zero when unperturbed.
    pub fn g_total(&self) -> Hamiltonian {
        match &self.pert {
            Some(p) => Hamiltonian::perturbation(p.pert_total.clone(), &p.x).expect("degrees 1..p_max"),
            None => Hamiltonian::zero(self.n + self.m),
        }
    }

    /// `s_N g_N^x`.
    pub fn g_n(&self) -> Hamiltonian {
        match &self.pert {
            Some(p) => Hamiltonian::perturbation(p.pert_n.clone(), &p.x).expect("degrees 1..p_max"),
            None => Hamiltonian::zero(self.n),
        }
    }

    /// `s_M g_M^y`.
    pub fn g_m(&self) -> Hamiltonian {
        match &self.pert {
            Some(p) => Hamiltonian::perturbation(p.pert_m.clone(), &p.y).expect("degrees 1..p_max"),
            None => Hamiltonian::zero(self.m),
        }
    }

    /// `H̄_{N+M} = H_{N+M} + s_{N+M} g_{N+M}^x`.
    pub fn h_bar_total(&self) -> Hamiltonian {
        self.h_total().plus(&self.g_total()).expect("same dimension")
    }

    /// `H̄_N = H_N + s_N g_N^x`.
    pub fn h_bar_n(&self) -> Hamiltonian {
        self.h_n().plus(&self.g_n()).expect("same dimension")
    }

    /// `H̄_M = H_M + s_M g_M^y`.
    pub fn h_bar_m(&self) -> Hamiltonian {
        self.h_m().plus(&self.g_m()).expect("same dimension")
    }

    /// `H̄_N(σ)` for `σ ∈ ℝ^N`.
    pub fn perturbed_evaluate(&self, sigma: &[f64]) -> Result<f64> {
        self.h_bar_n().evaluate(sigma)
    }

    /// `H̃(ρ, τ) = H_{N+M}(ρ, τ) + s_N g_N^x(ρ) + s_M g_M^y(τ)`.
    pub fn decoupled_evaluate(&self, rho: &[f64], tau: &[f64]) -> Result<f64> {
        if rho.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: rho.len(),
            });
        }
        if tau.len() != self.m {
            return Err(Error::DimensionMismatch {
                expected: self.m,
                got: tau.len(),
            });
        }
        let joined: Vec<f64> = rho.iter().chain(tau).copied().collect();
        Ok(self.h_total().value(&joined) + self.g_n().value(rho) + self.g_m().value(tau))
    }

    /// `H̃` as an [`Energy`] on concatenated `(ρ, τ)`.
    pub fn decoupled(&self) -> DecoupledEnergy {
        DecoupledEnergy {
            n: self.n,
            main: self.h_total().compile(),
            g_n: self.g_n().compile(),
            g_m: self.g_m().compile(),
        }
    }
}

/// `H̃_{N,M}^{x,y}` on concatenated coordinates.
#[derive(Debug, Clone)]
pub struct DecoupledEnergy {
    n: usize,
    main: CompiledField,
    g_n: CompiledField,
    g_m: CompiledField,
}

impl Energy for DecoupledEnergy {
    fn dim(&self) -> usize {
        self.main.n()
    }
    fn energy(&self, x: &[f64]) -> f64 {
        let (rho, tau) = x.split_at(self.n);
        self.main.value(x) + self.g_n.value(rho) + self.g_m.value(tau)
    }
}

/// Disorder for a single sphere: `H_N` and, optionally, `s_N g_N^x`.
#[derive(Debug, Clone)]
pub struct SingleSphereDisorder {
    pub h: Hamiltonian,
    pub g: Option<Hamiltonian>,
    pub x: Option<PerturbationParams>,
}

impl SingleSphereDisorder {
    /// Couplings come from child streams of `seed` that do not depend on
    /// whether the perturbation is on, so runs with and without it are paired.
    pub fn sample(
        n: usize,
        mixture: &Mixture,
        c: Option<f64>,
        zero_field: bool,
        seed: u64,
        budget: MemoryBudget,
    ) -> Result<Self> {
        let spec = DisorderSpec {
            n,
            m: 1,
            mixture: mixture.clone(),
            c,
            zero_field,
            budget,
        };
        if let Some(c) = c {
            check_c(c)?;
        }
        let active = mixture.active_degrees();
        let h = Hamiltonian::mixed(draw(n, &active, seed, "single_main", &spec)?, mixture)?;
        let (g, x) = match c {
            None => (None, None),
            Some(c) => {
                let p_max = mixture.p_max();
                let degrees: Vec<usize> = (1..=p_max).collect();
                let x = PerturbationParams::sample(p_max, c, &mut rng::child(seed, "single_x", 0))?;
                let g = Hamiltonian::perturbation(draw(n, &degrees, seed, "single_pert", &spec)?, &x)?;
                (Some(g), Some(x))
            }
        };
        Ok(Self { h, g, x })
    }

    /// `H̄_N`, or `H_N` when unperturbed.
    pub fn h_bar(&self) -> Hamiltonian {
        match &self.g {
            Some(g) => self.h.clone().plus(g).expect("same dimension"),
            None => self.h.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn spec(n: usize, m: usize) -> DisorderSpec {
        DisorderSpec::new(n, m, Mixture::new(&[0.5, 1.0]).unwrap(), Some(0.375))
    }

    #[test]
    fn components_are_distinct_streams() {
        let b = FieldBundle::sample(&spec(2, 2), 4).unwrap();
        // sub_n and sub_m have the same shape but must not coincide
        assert_ne!(b.sub_n.get(2), b.sub_m.get(2));
        assert_ne!(b.pert_n_for_test().get(1), b.sub_n.get(1));
        assert_ne!(b.x().unwrap(), b.y().unwrap());
        let again = FieldBundle::sample(&spec(2, 2), 4).unwrap();
        assert_eq!(again.main, b.main);
    }

    #[test]
    fn zeroed_perturbation_reduces_to_plain_fields() {
        let b = FieldBundle::sample(&spec(3, 2), 8)
            .unwrap()
            .with_perturbation_strength(0.0);
        let rho = [1.0, -1.0, 1.0];
        let tau = [1.0, 1.0];
        let joined: Vec<f64> = rho.iter().chain(&tau).copied().collect();
        assert_eq!(b.perturbed_evaluate(&rho).unwrap(), b.h_n().value(&rho));
        let (a, c) = (b.decoupled_evaluate(&rho, &tau).unwrap(), b.h_total().value(&joined));
        assert!((a - c).abs() < 1e-12 * (1.0 + c.abs()), "{a} vs {c}");
    }

    #[test]
    fn scalar_decoupled_expansion() {
        // N = M = 1, pure 1-spin, p_max = 1: every term is a scalar product
        let mixture = Mixture::pure(1);
        let spec = DisorderSpec::new(1, 1, mixture, Some(0.375));
        let b = FieldBundle::sample(&spec, 21).unwrap();
        let p = b.pert.as_ref().unwrap();
        let main = b.main.get(1).unwrap();
        let (rho, tau) = (1.0, -1.0);
        let h_total = 2f64.powf(0.0) * (main[0] * rho + main[1] * tau);
        // s_1 = 1, weight 2^{-1} x_1 N^{-1/2}
        let g_n = 0.5 * p.x.x()[0] * p.pert_n.get(1).unwrap()[0] * rho;
        let g_m = 0.5 * p.y.x()[0] * p.pert_m.get(1).unwrap()[0] * tau;
        assert_relative_eq!(
            b.decoupled_evaluate(&[rho], &[tau]).unwrap(),
            h_total + g_n + g_m,
            epsilon = 1e-14
        );
    }

    #[test]
    fn dimension_checks() {
        let b = FieldBundle::sample(&spec(2, 3), 1).unwrap();
        assert!(b.decoupled_evaluate(&[1.0; 3], &[1.0; 3]).is_err());
        assert!(b.decoupled_evaluate(&[1.0; 2], &[1.0; 2]).is_err());
        assert!(FieldBundle::sample(&DisorderSpec::new(0, 1, Mixture::pure(2), None), 0).is_err());
    }

    #[test]
    fn bundle_budget() {
        let mut s = spec(4, 4);
        s.budget = MemoryBudget { bytes: 100 };
        assert!(matches!(FieldBundle::sample(&s, 0), Err(Error::ResourceLimit { .. })));
    }

    impl FieldBundle {
        fn pert_n_for_test(&self) -> &CouplingTensors {
            &self.pert.as_ref().unwrap().pert_n
        }
    }
}
