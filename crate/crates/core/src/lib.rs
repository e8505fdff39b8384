//! # spinlab
//!
//! Numerical laboratory for spherical mixed p-spin glass models.
//!
//! The crate samples the Gaussian disorder of the mixed p-spin Hamiltonian
//! `H_N(σ) = Σ_p γ_p N^{-(p-1)/2} Σ J_{i1..ip} σ_{i1}⋯σ_{ip}` on the sphere
//! `S_N = {‖σ‖ = √N}`, adds the vanishing random perturbation `s_N g_N(σ)`
//! with `s_N = N^c`, and estimates quenched free energies on single spheres
//! and on products `S_N × S_M`. On top of that it provides the machinery of
//! the Guerra–Toninelli interpolation between the coupled system on
//! `S_N × S_M` and two independent subsystems, together with the
//! band/coarea decomposition that relates `S_{N+M}` to the product space.
//!
//! ## Modules
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`mixture`] | `ξ(t) = Σ γ_p² t^p`, derivatives, perturbation polynomial `η_N^x` |
//! | [`field`] | coupling tensors, Hamiltonian evaluation, gradients, field bundles |
//! | [`sphere`] | sphere sampling, overlaps, radius map, band measures, Poincaré check |
//! | [`free_energy`] | exact quadrature and Monte Carlo log-partition estimators |
//! | [`interpolation`] | interpolating Hamiltonian, Gibbs sampler, `U`, `U⁺`, `φ(t)`, `φ'(t)` |
//! | [`band`] | `D±` split, band integrals `X(r)`, Lipschitz probes, Taylor-chain audit |
//! | [`experiment`] | config-driven batch runner used by the `spinlab` binary |
//!
//! Every stochastic routine takes an explicit seed; child streams are
//! derived with [`rng::derive_seed`], so results are reproducible
//! bit-for-bit within a build regardless of the thread count.

pub mod band;
pub mod error;
pub mod experiment;
pub mod field;
pub mod free_energy;
pub mod interpolation;
pub mod mixture;
pub mod quadrature;
pub mod rng;
pub mod sphere;
pub mod stats;

pub use error::{Error, Result};
pub use field::{CouplingTensors, DisorderSpec, FieldBundle, Hamiltonian};
pub use free_energy::{Domain, Energy, FreeEnergyEstimate, LogPartition, Method};
pub use mixture::{Mixture, PerturbationParams};
pub use sphere::{OverlapTriple, ProductConfig, SphericalConfig};
