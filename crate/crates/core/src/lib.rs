//! Poissonization of discrete-time Markov learning algorithms.
//!
//! Given a discrete-time Markov chain `(X_k)` with kernel `P`, its
//! *Poissonization* is the continuous-time process `Y_t := X_{N_t}` where
//! `N_t` is a unit-rate Poisson process. The law of `Y_t` is the
//! Poisson-weighted mixture `ρ_t = e^{-t} Σ_k (t^k/k!) μ_k` of the discrete
//! marginals, and its density solves the Boltzmann equation
//! `∂_t u_t = (P* - I) u_t`.
//!
//! This crate provides, at desk scale (finite chains and affine-Gaussian
//! recursions in one or two dimensions):
//!
//! - [`markov`]: kernels (row-stochastic, affine-Gaussian, opaque samplers),
//!   their actions on functions and measures, invariant measures, and the
//!   Gaussian AR(1)/Ornstein-Uhlenbeck prior.
//! - [`poissonize`]: Poisson weights, Poissonized mixtures, path sampling,
//!   and Boltzmann-equation residuals.
//! - [`entropy`]: KL divergence, entropy functionals, Dirichlet forms,
//!   Bregman terms, and the exact entropy-flow identity
//!   `d/dt KL(ρ_t^S ‖ π_t) = Δ_{P,P_S}(v_t) - Bregman`.
//! - [`lsi`]: modified log-Sobolev constants, closed forms for diffusive
//!   priors, numeric estimation for finite chains, and decay checks.
//! - [`learn`]: toy learning problems, posterior/prior algorithm kernels
//!   (SGD, noisy SGD, SGLD), seeded trajectory ensembles, and
//!   generalization-gap estimation.
//! - [`bounds`]: PAC-Bayes, SGLD, first/second-order SGD, and
//!   depoissonization-gap bound evaluators with per-term reports.
//! - [`depoisson`]: Poisson transforms, Cauchy-formula reconstruction, and
//!   residual decay fitting.
//!
//! Everything is deterministic under a fixed master seed: Monte-Carlo work
//! splits randomness by counter-based streams so results never depend on
//! worker count.

pub mod bounds;
pub mod depoisson;
pub mod entropy;
pub mod error;
pub mod learn;
pub mod lsi;
pub mod markov;
pub mod poissonize;
pub mod quad;
pub mod rng;
pub mod transport;
pub(crate) mod util;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
