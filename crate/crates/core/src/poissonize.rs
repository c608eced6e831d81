//! Poissonized laws, path sampling, and the Boltzmann residual.
//!
//! With `N_t` a unit-rate Poisson clock, the Poissonization of a chain
//! `(X_k)` is `Y_t := X_{N_t}`; its law is the mixture
//! `ρ_t = e^{-t} Σ_k (t^k / k!) μ_k`. The weights are truncated at the
//! smallest `k_max` whose tail mass is below a requested tolerance, and the
//! truncated density satisfies the Boltzmann equation `∂_t u = (P* - I) u`
//! up to that tail.
//!
//! The clock intensity is fixed at 1; an intensity `λ` is just the time
//! change `t ↦ λt`.

use crate::error::Error;
use crate::markov::{
    AffineGaussianKernel, DiscreteDistribution, FiniteKernel, GaussianDistribution,
};
use crate::rng::Stream;
use crate::util::{kahan_sum, KahanSum};
use crate::Result;
use serde::{Deserialize, Serialize};

/// Hard cap on the number of retained Poisson terms.
pub const K_MAX_CAP: usize = 1_000_000;

/// Truncated Poisson(t) weights `w_k = e^{-t} t^k / k!`, `k = 0..=k_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonWeights {
    t: f64,
    weights: Vec<f64>,
    tail_mass: f64,
}

impl PoissonWeights {
    /// Computes weights in log space until the cumulative mass reaches
    /// `1 - tail_tol`, so `k_max` is minimal with `P(N_t > k_max) ≤ tail_tol`.
    pub fn new(t: f64, tail_tol: f64) -> Result<Self> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::ParameterRange(format!("t = {t} must be nonnegative")));
        }
        if !(tail_tol > 0.0 && tail_tol < 1.0) {
            return Err(Error::ParameterRange(format!("tail_tol = {tail_tol} not in (0, 1)")));
        }
        if t == 0.0 {
            return Ok(Self { t, weights: vec![1.0], tail_mass: 0.0 });
        }
        let ln_t = t.ln();
        let mut log_w = -t;
        let mut weights = Vec::new();
        let mut cum = KahanSum::new();
        let mut k = 0usize;
        loop {
            let w = log_w.exp();
            weights.push(w);
            cum.add(w);
            if cum.value() >= 1.0 - tail_tol {
                break;
            }
            k += 1;
            if k > K_MAX_CAP {
                return Err(Error::TruncationCap { cap: K_MAX_CAP, t });
            }
            log_w += ln_t - (k as f64).ln();
        }
        let tail_mass = (1.0 - cum.value()).max(0.0);
        Ok(Self { t, weights, tail_mass })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn k_max(&self) -> usize {
        self.weights.len() - 1
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    /// Term-by-term time derivative of the truncated weights:
    /// `w_k'(t) = w_{k-1} - w_k` (with `w_{-1} = 0`).
    pub fn weight_derivatives(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.weights.len());
        for k in 0..self.weights.len() {
            let prev = if k == 0 { 0.0 } else { self.weights[k - 1] };
            out.push(prev - self.weights[k]);
        }
        out
    }
}

/// Poisson-weighted mixture of discrete-time marginals: the law of `Y_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonMixture<C> {
    weights: PoissonWeights,
    components: Vec<C>,
}

impl<C> PoissonMixture<C> {
    pub fn weights(&self) -> &PoissonWeights {
        &self.weights
    }

    pub fn components(&self) -> &[C] {
        &self.components
    }

    pub fn t(&self) -> f64 {
        self.weights.t()
    }
}

impl PoissonMixture<DiscreteDistribution> {
    /// Collapses the mixture to a single probability vector. The entries sum
    /// to `1 - tail_mass`.
    pub fn flatten(&self) -> Vec<f64> {
        let n = self.components[0].len();
        let mut sums: Vec<KahanSum> = vec![KahanSum::new(); n];
        for (w, comp) in self.weights.weights().iter().zip(&self.components) {
            for (acc, p) in sums.iter_mut().zip(comp.probs()) {
                acc.add(w * p);
            }
        }
        sums.iter().map(|acc| acc.value()).collect()
    }
}

impl PoissonMixture<GaussianDistribution> {
    /// State dimension of the Gaussian components.
    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    /// Mixture mean `Σ_k w_k m_k` (tail-deficient by `tail_mass`).
    pub fn mean(&self) -> Vec<f64> {
        let d = self.dim();
        (0..d)
            .map(|i| {
                kahan_sum(
                    self.weights
                        .weights()
                        .iter()
                        .zip(&self.components)
                        .map(|(w, c)| w * c.mean()[i]),
                )
            })
            .collect()
    }
}

/// Exact Poissonization of a finite chain started at `p0`.
pub fn poissonize_finite(
    kernel: &FiniteKernel,
    p0: &DiscreteDistribution,
    t: f64,
    tail_tol: f64,
) -> Result<PoissonMixture<DiscreteDistribution>> {
    let weights = PoissonWeights::new(t, tail_tol)?;
    let components = kernel.iterate_marginals(p0, weights.k_max())?;
    Ok(PoissonMixture { weights, components })
}

/// Exact Poissonization of an affine-Gaussian recursion started at `p0`.
pub fn poissonize_gaussian(
    kernel: &AffineGaussianKernel,
    p0: &GaussianDistribution,
    t: f64,
    tail_tol: f64,
) -> Result<PoissonMixture<GaussianDistribution>> {
    let weights = PoissonWeights::new(t, tail_tol)?;
    let components = kernel.iterate_marginals(p0, weights.k_max())?;
    Ok(PoissonMixture { weights, components })
}

/// Draws `Y_t = X_{N_t}`: a Poisson(t) number of kernel steps from an
/// initial state.
pub fn sample_poissonized<S, T>(mut state: T, mut step: S, t: f64, rng: &mut Stream) -> Result<T>
where
    S: FnMut(T, &mut Stream) -> T,
{
    if !(t >= 0.0) {
        return Err(Error::ParameterRange(format!("t = {t} must be nonnegative")));
    }
    let k = if t == 0.0 {
        0
    } else {
        use rand_distr::Distribution;
        let poisson = rand_distr::Poisson::new(t)
            .map_err(|e| Error::ParameterRange(format!("Poisson({t}): {e}")))?;
        poisson.sample(rng) as u64
    };
    for _ in 0..k {
        state = step(state, rng);
    }
    Ok(state)
}

/// Sup-norm residual of the Boltzmann equation on the truncated series:
/// `‖ d/dt u_t - (P* - I) u_t ‖_∞`, with `d/dt u_t` from the term-by-term
/// weight derivative.
///
/// The truncated series satisfies the equation up to the boundary flux
/// `w_{k_max} · p_{k_max+1}`, so the residual is tail-sized (at most about
/// `10 · tail_tol` for the times used here); it quantifies the truncation
/// quality. The untruncated series satisfies the equation identically.
pub fn boltzmann_residual(
    kernel: &FiniteKernel,
    p0: &DiscreteDistribution,
    t: f64,
    tail_tol: f64,
) -> Result<f64> {
    let mixture = poissonize_finite(kernel, p0, t, tail_tol)?;
    let n = p0.len();
    let dweights = mixture.weights().weight_derivatives();
    let mut du = vec![KahanSum::new(); n];
    for (dw, comp) in dweights.iter().zip(mixture.components()) {
        for (acc, p) in du.iter_mut().zip(comp.probs()) {
            acc.add(dw * p);
        }
    }
    let u = mixture.flatten();
    let pu = kernel.adjoint_density(&u)?;
    let mut residual = 0.0f64;
    for x in 0..n {
        let rhs = pu[x] - u[x];
        residual = residual.max((du[x].value() - rhs).abs());
    }
    Ok(residual)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn flip() -> FiniteKernel {
        FiniteKernel::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()
    }

    #[test]
    fn weights_at_zero_time() {
        let w = PoissonWeights::new(0.0, 1e-12).unwrap();
        assert_eq!(w.weights(), &[1.0]);
        assert_eq!(w.tail_mass(), 0.0);
    }

    #[test]
    fn first_weight_is_exp_minus_t() {
        let w = PoissonWeights::new(1.0, 1e-12).unwrap();
        assert_abs_diff_eq!(w.weights()[0], (-1.0f64).exp(), epsilon = 1e-16);
        assert_abs_diff_eq!(w.weights()[0], 0.36787944117144233, epsilon = 1e-15);
    }

    #[test]
    fn weights_cover_requested_mass() {
        for t in [0.1, 1.0, 5.0, 50.0] {
            let w = PoissonWeights::new(t, 1e-12).unwrap();
            let total = kahan_sum(w.weights().iter().copied());
            assert!(total >= 1.0 - 1e-12);
            assert!(w.tail_mass() <= 1e-12);
            assert_abs_diff_eq!(total + w.tail_mass(), 1.0, epsilon = 1e-14);
            // Minimality: dropping the last weight leaves too much tail.
            assert!(total - w.weights().last().unwrap() < 1.0 - 1e-12);
        }
    }

    #[test]
    fn weights_stable_at_large_t() {
        let w = PoissonWeights::new(1e4, 1e-10).unwrap();
        assert!(w.weights().iter().all(|x| x.is_finite() && *x >= 0.0));
        assert!(w.weights().iter().any(|x| *x > 0.0));
        assert!(kahan_sum(w.weights().iter().copied()) >= 1.0 - 1e-10);
    }

    #[test]
    fn mixture_at_zero_time_is_p0() {
        let p0 = DiscreteDistribution::new(vec![0.3, 0.7]).unwrap();
        let mix = poissonize_finite(&flip(), &p0, 0.0, 1e-12).unwrap();
        assert_eq!(mix.components().len(), 1);
        assert_eq!(mix.flatten(), p0.probs());
    }

    #[test]
    fn identity_kernel_flattens_to_p0() {
        let id = FiniteKernel::identity(3);
        let p0 = DiscreteDistribution::new(vec![0.2, 0.5, 0.3]).unwrap();
        for t in [0.5, 2.0, 10.0] {
            let flat = poissonize_finite(&id, &p0, t, 1e-12).unwrap().flatten();
            for (a, b) in flat.iter().zip(p0.probs()) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-11);
            }
        }
    }

    #[test]
    fn flip_chain_matches_closed_form_semigroup() {
        // The flip chain has eigenvalues 1 and -1, so
        // p0 exp(t(P-I)) = π + (p0 - π) e^{-2t} with π uniform.
        let p0 = DiscreteDistribution::new(vec![1.0, 0.0]).unwrap();
        for t in [0.3, 1.0, 4.0] {
            let flat = poissonize_finite(&flip(), &p0, t, 1e-13).unwrap().flatten();
            let decay = (-2.0 * t).exp();
            let expected = [0.5 + 0.5 * decay, 0.5 - 0.5 * decay];
            for (a, b) in flat.iter().zip(expected) {
                assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn sampler_at_zero_time_returns_initial_draw() {
        let mut rng = crate::rng::stream(11, 0);
        let out = sample_poissonized(7usize, |x, _| x + 1, 0.0, &mut rng).unwrap();
        assert_eq!(out, 7);
    }

    #[test]
    fn sampler_under_identity_keeps_initial_law() {
        let mut rng = crate::rng::stream(12, 0);
        let p0 = DiscreteDistribution::new(vec![0.25, 0.75]).unwrap();
        let mut counts = [0usize; 2];
        let samples = 200_000;
        for _ in 0..samples {
            let x0 = p0.sample(&mut rng);
            let y = sample_poissonized(x0, |x, _| x, 3.0, &mut rng).unwrap();
            counts[y] += 1;
        }
        let freq = counts[0] as f64 / samples as f64;
        let se = (0.25f64 * 0.75 / samples as f64).sqrt();
        assert!((freq - 0.25).abs() < 3.0 * se, "freq {freq}");
    }

    #[test]
    fn boltzmann_residual_identity_kernel_is_boundary_flux() {
        // For the identity kernel every marginal is p0, so the residual is
        // exactly the truncation flux w_{k_max} · max(p0); the untruncated
        // equation holds identically.
        let id = FiniteKernel::identity(3);
        let p0 = DiscreteDistribution::new(vec![0.2, 0.5, 0.3]).unwrap();
        let r = boltzmann_residual(&id, &p0, 2.0, 1e-12).unwrap();
        let w = PoissonWeights::new(2.0, 1e-12).unwrap();
        let flux = w.weights()[w.k_max()] * 0.5;
        assert_abs_diff_eq!(r, flux, epsilon = 1e-18);
        assert!(r <= 10.0 * 1e-12, "residual {r}");
    }

    #[test]
    fn boltzmann_residual_stationary_start() {
        let k = FiniteKernel::new(vec![
            vec![0.7, 0.3, 0.0],
            vec![0.2, 0.4, 0.4],
            vec![0.0, 0.1, 0.9],
        ])
        .unwrap();
        let pi = k.invariant_measure(1e-13).unwrap();
        let r = boltzmann_residual(&k, &pi, 1.5, 1e-13).unwrap();
        assert!(r <= 1e-12, "residual {r}");
    }

    #[test]
    fn boltzmann_residual_bounded_by_tail() {
        let k = FiniteKernel::new(vec![
            vec![0.1, 0.4, 0.3, 0.2],
            vec![0.3, 0.3, 0.2, 0.2],
            vec![0.25, 0.25, 0.25, 0.25],
            vec![0.4, 0.1, 0.1, 0.4],
        ])
        .unwrap();
        let p0 = DiscreteDistribution::new(vec![0.4, 0.3, 0.2, 0.1]).unwrap();
        for tail_tol in [1e-8, 1e-10, 1e-12] {
            let r = boltzmann_residual(&k, &p0, 2.0, tail_tol).unwrap();
            assert!(r <= 10.0 * tail_tol, "residual {r} at tail {tail_tol}");
        }
    }

    #[test]
    fn weight_derivatives_sum_to_minus_tail_rate() {
        let w = PoissonWeights::new(2.0, 1e-12).unwrap();
        // Σ w_k'(t) telescopes to -w_{k_max}: mass leaks into the tail.
        let total: f64 = kahan_sum(w.weight_derivatives().into_iter());
        assert_abs_diff_eq!(total, -w.weights()[w.k_max()], epsilon = 1e-16);
    }
}
