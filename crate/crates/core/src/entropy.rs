//! Entropy functionals, Bregman divergences, Dirichlet forms, and the
//! entropy-flow identity.
//!
//! For Poissonized posterior and prior laws `ρ_t^S`, `π_t` with density
//! ratio `v_t = dρ_t^S/dπ_t`, the flow of the divergence is exactly
//!
//! ```text
//! d/dt KL(ρ_t^S ‖ π_t) = Δ_{P,P_S}(v_t) - E_{x~π_t, y~δ_x P}[ D_Φ(v_t(x), v_t(y)) ]
//! ```
//!
//! with `Φ(x) = x log x`, expansion term
//! `Δ_{P,P_S}(v) = E_{ρ^S}[(P_S - P) log v]`, and `D_Φ` the Bregman
//! divergence of `Φ`. When `π` is invariant under `P`, the Bregman term is
//! the Dirichlet form `E_π(log v, v)`.
//!
//! Conventions: `0 log 0 := 0` throughout; KL divergences return `+∞` on a
//! support violation (reported, never clamped).

use crate::error::Error;
use crate::markov::{DiscreteDistribution, FiniteKernel};
use crate::poissonize::poissonize_finite;
use crate::quad::{MixtureDensity, POSITIVITY_FLOOR};
use crate::rng::Stream;
use crate::util::{kahan_sum, mean_and_se, KahanSum};
use crate::Result;
use serde::{Deserialize, Serialize};

/// Bregman divergence of `Φ(x) = x log x`:
/// `D_Φ(a, b) = a log(a/b) - (a - b)` for `a ≥ 0`, `b > 0`, with
/// `0 log 0 := 0`.
pub fn phi_bregman(a: f64, b: f64) -> Result<f64> {
    if !(b > 0.0) {
        return Err(Error::ParameterRange(format!("b = {b} must be positive")));
    }
    if !(a >= 0.0) {
        return Err(Error::ParameterRange(format!("a = {a} must be nonnegative")));
    }
    if a == 0.0 {
        return Ok(b);
    }
    Ok(a * (a / b).ln() - (a - b))
}

/// `Σ p log(p/q)` with `0 log 0 := 0`. Mass on a state where `q` vanishes
/// yields `+∞`.
pub fn kl_discrete(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch("KL lengths differ".into()));
    }
    let mut acc = KahanSum::new();
    for (a, b) in p.iter().zip(q) {
        if *a == 0.0 {
            continue;
        }
        if *b <= 0.0 {
            return Ok(f64::INFINITY);
        }
        acc.add(a * (a / b).ln());
    }
    Ok(acc.value())
}

/// Entropy functional `Ent_ν[f] = E_ν[Φ(f)] - Φ(E_ν[f])`, nonnegative by
/// Jensen. Equals `KL(μ ‖ ν)` when `f = dμ/dν`.
pub fn entropy_functional(nu: &DiscreteDistribution, f: &[f64]) -> Result<f64> {
    if f.len() != nu.len() {
        return Err(Error::DimensionMismatch("function length".into()));
    }
    if let Some(bad) = f.iter().find(|x| !(**x > 0.0)) {
        return Err(Error::PositivityViolation(format!("f contains {bad}")));
    }
    let phi_mean = kahan_sum(nu.probs().iter().zip(f).map(|(p, x)| p * x * x.ln()));
    let mean = kahan_sum(nu.probs().iter().zip(f).map(|(p, x)| p * x));
    Ok(phi_mean - mean * mean.ln())
}

/// Dirichlet form `E_π(f, g) = E_π[g (I - P) f]`, evaluated exactly.
pub fn dirichlet_form(kernel: &FiniteKernel, pi: &[f64], f: &[f64], g: &[f64]) -> Result<f64> {
    let n = kernel.len();
    if pi.len() != n || f.len() != n || g.len() != n {
        return Err(Error::DimensionMismatch("dirichlet form inputs".into()));
    }
    let pf = kernel.apply_function(f)?;
    Ok(kahan_sum((0..n).map(|x| pi[x] * g[x] * (f[x] - pf[x]))))
}

/// Pointwise-positive density ratio `v = dρ/dπ` on a finite state space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityRatioField {
    values: Vec<f64>,
}

impl DensityRatioField {
    /// Requires every value strictly above the positivity floor (1e-300);
    /// anything lower signals a genuine support problem.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|v| !(**v > POSITIVITY_FLOOR)) {
            return Err(Error::PositivityViolation(format!(
                "ratio value {bad} at or below floor {POSITIVITY_FLOOR:e}"
            )));
        }
        Ok(Self { values })
    }

    /// Ratio of two pointwise-positive density vectors.
    pub fn from_densities(posterior: &[f64], prior: &[f64]) -> Result<Self> {
        if posterior.len() != prior.len() {
            return Err(Error::DimensionMismatch("density lengths differ".into()));
        }
        for (i, q) in prior.iter().enumerate() {
            if !(*q > POSITIVITY_FLOOR) {
                return Err(Error::PositivityViolation(format!(
                    "prior mass {q} at state {i}"
                )));
            }
        }
        Self::new(posterior.iter().zip(prior).map(|(p, q)| p / q).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn log_values(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.ln()).collect()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Pointwise-evaluable density ratio of a Gaussian mixture posterior over a
/// mixture (or single-Gaussian) prior: the continuous-state counterpart of
/// [`DensityRatioField`].
#[derive(Debug, Clone)]
pub struct AnalyticRatio {
    posterior: MixtureDensity,
    prior: MixtureDensity,
}

impl AnalyticRatio {
    pub fn new(posterior: MixtureDensity, prior: MixtureDensity) -> Result<Self> {
        if posterior.dim() != prior.dim() {
            return Err(Error::DimensionMismatch("ratio dims differ".into()));
        }
        Ok(Self { posterior, prior })
    }

    pub fn posterior(&self) -> &MixtureDensity {
        &self.posterior
    }

    pub fn prior(&self) -> &MixtureDensity {
        &self.prior
    }

    pub fn log_v(&self, x: &[f64]) -> Result<f64> {
        let p = self.posterior.density(x);
        let q = self.prior.density(x);
        if !(p > POSITIVITY_FLOOR) || !(q > POSITIVITY_FLOOR) {
            return Err(Error::PositivityViolation(format!(
                "density ratio under floor at {x:?}: p = {p:.3e}, q = {q:.3e}"
            )));
        }
        Ok(p.ln() - q.ln())
    }

    /// `∇ log v = ∇ log p − ∇ log q`.
    pub fn grad_log_v(&self, x: &[f64]) -> Result<Vec<f64>> {
        let gp = self.posterior.score(x)?;
        let gq = self.prior.score(x)?;
        Ok((gp - gq).iter().copied().collect())
    }

    /// `∇² log v` as a dense matrix (1x1 or 2x2).
    pub fn hess_log_v(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        let hp = self.posterior.log_hessian(x)?;
        let hq = self.prior.log_hessian(x)?;
        let h = hp - hq;
        Ok((0..h.nrows()).map(|i| (0..h.ncols()).map(|j| h[(i, j)]).collect()).collect())
    }
}

/// Expansion term `Δ_{P,P_S}(v) = E_{x~ρ}[(P_S - P) log v(x)]`, exact on
/// finite spaces. `rho` may carry a Poisson tail deficit.
pub fn expansion_term(
    prior: &FiniteKernel,
    posterior: &FiniteKernel,
    rho: &[f64],
    v: &DensityRatioField,
) -> Result<f64> {
    let n = prior.len();
    if posterior.len() != n || rho.len() != n || v.len() != n {
        return Err(Error::DimensionMismatch("expansion term inputs".into()));
    }
    let log_v = v.log_values();
    let ps_log = posterior.apply_function(&log_v)?;
    let p_log = prior.apply_function(&log_v)?;
    Ok(kahan_sum((0..n).map(|x| rho[x] * (ps_log[x] - p_log[x]))))
}

/// Monte-Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub std_error: f64,
}

/// Monte-Carlo expansion term for kernels without exact marginals:
/// outer samples `x ~ ρ`, inner samples estimate `(P_S - P) log v (x)`.
pub fn expansion_term_mc<SR, SP, SQ, LV>(
    sample_rho: SR,
    posterior_step: SP,
    prior_step: SQ,
    log_v: LV,
    outer: usize,
    inner: usize,
    rng: &mut Stream,
) -> Result<MonteCarloEstimate>
where
    SR: Fn(&mut Stream) -> Vec<f64>,
    SP: Fn(&[f64], &mut Stream) -> Vec<f64>,
    SQ: Fn(&[f64], &mut Stream) -> Vec<f64>,
    LV: Fn(&[f64]) -> Result<f64>,
{
    let mut contributions = Vec::with_capacity(outer);
    for _ in 0..outer {
        let x = sample_rho(rng);
        let mut acc = KahanSum::new();
        for _ in 0..inner {
            let yp = posterior_step(&x, rng);
            let yq = prior_step(&x, rng);
            acc.add(log_v(&yp)? - log_v(&yq)?);
        }
        contributions.push(acc.value() / inner as f64);
    }
    let (mean, std_error) = mean_and_se(&contributions);
    Ok(MonteCarloEstimate { mean, std_error })
}

/// Bregman term `E_{x~π, y~δ_x P}[D_Φ(v(x), v(y))]`, an exact double sum.
/// Nonnegative by convexity of `Φ`.
pub fn bregman_term(prior: &FiniteKernel, pi: &[f64], v: &DensityRatioField) -> Result<f64> {
    let n = prior.len();
    if pi.len() != n || v.len() != n {
        return Err(Error::DimensionMismatch("bregman term inputs".into()));
    }
    let vals = v.values();
    let mut acc = KahanSum::new();
    for x in 0..n {
        if pi[x] == 0.0 {
            continue;
        }
        for y in 0..n {
            let p = prior.matrix()[x][y];
            if p == 0.0 {
                continue;
            }
            acc.add(pi[x] * p * phi_bregman(vals[x], vals[y])?);
        }
    }
    Ok(acc.value())
}

/// Jensen-contracted Bregman term `E_π[D_Φ(v, Pv)]`; by convexity it is at
/// most [`bregman_term`].
pub fn jensen_bregman_term(prior: &FiniteKernel, pi: &[f64], v: &DensityRatioField) -> Result<f64> {
    let n = prior.len();
    if pi.len() != n || v.len() != n {
        return Err(Error::DimensionMismatch("jensen bregman inputs".into()));
    }
    let pv = prior.apply_function(v.values())?;
    let mut acc = KahanSum::new();
    for x in 0..n {
        if pi[x] == 0.0 {
            continue;
        }
        acc.add(pi[x] * phi_bregman(v.values()[x], pv[x])?);
    }
    Ok(acc.value())
}

/// One row of an entropy-flow verification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowReport {
    pub t: f64,
    /// Expansion term `Δ_{P,P_S}(v_t)`.
    pub expansion: f64,
    /// Bregman term; nonnegative.
    pub bregman: f64,
    /// `expansion - bregman`.
    pub rhs: f64,
    /// `d/dt KL` assembled from the Boltzmann equation.
    pub lhs_analytic: f64,
    /// `d/dt KL` from a Richardson-extrapolated central difference.
    pub lhs_fd: f64,
    pub residual_analytic: f64,
    pub residual_fd: f64,
    /// KL(ρ_t^S ‖ π_t) at this time.
    pub kl: f64,
}

impl FlowReport {
    /// CSV header matching [`FlowReport::csv_row`].
    pub fn csv_header() -> &'static str {
        "t,expansion,bregman,rhs,lhs_analytic,lhs_fd,residual_analytic,residual_fd,kl"
    }

    pub fn csv_row(&self) -> String {
        [
            self.t,
            self.expansion,
            self.bregman,
            self.rhs,
            self.lhs_analytic,
            self.lhs_fd,
            self.residual_analytic,
            self.residual_fd,
            self.kl,
        ]
        .map(|x| format!("{x:.16e}"))
        .join(",")
    }
}

fn kl_at(
    posterior: &FiniteKernel,
    prior: &FiniteKernel,
    p0: &DiscreteDistribution,
    q0: &DiscreteDistribution,
    t: f64,
    tail_tol: f64,
) -> Result<f64> {
    let rho = poissonize_finite(posterior, p0, t, tail_tol)?.flatten();
    let pi = poissonize_finite(prior, q0, t, tail_tol)?.flatten();
    kl_discrete(&rho, &pi)
}

/// Verifies the entropy-flow identity on a grid of times.
///
/// The posterior chain runs `posterior` from `p0`, the prior chain runs
/// `prior` from `q0` (pass `q0 = p0` for the shared-initialization setting).
/// The left side `d/dt KL` is computed two independent ways: analytically,
/// with `∂_t u = (P* - I)u` from the Boltzmann equation, and by a central
/// finite difference with step `h = max(1e-4, 1e-6 t)` plus Richardson
/// extrapolation.
pub fn entropy_flow_check(
    prior: &FiniteKernel,
    posterior: &FiniteKernel,
    p0: &DiscreteDistribution,
    q0: &DiscreteDistribution,
    t_grid: &[f64],
    tail_tol: f64,
) -> Result<Vec<FlowReport>> {
    let n = prior.len();
    if posterior.len() != n || p0.len() != n || q0.len() != n {
        return Err(Error::DimensionMismatch("flow check inputs".into()));
    }
    let mut out = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let rho_mix = poissonize_finite(posterior, p0, t, tail_tol)?;
        let pi_mix = poissonize_finite(prior, q0, t, tail_tol)?;
        let rho = rho_mix.flatten();
        let pi = pi_mix.flatten();
        let v = DensityRatioField::from_densities(&rho, &pi)?;

        let expansion = expansion_term(prior, posterior, &rho, &v)?;
        let bregman = bregman_term(prior, &pi, &v)?;
        let rhs = expansion - bregman;

        // Analytic route: d/dt KL = Σ_x [∂_t u^S (1 + log v) - v ∂_t u].
        let du_s: Vec<f64> = {
            let image = posterior.adjoint_density(&rho)?;
            image.iter().zip(&rho).map(|(a, b)| a - b).collect()
        };
        let du: Vec<f64> = {
            let image = prior.adjoint_density(&pi)?;
            image.iter().zip(&pi).map(|(a, b)| a - b).collect()
        };
        let log_v = v.log_values();
        let lhs_analytic = kahan_sum(
            (0..n).map(|x| du_s[x] * (1.0 + log_v[x]) - v.values()[x] * du[x]),
        );

        // Finite-difference route with Richardson extrapolation.
        let h = (1e-4f64).max(1e-6 * t);
        let diff = |hh: f64| -> Result<f64> {
            if t >= hh {
                let plus = kl_at(posterior, prior, p0, q0, t + hh, tail_tol)?;
                let minus = kl_at(posterior, prior, p0, q0, t - hh, tail_tol)?;
                Ok((plus - minus) / (2.0 * hh))
            } else {
                // Second-order forward difference near t = 0.
                let f0 = kl_at(posterior, prior, p0, q0, t, tail_tol)?;
                let f1 = kl_at(posterior, prior, p0, q0, t + hh, tail_tol)?;
                let f2 = kl_at(posterior, prior, p0, q0, t + 2.0 * hh, tail_tol)?;
                Ok((-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * hh))
            }
        };
        let d_h = diff(h)?;
        let d_h2 = diff(0.5 * h)?;
        let lhs_fd = (4.0 * d_h2 - d_h) / 3.0;

        let kl = kl_discrete(&rho, &pi)?;
        out.push(FlowReport {
            t,
            expansion,
            bregman,
            rhs,
            lhs_analytic,
            lhs_fd,
            residual_analytic: (lhs_analytic - rhs).abs(),
            residual_fd: (lhs_fd - rhs).abs(),
            kl,
        });
    }
    Ok(out)
}

fn check_invariance(kernel: &FiniteKernel, pi: &DiscreteDistribution, tol: f64) -> Result<()> {
    let residual = kernel.residual_invariance(pi)?;
    if residual > tol {
        return Err(Error::NonInvariantPrior { residual });
    }
    Ok(())
}

/// When `π` is invariant under `P`, the Bregman term equals the Dirichlet
/// form `E_π(log v, v)`. Returns `(bregman, dirichlet, |difference|)`.
pub fn dirichlet_bregman_identity(
    kernel: &FiniteKernel,
    pi: &DiscreteDistribution,
    v: &DensityRatioField,
) -> Result<(f64, f64, f64)> {
    check_invariance(kernel, pi, 1e-10)?;
    let lhs = bregman_term(kernel, pi.probs(), v)?;
    let rhs = dirichlet_form(kernel, pi.probs(), &v.log_values(), v.values())?;
    Ok((lhs, rhs, (lhs - rhs).abs()))
}

/// Adjoint form of the Jensen-contracted Bregman term: with `π` invariant,
/// `E_π[D_Φ(v, Pv)] = KL(ρ ‖ ρ P†)` where `ρ = v·π` and
/// `P†(y, x) = π(x) P(x, y) / π(y)` is the time reversal. Both routes are
/// computed and must agree within 1e-10; the common value is returned.
pub fn adjoint_bregman_term(
    kernel: &FiniteKernel,
    pi: &DiscreteDistribution,
    v: &DensityRatioField,
) -> Result<f64> {
    check_invariance(kernel, pi, 1e-10)?;
    let n = kernel.len();
    if v.len() != n {
        return Err(Error::DimensionMismatch("ratio length".into()));
    }
    if let Some((i, _)) = pi.probs().iter().enumerate().find(|(_, p)| **p <= 0.0) {
        return Err(Error::PositivityViolation(format!("π vanishes at state {i}")));
    }
    let direct = jensen_bregman_term(kernel, pi.probs(), v)?;

    // Reversal route: ρ = v π, (ρ P†)(x) = π(x) (P v)(x).
    let rho: Vec<f64> = pi.probs().iter().zip(v.values()).map(|(p, vv)| p * vv).collect();
    let pv = kernel.apply_function(v.values())?;
    let rho_rev: Vec<f64> = pi.probs().iter().zip(&pv).map(|(p, q)| p * q).collect();
    let via_reversal = kl_discrete(&rho, &rho_rev)?;
    // ρ is not normalized when E_π[v] ≠ 1; the unnormalized KL form
    // Σ ρ log(ρ/ρP†) − Σρ + ΣρP† matches D_Φ exactly.
    let correction = kahan_sum(rho_rev.iter().copied()) - kahan_sum(rho.iter().copied());
    let via_reversal = via_reversal + correction;

    let gap = (direct - via_reversal).abs();
    if gap > 1e-10 {
        return Err(Error::QuadratureFailure(format!(
            "adjoint Bregman routes disagree by {gap:.3e}"
        )));
    }
    Ok(direct)
}
