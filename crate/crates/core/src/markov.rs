//! Markov kernels and their marginal laws.
//!
//! A kernel `P(x, ·)` acts on functions by `Pf(x) = E_{y ~ P(x,·)}[f(y)]`,
//! on measures by `μP(A) = E_{x~μ}[P(x, A)]`, and on densities by the
//! adjoint `P*`, characterized by `⟨Pf, u⟩ = ⟨f, P*u⟩`. Three concrete
//! representations are supported: row-stochastic matrices on finite state
//! spaces, affine maps with Gaussian noise (`x ↦ N(Ax + b, Σ)`), and opaque
//! deterministic samplers for everything else.

use crate::error::Error;
use crate::rng::Stream;
use crate::util::{dot, kahan_sum};
use crate::Result;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Tolerance for row sums and probability normalization.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// Probability distribution on a finite state space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDistribution {
    probs: Vec<f64>,
}

impl DiscreteDistribution {
    /// Validates nonnegativity and normalization within `1e-12`.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("empty support".into()));
        }
        if let Some(p) = probs.iter().find(|p| **p < 0.0 || !p.is_finite()) {
            return Err(Error::InvalidDistribution(format!("entry {p} is not a probability")));
        }
        let sum = kahan_sum(probs.iter().copied());
        if (sum - 1.0).abs() > STOCHASTIC_TOL {
            return Err(Error::InvalidDistribution(format!("sums to {sum:.17}, not 1")));
        }
        Ok(Self { probs })
    }

    /// Uniform distribution on `n` states.
    pub fn uniform(n: usize) -> Self {
        Self { probs: vec![1.0 / n as f64; n] }
    }

    /// Point mass at state `i`.
    pub fn point(n: usize, i: usize) -> Self {
        let mut probs = vec![0.0; n];
        probs[i] = 1.0;
        Self { probs }
    }

    /// Normalizes arbitrary nonnegative weights.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let sum = kahan_sum(weights.iter().copied());
        if !(sum > 0.0) {
            return Err(Error::InvalidDistribution("weights sum to zero".into()));
        }
        Self::new(weights.iter().map(|w| w / sum).collect())
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Expectation of a state function.
    pub fn expect(&self, f: &[f64]) -> Result<f64> {
        if f.len() != self.len() {
            return Err(Error::DimensionMismatch(format!(
                "function has {} entries, distribution has {}",
                f.len(),
                self.len()
            )));
        }
        Ok(dot(&self.probs, f))
    }

    /// Draws a state index.
    pub fn sample(&self, rng: &mut Stream) -> usize {
        use rand::Rng;
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (i, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        self.probs.len() - 1
    }
}

/// Gaussian distribution `N(mean, cov)` with a symmetric PSD covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianDistribution {
    mean: Vec<f64>,
    cov: Vec<Vec<f64>>,
}

impl GaussianDistribution {
    pub fn new(mean: Vec<f64>, cov: Vec<Vec<f64>>) -> Result<Self> {
        let d = mean.len();
        if cov.len() != d || cov.iter().any(|row| row.len() != d) {
            return Err(Error::DimensionMismatch(format!("mean has dim {d}, cov is not {d}x{d}")));
        }
        for i in 0..d {
            for j in 0..d {
                if (cov[i][j] - cov[j][i]).abs() > 1e-12 {
                    return Err(Error::InvalidCovariance(format!(
                        "not symmetric at ({i},{j}): {} vs {}",
                        cov[i][j], cov[j][i]
                    )));
                }
            }
        }
        let m = DMatrix::from_fn(d, d, |i, j| 0.5 * (cov[i][j] + cov[j][i]));
        let eig = m.symmetric_eigen();
        if let Some(lam) = eig.eigenvalues.iter().find(|l| **l < -1e-12) {
            return Err(Error::InvalidCovariance(format!("negative eigenvalue {lam}")));
        }
        Ok(Self { mean, cov })
    }

    /// One-dimensional Gaussian `N(mean, var)`.
    pub fn scalar(mean: f64, var: f64) -> Result<Self> {
        Self::new(vec![mean], vec![vec![var]])
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn cov(&self) -> &[Vec<f64>] {
        &self.cov
    }

    /// Variance of a 1-d Gaussian.
    pub fn var_1d(&self) -> f64 {
        debug_assert_eq!(self.dim(), 1);
        self.cov[0][0]
    }

    pub fn sample(&self, rng: &mut Stream) -> Vec<f64> {
        use rand_distr::{Distribution, StandardNormal};
        let d = self.dim();
        let m = DMatrix::from_fn(d, d, |i, j| self.cov[i][j]);
        let chol = m
            .clone()
            .cholesky()
            .unwrap_or_else(|| (m + DMatrix::identity(d, d) * 1e-12).cholesky().expect("PSD"));
        let z = DVector::from_fn(d, |_, _| StandardNormal.sample(rng));
        let x = chol.l() * z;
        (0..d).map(|i| self.mean[i] + x[i]).collect()
    }

    /// `KL(self ‖ other)` in closed form; both covariances must be positive
    /// definite.
    pub fn kl(&self, other: &GaussianDistribution) -> Result<f64> {
        let d = self.dim();
        if other.dim() != d {
            return Err(Error::DimensionMismatch("Gaussian KL dims differ".into()));
        }
        let c1 = DMatrix::from_fn(d, d, |i, j| self.cov[i][j]);
        let c2 = DMatrix::from_fn(d, d, |i, j| other.cov[i][j]);
        let chol2 = c2
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidCovariance("second covariance is singular".into()))?;
        let chol1 = c1
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidCovariance("first covariance is singular".into()))?;
        let inv2 = chol2.inverse();
        let trace = (&inv2 * &c1).trace();
        let dm = DVector::from_fn(d, |i, _| other.mean[i] - self.mean[i]);
        let quad = (dm.transpose() * &inv2 * &dm)[(0, 0)];
        let ln_det1: f64 = chol1.l().diagonal().iter().map(|x| 2.0 * x.ln()).sum();
        let ln_det2: f64 = chol2.l().diagonal().iter().map(|x| 2.0 * x.ln()).sum();
        Ok(0.5 * (trace + quad - d as f64 + ln_det2 - ln_det1))
    }
}

/// Row-stochastic kernel on a finite state space, with a Euclidean embedding
/// of the states used for Wasserstein and Lipschitz computations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteKernel {
    /// Row-major transition matrix; `matrix[x][y] = P(x, {y})`.
    matrix: Vec<Vec<f64>>,
    /// State embedding in `R^m`; defaults to index positions `0..n-1` on a line.
    coords: Vec<Vec<f64>>,
}

impl FiniteKernel {
    /// Validates row-stochasticity within `1e-12` and uses the default 1-d
    /// index embedding.
    pub fn new(matrix: Vec<Vec<f64>>) -> Result<Self> {
        let n = matrix.len();
        let coords = (0..n).map(|i| vec![i as f64]).collect();
        Self::with_coords(matrix, coords)
    }

    pub fn with_coords(matrix: Vec<Vec<f64>>, coords: Vec<Vec<f64>>) -> Result<Self> {
        let n = matrix.len();
        if n == 0 {
            return Err(Error::InvalidDistribution("empty kernel".into()));
        }
        for (i, row) in matrix.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch(format!("row {i} has {} entries, expected {n}", row.len())));
            }
            if let Some(p) = row.iter().find(|p| **p < 0.0 || !p.is_finite()) {
                return Err(Error::InvalidDistribution(format!("row {i} contains {p}")));
            }
            let sum = kahan_sum(row.iter().copied());
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::NotStochastic { row: i, sum, tol: STOCHASTIC_TOL });
            }
        }
        if coords.len() != n {
            return Err(Error::DimensionMismatch(format!("{} coords for {n} states", coords.len())));
        }
        let m = coords[0].len();
        if coords.iter().any(|c| c.len() != m) {
            return Err(Error::DimensionMismatch("coords have mixed dimensions".into()));
        }
        Ok(Self { matrix, coords })
    }

    pub fn identity(n: usize) -> Self {
        let matrix = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self::new(matrix).expect("identity is stochastic")
    }

    pub fn len(&self) -> usize {
        self.matrix.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.is_empty()
    }

    pub fn matrix(&self) -> &[Vec<f64>] {
        &self.matrix
    }

    pub fn coords(&self) -> &[Vec<f64>] {
        &self.coords
    }

    /// Transition row `P(x, ·)` as a distribution.
    pub fn row(&self, x: usize) -> &[f64] {
        &self.matrix[x]
    }

    /// `μP`: one step of the chain applied to a distribution.
    pub fn apply_distribution(&self, dist: &DiscreteDistribution) -> Result<DiscreteDistribution> {
        let n = self.len();
        if dist.len() != n {
            return Err(Error::DimensionMismatch(format!("distribution has {} states, kernel {n}", dist.len())));
        }
        let mut out = vec![0.0; n];
        for (x, p) in dist.probs().iter().enumerate() {
            if *p == 0.0 {
                continue;
            }
            for (y, q) in self.matrix[x].iter().enumerate() {
                out[y] += p * q;
            }
        }
        // Row sums are 1 within 1e-12, so the image normalizes within the
        // same tolerance; renormalization would mask kernel defects.
        DiscreteDistribution::new(out)
    }

    /// `Pf(x) = E_{y ~ P(x,·)}[f(y)]` for a state function `f`.
    pub fn apply_function(&self, f: &[f64]) -> Result<Vec<f64>> {
        let n = self.len();
        if f.len() != n {
            return Err(Error::DimensionMismatch(format!("function has {} entries, kernel {n}", f.len())));
        }
        Ok(self.matrix.iter().map(|row| dot(row, f)).collect())
    }

    /// Adjoint action on densities: `P*u = Pᵀ u`, so `⟨Pf, u⟩ = ⟨f, P*u⟩`.
    pub fn adjoint_density(&self, u: &[f64]) -> Result<Vec<f64>> {
        let n = self.len();
        if u.len() != n {
            return Err(Error::DimensionMismatch(format!("density has {} entries, kernel {n}", u.len())));
        }
        let mut out = vec![0.0; n];
        for x in 0..n {
            for y in 0..n {
                out[y] += self.matrix[x][y] * u[x];
            }
        }
        Ok(out)
    }

    /// Kernel composition `(PQ)(x, ·)`; remains row-stochastic.
    pub fn compose(&self, other: &FiniteKernel) -> Result<FiniteKernel> {
        let n = self.len();
        if other.len() != n {
            return Err(Error::DimensionMismatch("composed kernels differ in size".into()));
        }
        let mut matrix = vec![vec![0.0; n]; n];
        for x in 0..n {
            for k in 0..n {
                let p = self.matrix[x][k];
                if p == 0.0 {
                    continue;
                }
                for y in 0..n {
                    matrix[x][y] += p * other.matrix[k][y];
                }
            }
        }
        // Composition accumulates one extra rounding layer.
        for row in &mut matrix {
            let s = kahan_sum(row.iter().copied());
            debug_assert!((s - 1.0).abs() < 1e-10);
            for v in row.iter_mut() {
                *v /= s;
            }
        }
        FiniteKernel::with_coords(matrix, self.coords.clone())
    }

    /// Support graph adjacency: `x → y` iff `P(x,y) > 0`.
    fn support(&self) -> Vec<Vec<usize>> {
        self.matrix
            .iter()
            .map(|row| row.iter().enumerate().filter(|(_, p)| **p > 0.0).map(|(y, _)| y).collect())
            .collect()
    }

    fn strongly_connected(&self) -> bool {
        let fwd = self.support();
        let n = self.len();
        let mut rev = vec![Vec::new(); n];
        for (x, ys) in fwd.iter().enumerate() {
            for &y in ys {
                rev[y].push(x);
            }
        }
        let reach = |adj: &[Vec<usize>]| {
            let mut seen = vec![false; n];
            let mut stack = vec![0usize];
            seen[0] = true;
            while let Some(x) = stack.pop() {
                for &y in &adj[x] {
                    if !seen[y] {
                        seen[y] = true;
                        stack.push(y);
                    }
                }
            }
            seen.iter().all(|s| *s)
        };
        reach(&fwd) && reach(&rev)
    }

    /// Period of an irreducible chain: gcd over edges of `level(x)+1-level(y)`
    /// on a BFS tree of the support graph.
    fn period(&self) -> usize {
        let adj = self.support();
        let n = self.len();
        let mut level = vec![usize::MAX; n];
        let mut queue = std::collections::VecDeque::from([0usize]);
        level[0] = 0;
        let mut g: i64 = 0;
        while let Some(x) = queue.pop_front() {
            for &y in &adj[x] {
                if level[y] == usize::MAX {
                    level[y] = level[x] + 1;
                    queue.push_back(y);
                } else {
                    let diff = level[x] as i64 + 1 - level[y] as i64;
                    g = gcd(g.abs(), diff.abs());
                }
            }
        }
        g.max(1) as usize
    }

    /// Unique invariant distribution `π` with `πP = π` within `tol`.
    ///
    /// Irreducibility and aperiodicity are checked on the support graph so
    /// the error cases are deterministic. The solver is power iteration with
    /// Cesàro averaging, falling back to a dense SVD null-space solve for
    /// chains of at most 200 states.
    pub fn invariant_measure(&self, tol: f64) -> Result<DiscreteDistribution> {
        if !self.strongly_connected() {
            return Err(Error::ReducibleChain);
        }
        let period = self.period();
        if period > 1 {
            return Err(Error::Periodic(period));
        }
        let n = self.len();
        let mut pi = DiscreteDistribution::uniform(n);
        let max_iter = 100_000;
        let mut cesaro = vec![0.0; n];
        for it in 1..=max_iter {
            let next = self.apply_distribution(&pi)?;
            for (c, p) in cesaro.iter_mut().zip(next.probs()) {
                *c += p;
            }
            let residual = self
                .residual_invariance(&next)
                .expect("dimension checked");
            if residual <= tol {
                return Ok(next);
            }
            if it % 64 == 0 {
                // Cesàro average damps oscillatory modes.
                let avg = DiscreteDistribution::from_weights(&cesaro)?;
                let avg_res = self.residual_invariance(&avg)?;
                if avg_res <= tol {
                    return Ok(avg);
                }
            }
            pi = next;
            if it == 4096 && n <= 200 {
                if let Some(dense) = self.invariant_dense(tol) {
                    return Ok(dense);
                }
            }
        }
        if n <= 200 {
            if let Some(dense) = self.invariant_dense(tol) {
                return Ok(dense);
            }
        }
        Err(Error::NoConvergence { iterations: max_iter, tol })
    }

    /// `max_y |(πP)(y) - π(y)|`.
    pub fn residual_invariance(&self, pi: &DiscreteDistribution) -> Result<f64> {
        let image = self.apply_distribution(pi)?;
        Ok(image
            .probs()
            .iter()
            .zip(pi.probs())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    fn invariant_dense(&self, tol: f64) -> Option<DiscreteDistribution> {
        let n = self.len();
        // Null space of Pᵀ - I via SVD; right-singular vector of the
        // smallest singular value.
        let a = DMatrix::from_fn(n, n, |i, j| {
            self.matrix[j][i] - if i == j { 1.0 } else { 0.0 }
        });
        let svd = a.svd(false, true);
        let vt = svd.v_t?;
        let idx = svd
            .singular_values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).expect("finite"))?
            .0;
        let row = vt.row(idx);
        let mut v: Vec<f64> = row.iter().copied().collect();
        if v.iter().sum::<f64>() < 0.0 {
            for x in &mut v {
                *x = -*x;
            }
        }
        for x in &mut v {
            *x = x.max(0.0);
        }
        let pi = DiscreteDistribution::from_weights(&v).ok()?;
        (self.residual_invariance(&pi).ok()? <= tol).then_some(pi)
    }

    /// Exact marginals `μ_0, …, μ_{k_max}` with `μ_{k+1} = μ_k P`.
    pub fn iterate_marginals(&self, p0: &DiscreteDistribution, k_max: usize) -> Result<Vec<DiscreteDistribution>> {
        let mut out = Vec::with_capacity(k_max + 1);
        out.push(p0.clone());
        for k in 0..k_max {
            let next = self.apply_distribution(&out[k])?;
            out.push(next);
        }
        Ok(out)
    }

    /// One sampled transition.
    pub fn step(&self, x: usize, rng: &mut Stream) -> usize {
        use rand::Rng;
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (y, p) in self.matrix[x].iter().enumerate() {
            acc += p;
            if u < acc {
                return y;
            }
        }
        self.len() - 1
    }
}

/// Affine-Gaussian kernel `x ↦ N(Ax + b, Σ)`.
///
/// Gaussian inputs stay Gaussian under this kernel, which keeps Poissonized
/// marginals in closed form and enables quadrature-exact KL divergences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineGaussianKernel {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    sigma: Vec<Vec<f64>>,
}

impl AffineGaussianKernel {
    pub fn new(a: Vec<Vec<f64>>, b: Vec<f64>, sigma: Vec<Vec<f64>>) -> Result<Self> {
        let d = b.len();
        if a.len() != d || a.iter().any(|row| row.len() != d) {
            return Err(Error::DimensionMismatch("A is not d x d".into()));
        }
        // Reuse the Gaussian validator for symmetry/PSD of Σ.
        GaussianDistribution::new(vec![0.0; d], sigma.clone())?;
        Ok(Self { a, b, sigma })
    }

    /// Scalar kernel `x ↦ N(a·x + b, σ²)`.
    pub fn scalar(a: f64, b: f64, noise_var: f64) -> Result<Self> {
        Self::new(vec![vec![a]], vec![b], vec![vec![noise_var]])
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn a(&self) -> &[Vec<f64>] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn sigma(&self) -> &[Vec<f64>] {
        &self.sigma
    }

    /// The transition law `P(x, ·) = N(Ax + b, Σ)` from a fixed point.
    pub fn transition_from(&self, x: &[f64]) -> Result<GaussianDistribution> {
        let d = self.dim();
        if x.len() != d {
            return Err(Error::DimensionMismatch("state dimension".into()));
        }
        let mean = (0..d).map(|i| dot(&self.a[i], x) + self.b[i]).collect();
        GaussianDistribution::new(mean, self.sigma.clone())
    }

    /// Pushforward of a Gaussian: mean `A m + b`, covariance `A C Aᵀ + Σ`.
    pub fn apply_distribution(&self, dist: &GaussianDistribution) -> Result<GaussianDistribution> {
        let d = self.dim();
        if dist.dim() != d {
            return Err(Error::DimensionMismatch(format!("distribution dim {} vs kernel dim {d}", dist.dim())));
        }
        let a = DMatrix::from_fn(d, d, |i, j| self.a[i][j]);
        let c = DMatrix::from_fn(d, d, |i, j| dist.cov()[i][j]);
        let m = DVector::from_fn(d, |i, _| dist.mean()[i]);
        let new_mean = &a * m + DVector::from_fn(d, |i, _| self.b[i]);
        let new_cov = &a * c * a.transpose() + DMatrix::from_fn(d, d, |i, j| self.sigma[i][j]);
        let cov = (0..d)
            .map(|i| (0..d).map(|j| 0.5 * (new_cov[(i, j)] + new_cov[(j, i)])).collect())
            .collect();
        GaussianDistribution::new(new_mean.iter().copied().collect(), cov)
    }

    /// Exact Gaussian marginals under repeated application.
    pub fn iterate_marginals(&self, p0: &GaussianDistribution, k_max: usize) -> Result<Vec<GaussianDistribution>> {
        let mut out = Vec::with_capacity(k_max + 1);
        out.push(p0.clone());
        for k in 0..k_max {
            let next = self.apply_distribution(&out[k])?;
            out.push(next);
        }
        Ok(out)
    }

    /// One sampled transition.
    pub fn step(&self, x: &[f64], rng: &mut Stream) -> Result<Vec<f64>> {
        Ok(self.transition_from(x)?.sample(rng))
    }
}

/// Opaque kernel given by a deterministic function of `(state, rng stream)`.
///
/// The same state and stream position always produce the same output, which
/// is what makes ensembles reproducible regardless of worker count.
#[derive(Clone)]
pub struct SampledKernel {
    sampler: Arc<dyn Fn(&[f64], &mut Stream) -> Vec<f64> + Send + Sync>,
    descriptor: String,
}

impl SampledKernel {
    pub fn new(
        descriptor: impl Into<String>,
        sampler: impl Fn(&[f64], &mut Stream) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Self { sampler: Arc::new(sampler), descriptor: descriptor.into() }
    }

    pub fn descriptor(&self) -> &str {
        &self.descriptor
    }

    pub fn step(&self, x: &[f64], rng: &mut Stream) -> Vec<f64> {
        (self.sampler)(x, rng)
    }

    /// Sampled kernels have no exact marginals.
    pub fn iterate_marginals(&self) -> Result<Vec<GaussianDistribution>> {
        Err(Error::NoExactMarginals)
    }
}

impl std::fmt::Debug for SampledKernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SampledKernel").field("descriptor", &self.descriptor).finish()
    }
}

/// Gaussian AR(1) prior `X_{k+1} = (1-γ) X_k + σ N(0, I_d)` together with
/// its invariant law `N(0, σ_π² I)`, where `σ_π² = σ²/(1-(1-γ)²)` solves the
/// variance fixed point `s² = (1-γ)² s² + σ²`.
pub fn ou_prior(gamma: f64, sigma: f64, d: usize) -> Result<(AffineGaussianKernel, GaussianDistribution)> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::ParameterRange(format!("gamma = {gamma} not in (0, 1)")));
    }
    if !(sigma > 0.0) {
        return Err(Error::ParameterRange(format!("sigma = {sigma} not positive")));
    }
    let a = (0..d)
        .map(|i| (0..d).map(|j| if i == j { 1.0 - gamma } else { 0.0 }).collect())
        .collect();
    let noise = (0..d)
        .map(|i| (0..d).map(|j| if i == j { sigma * sigma } else { 0.0 }).collect())
        .collect();
    let kernel = AffineGaussianKernel::new(a, vec![0.0; d], noise)?;
    let var = sigma * sigma / (1.0 - (1.0 - gamma) * (1.0 - gamma));
    let cov = (0..d)
        .map(|i| (0..d).map(|j| if i == j { var } else { 0.0 }).collect())
        .collect();
    let pi = GaussianDistribution::new(vec![0.0; d], cov)?;
    Ok((kernel, pi))
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn flip() -> FiniteKernel {
        FiniteKernel::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()
    }

    #[test]
    fn rejects_non_stochastic_rows() {
        assert!(FiniteKernel::new(vec![vec![0.6, 0.3], vec![0.5, 0.5]]).is_err());
        assert!(FiniteKernel::new(vec![vec![1.2, -0.2], vec![0.5, 0.5]]).is_err());
    }

    #[test]
    fn uniform_invariant_under_doubly_stochastic() {
        let k = FiniteKernel::new(vec![
            vec![0.5, 0.3, 0.2],
            vec![0.2, 0.5, 0.3],
            vec![0.3, 0.2, 0.5],
        ])
        .unwrap();
        let u = DiscreteDistribution::uniform(3);
        let image = k.apply_distribution(&u).unwrap();
        for (a, b) in image.probs().iter().zip(u.probs()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn identity_preserves_point_mass() {
        let k = FiniteKernel::identity(4);
        let d = DiscreteDistribution::point(4, 2);
        assert_eq!(k.apply_distribution(&d).unwrap(), d);
    }

    #[test]
    fn gaussian_pushforward_mean_cov_recursion() {
        // x ↦ N(0.5 x, 0.75) applied to N(1, 1): mean 0.5, var 0.25·1 + 0.75.
        let k = AffineGaussianKernel::scalar(0.5, 0.0, 0.75).unwrap();
        let out = k.apply_distribution(&GaussianDistribution::scalar(1.0, 1.0).unwrap()).unwrap();
        assert_abs_diff_eq!(out.mean()[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(out.var_1d(), 1.0, epsilon = 1e-15);
        // Same recursion from variance 0.75: 0.25·0.75 + 0.75 = 0.9375.
        let out = k.apply_distribution(&GaussianDistribution::scalar(1.0, 0.75).unwrap()).unwrap();
        assert_abs_diff_eq!(out.var_1d(), 0.9375, epsilon = 1e-15);
    }

    #[test]
    fn apply_function_examples() {
        let k = flip();
        assert_eq!(k.apply_function(&[0.0, 1.0]).unwrap(), vec![1.0, 0.0]);
        let id = FiniteKernel::identity(3);
        assert_eq!(id.apply_function(&[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);
        // Constant functions are fixed by any stochastic kernel.
        let k = FiniteKernel::new(vec![vec![0.7, 0.3], vec![0.4, 0.6]]).unwrap();
        let out = k.apply_function(&[2.5, 2.5]).unwrap();
        for v in out {
            assert_abs_diff_eq!(v, 2.5, epsilon = 1e-15);
        }
    }

    #[test]
    fn adjoint_duality_exact() {
        let k = FiniteKernel::new(vec![
            vec![0.2, 0.5, 0.3],
            vec![0.1, 0.6, 0.3],
            vec![0.4, 0.4, 0.2],
        ])
        .unwrap();
        let f = [1.3, -0.4, 2.0];
        let u = [0.5, 0.2, 0.9];
        let pf = k.apply_function(&f).unwrap();
        let pu = k.adjoint_density(&u).unwrap();
        let lhs = dot(&pf, &u);
        let rhs = dot(&f, &pu);
        assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-14);
        // Identity kernel leaves densities unchanged.
        let id = FiniteKernel::identity(3);
        assert_eq!(id.adjoint_density(&u).unwrap(), u.to_vec());
    }

    #[test]
    fn invariant_measure_symmetric_is_uniform() {
        let k = FiniteKernel::new(vec![
            vec![0.5, 0.25, 0.25],
            vec![0.25, 0.5, 0.25],
            vec![0.25, 0.25, 0.5],
        ])
        .unwrap();
        let pi = k.invariant_measure(1e-12).unwrap();
        for p in pi.probs() {
            assert_abs_diff_eq!(*p, 1.0 / 3.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn invariant_measure_birth_death_detailed_balance() {
        // p01 = 0.3, p10 = 0.2, p12 = 0.4, p21 = 0.1:
        // detailed balance gives π ∝ (1, 1.5, 6).
        let k = FiniteKernel::new(vec![
            vec![0.7, 0.3, 0.0],
            vec![0.2, 0.4, 0.4],
            vec![0.0, 0.1, 0.9],
        ])
        .unwrap();
        let pi = k.invariant_measure(1e-13).unwrap();
        let expected = [1.0 / 8.5, 1.5 / 8.5, 6.0 / 8.5];
        for (p, e) in pi.probs().iter().zip(expected) {
            assert_abs_diff_eq!(*p, e, epsilon = 1e-10);
        }
        assert!(k.residual_invariance(&pi).unwrap() <= 1e-12);
    }

    #[test]
    fn invariant_measure_rejects_absorbing_states() {
        let k = FiniteKernel::new(vec![
            vec![1.0, 0.0, 0.0],
            vec![0.3, 0.4, 0.3],
            vec![0.0, 0.0, 1.0],
        ])
        .unwrap();
        assert!(matches!(k.invariant_measure(1e-12), Err(Error::ReducibleChain)));
    }

    #[test]
    fn invariant_measure_rejects_periodic() {
        assert!(matches!(flip().invariant_measure(1e-12), Err(Error::Periodic(2))));
    }

    #[test]
    fn ou_prior_fixed_point() {
        let (kernel, pi) = ou_prior(0.5, 1.0, 1).unwrap();
        assert_abs_diff_eq!(pi.var_1d(), 4.0 / 3.0, epsilon = 1e-15);
        // One step of the kernel reproduces π exactly.
        let image = kernel.apply_distribution(&pi).unwrap();
        assert_abs_diff_eq!(image.mean()[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(image.var_1d(), pi.var_1d(), epsilon = 1e-12);
        // γ → 1 collapses to pure noise.
        let (_, pi) = ou_prior(1.0 - 1e-9, 2.0, 1).unwrap();
        assert_abs_diff_eq!(pi.var_1d(), 4.0, epsilon = 1e-6);
        assert!(ou_prior(0.0, 1.0, 1).is_err());
        assert!(ou_prior(0.5, 0.0, 1).is_err());
    }

    #[test]
    fn iterate_marginals_ou_two_steps() {
        let (kernel, _) = ou_prior(0.5, 1.0, 1).unwrap();
        let p0 = GaussianDistribution::scalar(2.0, 1.0).unwrap();
        let ms = kernel.iterate_marginals(&p0, 2).unwrap();
        assert_eq!(ms.len(), 3);
        assert_abs_diff_eq!(ms[2].mean()[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(ms[2].var_1d(), 1.3125, epsilon = 1e-15);
        // k_max = 0 returns just the initial law.
        let only = kernel.iterate_marginals(&p0, 0).unwrap();
        assert_eq!(only.len(), 1);
        assert_eq!(only[0], p0);
    }

    #[test]
    fn iterate_marginals_identity_is_constant() {
        let id = FiniteKernel::identity(3);
        let p0 = DiscreteDistribution::new(vec![0.2, 0.3, 0.5]).unwrap();
        let ms = id.iterate_marginals(&p0, 4).unwrap();
        for m in &ms {
            assert_eq!(m, &p0);
        }
    }

    #[test]
    fn sampled_kernel_is_deterministic() {
        let k = SampledKernel::new("test shift", |x, rng| {
            use rand::Rng;
            vec![x[0] + rng.gen::<f64>()]
        });
        let a = k.step(&[1.0], &mut crate::rng::stream(3, 5));
        let b = k.step(&[1.0], &mut crate::rng::stream(3, 5));
        assert_eq!(a, b);
        assert!(k.iterate_marginals().is_err());
    }

    #[test]
    fn composition_stays_stochastic() {
        let a = FiniteKernel::new(vec![vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
        let b = flip();
        let c = a.compose(&b).unwrap();
        for row in c.matrix() {
            assert_abs_diff_eq!(kahan_sum(row.iter().copied()), 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn gaussian_kl_closed_form() {
        let p = GaussianDistribution::scalar(0.0, 1.0).unwrap();
        let q = GaussianDistribution::scalar(1.0, 1.0).unwrap();
        assert_abs_diff_eq!(p.kl(&q).unwrap(), 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(p.kl(&p).unwrap(), 0.0, epsilon = 1e-14);
    }
}
