//! Adaptive quadrature and analytic Gaussian-mixture densities.
//!
//! Mixture integrands here are Gaussian-dominated, so adaptive Simpson on
//! `mean ± 10σ` (tensorized in 2-d) reaches absolute tolerances near 1e-9
//! comfortably. Scores and log-density Hessians of mixtures are evaluated
//! analytically per component rather than by differencing.

use crate::error::Error;
use crate::markov::GaussianDistribution;
use crate::poissonize::PoissonMixture;
use crate::Result;
use nalgebra::{DMatrix, DVector};

/// Positivity floor guarding `log` evaluations of density ratios. Values
/// below it indicate an actual support problem and raise instead of being
/// smoothed over.
pub const POSITIVITY_FLOOR: f64 = 1e-300;

const MAX_DEPTH: u32 = 48;

/// Adaptive Simpson integration of `f` on `[a, b]` to absolute tolerance
/// `tol`. Returns the estimate together with an error estimate.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<(f64, f64)> {
    if !(a <= b) {
        return Err(Error::QuadratureFailure(format!("bad interval [{a}, {b}]")));
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let (value, err) = simpson_rec(f, a, b, fa, fm, fb, whole, tol, MAX_DEPTH);
    Ok((value, err))
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> (f64, f64) {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        // Richardson: Simpson error is delta/15.
        (left + right + delta / 15.0, delta.abs() / 15.0)
    } else {
        let (lv, le) = simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1);
        let (rv, re) = simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
        (lv + rv, le + re)
    }
}

/// Integrates `f` over the union of `[a, b]` split at interior kink points,
/// so integrands like `|x| g(x)` stay piecewise smooth.
pub fn integrate_with_kinks<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    kinks: &[f64],
    tol: f64,
) -> Result<(f64, f64)> {
    let mut cuts: Vec<f64> = std::iter::once(a)
        .chain(kinks.iter().copied().filter(|k| *k > a && *k < b))
        .chain(std::iter::once(b))
        .collect();
    cuts.sort_by(|x, y| x.partial_cmp(y).expect("finite"));
    let mut value = 0.0;
    let mut err = 0.0;
    for w in cuts.windows(2) {
        let (v, e) = adaptive_simpson(f, w[0], w[1], tol / cuts.len() as f64)?;
        value += v;
        err += e;
    }
    Ok((value, err))
}

/// Weighted Gaussian-mixture density in 1 or 2 dimensions with analytic
/// derivatives. Weights need not sum to one (Poisson truncation leaves a
/// deficit below the tail tolerance).
#[derive(Debug, Clone)]
pub struct MixtureDensity {
    dim: usize,
    weights: Vec<f64>,
    means: Vec<DVector<f64>>,
    precisions: Vec<DMatrix<f64>>,
    /// `w_k / sqrt((2π)^d det Σ_k)`.
    amplitudes: Vec<f64>,
    min_std: f64,
}

impl MixtureDensity {
    pub fn new(weights: Vec<f64>, components: &[GaussianDistribution]) -> Result<Self> {
        if weights.len() != components.len() || components.is_empty() {
            return Err(Error::DimensionMismatch("weights vs components".into()));
        }
        let dim = components[0].dim();
        if dim == 0 || dim > 2 {
            return Err(Error::UnsupportedDimension(dim));
        }
        let mut means = Vec::with_capacity(components.len());
        let mut precisions = Vec::with_capacity(components.len());
        let mut amplitudes = Vec::with_capacity(components.len());
        let mut min_std = f64::INFINITY;
        for (w, c) in weights.iter().zip(components) {
            if c.dim() != dim {
                return Err(Error::DimensionMismatch("mixed component dimensions".into()));
            }
            let cov = DMatrix::from_fn(dim, dim, |i, j| c.cov()[i][j]);
            let chol = cov
                .clone()
                .cholesky()
                .ok_or_else(|| Error::InvalidCovariance("singular mixture component".into()))?;
            let det: f64 = chol.l().diagonal().iter().map(|x| x * x).product();
            let prec = chol.inverse();
            let eig_min = cov.symmetric_eigen().eigenvalues.min();
            min_std = min_std.min(eig_min.sqrt());
            means.push(DVector::from_fn(dim, |i, _| c.mean()[i]));
            precisions.push(prec);
            amplitudes.push(w / ((2.0 * std::f64::consts::PI).powi(dim as i32) * det).sqrt());
        }
        Ok(Self { dim, weights, means, precisions, amplitudes, min_std })
    }

    /// Mixture from a Poissonized Gaussian law.
    pub fn from_poisson_mixture(mix: &PoissonMixture<GaussianDistribution>) -> Result<Self> {
        Self::new(mix.weights().weights().to_vec(), mix.components())
    }

    /// Single Gaussian as a trivial mixture.
    pub fn from_gaussian(g: &GaussianDistribution) -> Result<Self> {
        Self::new(vec![1.0], std::slice::from_ref(g))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Smallest component standard deviation (smallest eigenvalue root).
    pub fn min_std(&self) -> f64 {
        self.min_std
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        let xv = DVector::from_column_slice(x);
        let mut total = 0.0;
        for k in 0..self.means.len() {
            let d = &xv - &self.means[k];
            let q = (d.transpose() * &self.precisions[k] * &d)[(0, 0)];
            total += self.amplitudes[k] * (-0.5 * q).exp();
        }
        total
    }

    /// Score `∇ log u(x)`.
    pub fn score(&self, x: &[f64]) -> Result<DVector<f64>> {
        let (u, grad, _) = self.derivatives(x)?;
        Ok(grad / u)
    }

    /// Hessian of `log u` at `x`:
    /// `∇²log u = ∇²u / u − (∇u/u)(∇u/u)ᵀ`.
    pub fn log_hessian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let (u, grad, hess) = self.derivatives(x)?;
        let s = grad / u;
        Ok(hess / u - &s * s.transpose())
    }

    /// Density, gradient, and Hessian of the density itself.
    fn derivatives(&self, x: &[f64]) -> Result<(f64, DVector<f64>, DMatrix<f64>)> {
        let xv = DVector::from_column_slice(x);
        let mut u = 0.0;
        let mut grad = DVector::zeros(self.dim);
        let mut hess = DMatrix::zeros(self.dim, self.dim);
        for k in 0..self.means.len() {
            let d = &xv - &self.means[k];
            let pd = &self.precisions[k] * &d;
            let q = (d.transpose() * &pd)[(0, 0)];
            let phi = self.amplitudes[k] * (-0.5 * q).exp();
            u += phi;
            grad += -&pd * phi;
            hess += (&pd * pd.transpose() - &self.precisions[k]) * phi;
        }
        if u < POSITIVITY_FLOOR {
            return Err(Error::PositivityViolation(format!(
                "mixture density {u:.3e} below floor at {x:?}"
            )));
        }
        Ok((u, grad, hess))
    }

    /// Conservative integration box `mean ± spread·σ` covering every
    /// component.
    pub fn support_box(&self, spread: f64) -> Vec<(f64, f64)> {
        let mut box_ = vec![(f64::INFINITY, f64::NEG_INFINITY); self.dim];
        for k in 0..self.means.len() {
            // Use the largest eigenvalue as the componentwise spread scale.
            let sig = self.precisions[k]
                .clone()
                .try_inverse()
                .expect("precision invertible")
                .symmetric_eigen()
                .eigenvalues
                .max()
                .sqrt();
            for i in 0..self.dim {
                let m = self.means[k][i];
                box_[i].0 = box_[i].0.min(m - spread * sig);
                box_[i].1 = box_[i].1.max(m + spread * sig);
            }
        }
        box_
    }

    /// Merges two support boxes.
    pub fn joint_box(&self, other: &MixtureDensity, spread: f64) -> Vec<(f64, f64)> {
        self.support_box(spread)
            .into_iter()
            .zip(other.support_box(spread))
            .map(|(a, b)| (a.0.min(b.0), a.1.max(b.1)))
            .collect()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// `∫ p log(p/q)` for mixture densities by adaptive quadrature over the
/// joint `±10σ` box; 1-d and 2-d only. Returns `(kl, error_estimate)`.
///
/// The integrand uses the `0 log 0 := 0` convention. A vanishing `q` where
/// `p` has mass raises a positivity violation rather than being clamped.
pub fn kl_quadrature(p: &MixtureDensity, q: &MixtureDensity, tol: f64) -> Result<(f64, f64)> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch("KL dims differ".into()));
    }
    let spread = 10.0;
    let boxes = p.joint_box(q, spread);
    let integrand_1d = |x: f64| -> f64 {
        let pv = p.density(&[x]);
        if pv <= 0.0 {
            return 0.0;
        }
        let qv = q.density(&[x]).max(POSITIVITY_FLOOR);
        pv * (pv / qv).ln()
    };
    match p.dim() {
        1 => {
            let (a, b) = boxes[0];
            adaptive_simpson(&integrand_1d, a, b, tol)
        }
        2 => {
            let (ax, bx) = boxes[0];
            let (ay, by) = boxes[1];
            // Iterated adaptive Simpson; the inner tolerance is tightened so
            // the outer estimate stays meaningful.
            let inner_tol = tol / (10.0 * (bx - ax).max(1.0));
            let outer = |x: f64| -> f64 {
                let f = |y: f64| {
                    let pv = p.density(&[x, y]);
                    if pv <= 0.0 {
                        return 0.0;
                    }
                    let qv = q.density(&[x, y]).max(POSITIVITY_FLOOR);
                    pv * (pv / qv).ln()
                };
                adaptive_simpson(&f, ay, by, inner_tol).map(|(v, _)| v).unwrap_or(f64::NAN)
            };
            adaptive_simpson(&outer, ax, bx, tol)
        }
        d => Err(Error::UnsupportedDimension(d)),
    }
}
