//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by kernel, entropy, bound, and transform operations.
///
/// Numeric *sentinels* are handled separately: a KL divergence with a
/// support violation evaluates to `+∞` rather than erroring, so that bound
/// evaluators stay honest about infinite complexity terms.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("row {row} sums to {sum:.17e}, not 1 within {tol:e}")]
    NotStochastic { row: usize, sum: f64, tol: f64 },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid covariance: {0}")]
    InvalidCovariance(String),

    #[error("parameter out of range: {0}")]
    ParameterRange(String),

    #[error("chain is reducible; invariant measure is not unique")]
    ReducibleChain,

    #[error("chain is periodic with period {0}")]
    Periodic(usize),

    #[error("no convergence after {iterations} iterations at tolerance {tol:e}")]
    NoConvergence { iterations: usize, tol: f64 },

    #[error("exact marginals unavailable for sampled kernels; use Monte Carlo sampling")]
    NoExactMarginals,

    #[error("Poisson truncation needs more than {cap} terms (t = {t})")]
    TruncationCap { cap: usize, t: f64 },

    #[error("unsupported dimension {0}; quadrature handles 1 and 2 only")]
    UnsupportedDimension(usize),

    #[error("positivity violated: {0}")]
    PositivityViolation(String),

    #[error("prior is not invariant under the kernel (max |πP - π| = {residual:.3e})")]
    NonInvariantPrior { residual: f64 },

    #[error("no invariant measure: {0}")]
    NoInvariantMeasure(String),

    #[error("function is constant under π; entropy vanishes and the ratio is undefined")]
    ConstantFunction,

    #[error("absolute continuity violated: {0}")]
    AbsoluteContinuity(String),

    #[error("certificate refused: {0}")]
    CertificateRefused(String),

    #[error("inconsistent moment series: {0}")]
    InconsistentMoments(String),

    #[error("chain is not ergodic: {0}")]
    NotErgodic(String),

    #[error("hessian grid too coarse: step {step:.3e} exceeds σ/10 = {limit:.3e}")]
    GridTooCoarse { step: f64, limit: f64 },

    #[error("growth bound violated: |g_{k}| = {value:.3e} exceeds c·r^k = {bound:.3e}")]
    GrowthBoundViolated { k: usize, value: f64, bound: f64 },

    #[error("sequence too short: need {needed} terms, have {have}")]
    SequenceTooShort { needed: usize, have: usize },

    #[error("imaginary residue {0:.3e} exceeds 1e-8; integrand may not be entire or quadrature is too coarse")]
    ImaginaryResidue(f64),

    #[error("residuals are at the numerical floor; no decay exponent to fit")]
    ResidualAtFloor,

    #[error("unsupported kernel pair for Wasserstein distance: {0}")]
    UnsupportedTransport(String),

    #[error("quadrature failed: {0}")]
    QuadratureFailure(String),
}
