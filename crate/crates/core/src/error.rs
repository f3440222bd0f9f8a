use thiserror::Error;

/// Errors surfaced by the transform and analysis operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not symmetric: max asymmetry {max_asym:e} exceeds tolerance")]
    NotSymmetric { max_asym: f64 },

    #[error("matrix is not positive semi-definite: eigenvalue {eigenvalue:e}")]
    NotPsd { eigenvalue: f64 },

    #[error("eigenvalue iteration failed to converge after {iterations} iterations (best residual {residual:e})")]
    Convergence {
        iterations: usize,
        residual: f64,
        best: Vec<f64>,
    },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("degenerate localized measure: total weight {total:e}")]
    DegenerateMeasure { total: f64 },

    #[error("negative anisotropy weight: {0}")]
    NegativeLambda(f64),

    #[error("infeasible transport marginals: masses differ by {0:e}")]
    InfeasibleMarginals(f64),

    #[error("problem size {n} exceeds the exact-transport cap {cap}; use the Gaussian transform instead")]
    SizeGuard { n: usize, cap: usize },

    #[error("word not in embedding vocabulary: {0}")]
    OutOfVocabulary(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("rank correlation undefined: zero rank variance")]
    UndefinedCorrelation,

    #[error("too few scoreable pairs: {0}")]
    TooFewPairs(usize),

    #[error("missing covariance field for the current state")]
    MissingCovariances,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
