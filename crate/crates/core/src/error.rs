use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix dimension must be at least 1")]
    EmptyMatrix,

    #[error("matrix is not Hermitian (max |A - A^H| = {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("eigendecomposition failed to converge (dim {dim}, condition estimate {condition:e})")]
    EigenFailure { dim: usize, condition: f64 },

    #[error("matrix exponential overflow: max eigenvalue {max_eigenvalue}")]
    ExpOverflow { max_eigenvalue: f64 },

    #[error("matrix logarithm undefined: eigenvalue {min_eigenvalue:e} is negative")]
    LogDomain { min_eigenvalue: f64 },

    #[error(
        "matrix is singular (min eigenvalue {min_eigenvalue:e}); pass a regularization alpha > 0"
    )]
    Singular { min_eigenvalue: f64 },

    #[error("not a density matrix: {0}")]
    NotDensity(String),

    #[error("distortion matrix is not positive semi-definite (min eigenvalue {min_eigenvalue:e})")]
    DistortionNotPsd { min_eigenvalue: f64 },

    #[error("degenerate state: trace {trace:e} outside the admissible range")]
    DegenerateState { trace: f64 },

    #[error("off-structure mass {mass:e} exceeds the symmetric-space tolerance")]
    StructureViolation { mass: f64 },

    #[error("no root of G(beta): bracket expansion failed after {doublings} doublings")]
    NoRoot { doublings: usize },

    #[error("exponent overflow in G(beta): (beta_k - beta) * lambda = {exponent}")]
    GOverflow { exponent: f64 },

    #[error("closed-form beta update needs a positive log argument, got {argument:e}")]
    BetaLogDomain { argument: f64 },

    #[error("distortion {d} is below the minimum achievable distortion")]
    Infeasible { d: f64 },

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn at(self, iteration: usize) -> Error {
        match self {
            e @ Error::AtIteration { .. } => e,
            e => Error::AtIteration {
                iteration,
                source: Box::new(e),
            },
        }
    }
}
