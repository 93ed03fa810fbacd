use thiserror::Error;

/// Errors raised by the solvers and geometry routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("singular lattice basis")]
    SingularBasis,
    #[error("group element does not preserve the lattice: {0}")]
    InvalidGroup(String),
    #[error("unknown k-path label `{0}`")]
    UnknownLabel(String),
    #[error("kernel singularity")]
    KernelSingularity,
    #[error("vector is not on the reciprocal lattice")]
    NotReciprocal,
    #[error("negative density")]
    NegativeDensity,
    #[error("empty plane-wave basis")]
    EmptyBasis,
    #[error("eigensolver failure: {0}")]
    Eigensolver(String),
    #[error("insufficient bands: top band still occupied ({0:.3e})")]
    InsufficientBands(f64),
    #[error("Fermi level bracket does not contain the target")]
    FermiBracket,
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("no bound state")]
    NoBoundState,
    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("every scan point failed: {0}")]
    ScanFailed(String),
    #[error("mismatched inputs: {0}")]
    Mismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;
