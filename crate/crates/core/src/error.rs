use thiserror::Error;

/// Errors surfaced by the numerical layer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("singular reference state")]
    SingularReferenceState,

    #[error("singular state in modular operator")]
    SingularModularState,

    #[error("Moreau requires self-adjoint input (asymmetry {0:.3e})")]
    MoreauNotSelfAdjoint(f64),

    #[error("non-unital input map (residual {0:.3e})")]
    NonUnitalMap(f64),

    #[error("non-Hermitian input (asymmetry {0:.3e})")]
    NotHermitian(f64),

    #[error("mean undefined on spectrum at ({0}, {1})")]
    MeanUndefined(f64, f64),

    #[error("custom mean lacks a diagonal derivative; confluent case rejected")]
    MissingDiagonalDerivative,

    #[error("unsupported tree shape")]
    UnsupportedTreeShape,

    #[error("direction index {0} out of range ({1} directions)")]
    DirectionOutOfRange(usize, usize),

    #[error("unvalidated structure")]
    UnvalidatedStructure,

    #[error("rates not reversible w.r.t. pi (max residual {0:.3e})")]
    RatesNotReversible(f64),

    #[error("V_j must satisfy Delta_sigma V = exp(-omega) V (residual {0:.3e})")]
    NotModularEigenvector(f64),

    #[error("source not in divergence range (residual {0:.3e})")]
    SourceNotInRange(f64),

    #[error("endpoints not connected")]
    EndpointsNotConnected,

    #[error("Ricci scan requires ergodicity")]
    RequiresErgodicity,

    #[error("solver did not converge: {0}")]
    SolverNonConvergence(String),

    #[error("non-convex mean family; pass allow_nonconvex to proceed")]
    NonConvexMean,

    #[error("not a density matrix: {0}")]
    NotDensity(String),

    #[error("not in algebra (projection residual {0:.3e})")]
    NotInAlgebra(f64),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
