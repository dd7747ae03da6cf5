use thiserror::Error;

/// Coarse grouping used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Numerical,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("parameter {name} must be positive, got {value}")]
    NonPositiveParameter { name: &'static str, value: f64 },

    #[error("port ordering violated: {0} does not hold strictly")]
    PortOrderingViolated(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("eigenvalue must be negative for a time constant, got {0}")]
    NonNegativeEigenvalue(f64),

    #[error("|lambda| = {lambda} is below the asymptotic threshold {threshold}")]
    ThresholdTooSmall { lambda: f64, threshold: f64 },

    #[error("log-scale overflow while evaluating the return map at lambda = {0}")]
    Overflow(f64),

    #[error("equal velocities: the dominant eigenvalue is exactly 0, no bracket needed")]
    LimitCaseHasNoBracket,

    #[error("operation requires strict port inequalities")]
    NotStrictPorts,

    #[error("operation requires equal velocities")]
    NotLimitCase,

    #[error("v = 1 makes the vanishing-imaginary index undefined")]
    DivisionByZero,

    #[error("no sign change of Delta on [{lo}, {hi}] ({evaluations} evaluations, min log|Delta| = {min_log_abs})")]
    NoSignChangeFound {
        lo: f64,
        hi: f64,
        evaluations: usize,
        min_log_abs: f64,
    },

    #[error("eigenvalue solver failed: {0}")]
    EigSolverFailure(String),

    #[error("not an eigenvalue: relative smallest singular value {0:e}")]
    NotAnEigenvalue(f64),

    #[error("nullspace has dimension >= 2 (second smallest relative singular value {0:e})")]
    DegenerateNullspace(f64),

    #[error("boundary system is singular (relative smallest singular value {0:e})")]
    SingularSystem(f64),

    #[error("direct/adjoint pairing is numerically zero")]
    NearZeroPairing,

    #[error("sensitivity denominator is numerically zero")]
    ZeroDenominator,

    #[error("Courant parameter p = {p} outside (0, {max})")]
    BadCfl { p: f64, max: f64 },

    #[error("non-finite value at step {0}")]
    NonFiniteDetected(usize),

    #[error("need at least {needed} samples in the fit window, found {found}")]
    InsufficientSamples { needed: usize, found: usize },

    #[error("reference profile is zero or orthogonal to the state")]
    ZeroProfile,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::NonPositiveParameter { .. }
            | Error::PortOrderingViolated(_)
            | Error::InvalidArgument(_)
            | Error::NonNegativeEigenvalue(_)
            | Error::ThresholdTooSmall { .. }
            | Error::LimitCaseHasNoBracket
            | Error::NotStrictPorts
            | Error::NotLimitCase
            | Error::DivisionByZero
            | Error::BadCfl { .. } => ErrorClass::Validation,
            _ => ErrorClass::Numerical,
        }
    }
}
