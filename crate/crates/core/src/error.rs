use thiserror::Error;

/// Errors raised by the simulation backends.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    Lattice(String),

    #[error("invalid couplings: {0}")]
    Couplings(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid subsystem: {0}")]
    Subsystem(String),

    #[error("invalid time grid: {0}")]
    TimeGrid(String),

    #[error("krylov step failed to converge on [{t0}, {t1}] (error estimate {estimate:e})")]
    KrylovConvergence { t0: f64, t1: f64, estimate: f64 },

    #[error("system of {sites} sites exceeds the configured limit of {limit}")]
    TooLarge { sites: usize, limit: usize },

    #[error("tree spec: {0}")]
    TreeSpec(String),

    #[error("bipartition {requested:?} is not aligned with a tree node; compatible cuts nearby: {nearest:?}")]
    UnalignedCut {
        requested: (usize, usize),
        nearest: Vec<(usize, usize)>,
    },

    #[error("integrator step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("orthonormality residual {residual:e} at node {node} exceeds {limit:e} (t = {t})")]
    Orthonormality {
        node: usize,
        residual: f64,
        limit: f64,
        t: f64,
    },

    #[error("trajectory {trajectory}: {quantity} drift {drift:e} exceeds tolerance {tolerance:e}")]
    Instability {
        trajectory: usize,
        quantity: &'static str,
        drift: f64,
        tolerance: f64,
    },

    #[error("series mismatch: {0}")]
    Series(String),

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
