use num_complex::Complex64;
use thiserror::Error;

/// Broad failure class, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Input,
    Unstable,
    Solver,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {reason}")]
    InvalidInput { path: String, reason: String },

    #[error("matrix dimensions do not match: {0}")]
    Dimension(String),

    #[error("unstable model: traffic intensity {rho:.6} >= 1")]
    Unstable { rho: f64 },

    #[error("simulation queue exceeded guard {guard} (model is unstable or guard too small)")]
    QueueGuard { guard: usize },

    #[error("singular Kronecker-sum system at z = {z}")]
    SingularKernel { z: Complex64 },

    #[error("kernel coefficients reached L = {len} with residual {residual:.3e} > target {target:.3e}")]
    KernelTruncation { len: usize, residual: f64, target: f64 },

    #[error("interpolation is rank deficient (duplicate or too few nodes)")]
    RankDeficient,

    #[error("expected {expected} roots in the closed unit disk, found {found}; roots: {roots}")]
    RootCount { expected: usize, found: usize, roots: String },

    #[error("root {root} lies on the unit circle (only z = 1 is allowed there)")]
    RootOnCircle { root: Complex64 },

    #[error("z = 1 is not a simple root of the characteristic determinant ({0})")]
    UnitRootNotSimple(String),

    #[error("boundary system is ill-conditioned (condition {condition:.3e}); roots: {roots}")]
    IllConditioned { condition: f64, roots: String },

    #[error("boundary solutions for components {a} and {b} differ by {diff:.3e}")]
    ComponentMismatch { a: usize, b: usize, diff: f64 },

    #[error("numerator is not divisible by the inside factor at {root} (relative remainder {remainder:.3e})")]
    NotDivisible { root: Complex64, remainder: f64 },

    #[error("partial-fraction reconstruction error {error:.3e} at z = {z}")]
    Reconstruction { z: Complex64, error: f64 },

    #[error("negative probability {value:.3e} in {table}")]
    Negative { table: &'static str, value: f64 },

    #[error("normalization check failed for {what}: total {total:.12}")]
    Normalization { what: &'static str, total: f64 },

    #[error("{0}")]
    Solver(String),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidInput { .. } | Error::Dimension(_) => ErrorKind::Input,
            Error::Unstable { .. } | Error::QueueGuard { .. } => ErrorKind::Unstable,
            _ => ErrorKind::Solver,
        }
    }

    pub(crate) fn input(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidInput { path: path.into(), reason: reason.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
