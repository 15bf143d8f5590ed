use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("backend {backend} is not supported for {system}")]
    BackendUnsupported {
        system: &'static str,
        backend: &'static str,
    },
    #[error("point {0} lies outside the phase space")]
    DomainError(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("ball mass {target} is not attained at the quantile radius (got {attained})")]
    NotAttained { target: f64, attained: f64 },
    #[error("value {0} lies outside the invertible range of g")]
    OutOfRange(f64),
    #[error("y = {0} lies outside the support of the normalizing formula")]
    UnsupportedY(f64),
    #[error("distribution tail jumps across the 1 - 1/n quantile (n * tail = {0})")]
    DegenerateTail(f64),
    #[error("cylinder has zero mass")]
    ZeroMassCylinder,
    #[error("cannot take the maximum of an empty block")]
    EmptyBlock,
    #[error("hitting-time cap {cap} is too small for t = {t} at target mass {mass}")]
    CapTooSmall { t: f64, mass: f64, cap: u64 },
    #[error("input distribution function is not monotone in [0, 1]")]
    NonMonotoneInput,
    #[error("sample of size {0} is too small")]
    InsufficientSample(usize),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("operation not supported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
