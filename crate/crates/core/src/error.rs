use thiserror::Error;

/// Errors raised by the quantization laboratory.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("quadrature grid of exact degree {have} cannot resolve degree {need}")]
    GridTooCoarse { have: usize, need: usize },

    #[error("band limit {band} exceeds the budget {max}")]
    BandOverflow { band: usize, max: usize },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("matrix is not Hermitian (drift {drift:e})")]
    NotHermitian { drift: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("need at least {need} levels, got {got}")]
    InsufficientLevels { need: usize, got: usize },

    #[error("ill-conditioned system: {0}")]
    IllConditioned(String),

    #[error("POVM element {index} has eigenvalue {value:e} below tolerance")]
    NegativeElement { index: usize, value: f64 },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("metric is not positive definite at grid point {index} (theta={theta:.6}, phi={phi:.6})")]
    NonPositiveMetric { index: usize, theta: f64, phi: f64 },

    #[error("quantization is not SU(2)-equivariant: generator residual {residual:e}")]
    NotEquivariant { residual: f64 },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("levels {coarse} and {fine} do not form a (k, 2k) pair")]
    LevelMismatch { coarse: usize, fine: usize },

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
