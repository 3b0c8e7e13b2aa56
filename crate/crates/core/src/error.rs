use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty basis: k_max must be at least 1")]
    EmptyBasis,

    #[error("fields live on different mode sets (k_max {left} vs {right})")]
    ModeMismatch { left: usize, right: usize },

    #[error("projection level {n} out of range 1..={dim}")]
    ProjectionOutOfRange { n: usize, dim: usize },

    #[error("aliasing: {grid} grid points per axis cannot resolve k_max = {k_max} (need at least {})", 2 * k_max + 1)]
    Aliasing { grid: usize, k_max: usize },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("invalid generator: {0}")]
    InvalidGenerator(String),

    #[error("unknown regime state {state} (chain has {count} states)")]
    UnknownState { state: usize, count: usize },

    #[error("blow-up at t = {t} on path {path}")]
    BlowUp { t: f64, path: u64 },

    #[error("record too coarse: {0}")]
    RecordTooCoarse(String),

    #[error("missing third moments: E|u0|^3 and the L^3(0,T;V') forcing norm are required for C3")]
    MissingThirdMoments,

    #[error("insufficient samples: need at least {need}, got {got}")]
    InsufficientSamples { need: usize, got: usize },

    #[error("coupled configs differ outside the whitelist in `{0}`")]
    CouplingMismatch(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
