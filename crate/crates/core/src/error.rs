use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

/// Coarse classification used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Invalid input or violated precondition.
    Precondition,
    /// A numerical guard tripped (grid support, trial cap, positivity).
    NumericGuard,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("layout {dim_s}x{dim_m} cannot index an object of dimension {found}")]
    Layout {
        dim_s: usize,
        dim_m: usize,
        found: usize,
    },

    #[error("dimension must be positive")]
    EmptyDimension,

    #[error("operator is not {tag} (deviation {deviation:e})")]
    Tag { tag: &'static str, deviation: f64 },

    #[error("zero vector does not determine a ray")]
    ZeroVector,

    #[error("state is not normalized (|v|^2 = {norm_sqr})")]
    NotNormalized { norm_sqr: f64 },

    #[error("invalid density matrix: {reason} ({value:e})")]
    InvalidDensity { reason: &'static str, value: f64 },

    #[error("invalid resolution of the identity: {reason} (deviation {deviation:e})")]
    InvalidResolution {
        reason: &'static str,
        deviation: f64,
    },

    #[error("{name} = {value} is outside {domain}")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("meter offset B00 = {b00} must vanish for the epsilon -> 0 limit")]
    MeterOffset { b00: f64 },

    #[error("V does not fix s (|Vs - s| = {deviation:e})")]
    UnitaryMovesState { deviation: f64 },

    #[error("weak value undefined: |<f,s>|^2 = {overlap_sqr:e}")]
    UndefinedWeakValue { overlap_sqr: f64 },

    #[error("postselection probability {probability:e} is below the degeneracy floor")]
    DegeneratePostselection { probability: f64 },

    #[error("protocol normalization violated: {what} = {value}")]
    ProtocolNormalization { what: &'static str, value: f64 },

    #[error("invalid grid: {reason}")]
    Grid { reason: &'static str },

    #[error("meter mass {mass:e} lies in the boundary band of the grid")]
    GridSupport { mass: f64 },

    #[error("meter function invalid on grid: {what} = {value:e}")]
    MeterState { what: &'static str, value: f64 },

    #[error("bin width {lambda} must exceed the grid spacing {spacing}")]
    BinResolution { lambda: f64, spacing: f64 },

    #[error("eigenvalue {value:e} is too negative to repair")]
    NegativeEigenvalue { value: f64 },

    #[error("no trial passed postselection")]
    EmptyConditional,

    #[error("probabilities do not form a distribution (total {total})")]
    InvalidDistribution { total: f64 },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::GridSupport { .. }
            | Error::NegativeEigenvalue { .. }
            | Error::EmptyConditional => ErrorKind::NumericGuard,
            _ => ErrorKind::Precondition,
        }
    }
}
