use thiserror::Error;

pub type Result<T, E = QmxError> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QmxError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("axis {0} out of range (expected 1..=3)")]
    AxisOutOfRange(usize),

    #[error("grid too small along axis {axis}: {cells} cells, need at least {needed}")]
    GridTooSmall {
        axis: usize,
        cells: usize,
        needed: usize,
    },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("unsupported Sobolev order {0} (supported: 0..=3)")]
    UnsupportedOrder(usize),

    #[error("insufficient time resolution: {0}")]
    InsufficientTimeResolution(String),

    #[error("state outside the admissible domain: {0}")]
    StateDomainViolation(String),

    #[error("derivative order {requested} exceeds the law's maximum {max}")]
    DerivativeOrder { requested: usize, max: usize },

    #[error("material law defect: {0}")]
    MaterialDefect(String),

    #[error("invalid multi-index: {0}")]
    InvalidMultiIndex(String),

    #[error("missing jet component {0}")]
    MissingJetComponent(String),

    #[error("incomplete jet prefix: need orders through {needed}, have {have}")]
    IncompleteJet { needed: usize, have: usize },

    #[error("unsupported boundary normal {0:?}")]
    UnsupportedNormal([f64; 3]),

    #[error("time step {dt} exceeds the CFL bound {bound}")]
    CflViolation { dt: f64, bound: f64 },

    #[error("non-finite values at t = {t}")]
    NonFinite { t: f64 },

    #[error("Picard iteration stalled after {iterations} iterations (last distance {distance:e})")]
    PicardStalled { iterations: usize, distance: f64 },

    #[error("probe pair does not share the initial jet: {0}")]
    ProbeJetMismatch(String),

    #[error("cone leaves the grid before the horizon: {0}")]
    ConeLeavesGrid(String),

    #[error("experiment aborted: {0}")]
    ExperimentAborted(String),

    #[error("configuration error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for QmxError {
    fn from(e: std::io::Error) -> Self {
        QmxError::Io(e.to_string())
    }
}
