use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-Lipschitz parametrization point (segment {segment}, t = {t})")]
    DegenerateTangent { segment: usize, t: f64 },

    #[error("empty flaring set: no boundary point with x in ({lo}, {hi})")]
    EmptyFlaringSet { lo: f64, hi: f64 },

    #[error("unknown domain '{0}'")]
    UnknownDomain(String),

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid cross-section: {0}")]
    InvalidCrossSection(String),

    #[error("mode index {index} out of range (basis has {len} modes)")]
    ModeIndex { index: usize, len: usize },

    #[error("grid: {0}")]
    Grid(String),

    #[error("weight: {0}")]
    Weight(String),

    #[error("threshold point: closure singular (mode {mode})")]
    ThresholdPoint { mode: usize },

    #[error("near-singular: possible resonance at this sheet point ({0})")]
    NearSingular(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("construction failed: {0}")]
    Construction(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
