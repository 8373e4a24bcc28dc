use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("scenario line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("empty street set")]
    EmptyStreetSet,

    #[error("weights violate boundary conditions: {0}")]
    InvalidWeights(String),

    #[error("scenario has no free cells for sensor placement")]
    NoFreeCells,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("selection pool has {pool} chromosomes, need at least {needed}")]
    PoolTooSmall { pool: usize, needed: usize },

    #[error("chromosome {0} has not been evaluated")]
    Unevaluated(usize),

    #[error("no translation axis declared")]
    NoTranslationAxis,

    #[error("gene at ({x}, {y}) is not on a free cell")]
    InvalidGene { x: i64, y: i64 },

    #[error("layout: {0}")]
    Layout(String),

    #[error("fragments have mismatched sensor specs: {0}")]
    SensorSpecMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
