use thiserror::Error;

use crate::map_model::View;

#[derive(Debug, Error)]
pub enum MapError {
    #[error("non-finite or out-of-range coordinate: {0}")]
    NonFinite(String),
    #[error("invalid sector: {0}")]
    InvalidSector(String),
    #[error("view {0:?} is not valid for this feature")]
    InvalidView(View),
    #[error("invalid building: {0}")]
    InvalidBuilding(String),
    #[error("invalid descriptor: {0}")]
    InvalidDescriptor(String),
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("malformed XML at line {line}: {message}")]
    Xml { line: u32, message: String },
    #[error("map JSON schema version mismatch: expected {expected}, found {found}")]
    SchemaVersion { expected: u32, found: u32 },
    #[error("invalid map file: {0}")]
    InvalidMap(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("bit length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("index is empty")]
    EmptyIndex,
    #[error("invalid bit string: {0}")]
    InvalidBits(String),
}

#[derive(Debug, Error)]
pub enum RouteError {
    #[error("no descriptor for location {0}")]
    MissingBsd(u32),
    #[error("no heading for location {0}")]
    MissingHeading(u32),
    #[error("route length must be at least 1")]
    ZeroLength,
    #[error("maximum route length {0} exceeds the supported 64")]
    LengthTooLarge(usize),
    #[error("database has no routes of length {0}")]
    LengthNotBuilt(usize),
    #[error("database file: {0}")]
    Format(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Index(#[from] IndexError),
}

impl RouteError {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        RouteError::Io {
            context: context.into(),
            source,
        }
    }
}

#[derive(Debug, Error)]
pub enum DetectorError {
    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),
    #[error("estimates row {row}: {message}")]
    MalformedRow { row: usize, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("session is lost; reset it before feeding more observations")]
    Lost,
    #[error("missing turn bit for step {0}")]
    MissingTurn(usize),
    #[error("history is empty")]
    EmptyHistory,
    #[error(transparent)]
    Route(#[from] RouteError),
    #[error(transparent)]
    Index(#[from] IndexError),
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("only {available} routes of length {length} exist, {requested} requested")]
    InsufficientRoutes {
        length: usize,
        available: usize,
        requested: usize,
    },
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Route(#[from] RouteError),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Detector(#[from] DetectorError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{}: {source}", path.display())]
    File {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl ExperimentError {
    pub fn file(path: impl Into<std::path::PathBuf>, source: std::io::Error) -> Self {
        ExperimentError::File {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable category, used by the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            ExperimentError::Config(_) => "config",
            ExperimentError::InsufficientRoutes { .. } => "insufficient_routes",
            ExperimentError::Ingest(_) => "ingest",
            ExperimentError::Route(_) => "route",
            ExperimentError::Session(_) => "session",
            ExperimentError::Detector(_) => "detector",
            ExperimentError::Csv(_) => "csv",
            ExperimentError::Json(_) => "json",
            ExperimentError::Io(_) | ExperimentError::File { .. } => "io",
        }
    }
}
