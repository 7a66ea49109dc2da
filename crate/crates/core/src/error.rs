use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("feature is not unit norm (norm = {norm})")]
    NotUnitNorm { norm: f64 },

    #[error("vector norm {norm:e} too small to normalize")]
    DegenerateNorm { norm: f64 },

    #[error("invalid point cloud: {0}")]
    InvalidPointCloud(String),

    #[error("invalid segment graph: {0}")]
    InvalidGraph(String),

    #[error("invalid rigid transform: {0}")]
    InvalidTransform(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("infeasible placement: {0}")]
    Placement(String),

    #[error("match problem has {pairs} node pairs, above the cap of {cap}")]
    SizeCap { pairs: usize, cap: usize },

    #[error("solver timed out after {elapsed_ms} ms")]
    Timeout { elapsed_ms: u128 },

    #[error("degenerate correspondence set: {0}")]
    DegenerateCorrespondences(String),

    #[error("point cloud has {found} points, at least 3 are required")]
    TooFewPoints { found: usize },

    #[error("missing cloud for segment {segment} in scene {scene}")]
    MissingSegment { scene: usize, segment: usize },

    #[error("training diverged at epoch {epoch}: {detail}")]
    Divergence { epoch: usize, detail: String },

    #[error("label sets do not cover the same elements: {0}")]
    MaskMismatch(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json { path: path.into(), source }
    }

    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage { stage, source: Box::new(e) },
        }
    }
}
