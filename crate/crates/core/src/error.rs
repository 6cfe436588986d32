use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("label error: {0}")]
    Label(String),

    #[error("mesh has no faces")]
    EmptyMesh,

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("resolution {0} is below the minimum of 8 pixels")]
    Resolution(u32),

    #[error("grid {grid_w}x{grid_h} does not fit a {width}x{height} image")]
    Grid {
        grid_w: usize,
        grid_h: usize,
        width: usize,
        height: usize,
    },

    #[error("expected {expected} silhouettes, got {got}")]
    Arity { expected: usize, got: usize },

    #[error("size error: {0}")]
    Size(String),

    #[error("zero off-diagonal distance between {0} and {1}")]
    Singular(usize, usize),

    #[error("manifold has no anchor points")]
    EmptyManifold,

    #[error("unknown part `{0}`")]
    UnknownPart(String),

    #[error("unknown source `{0}`")]
    UnknownSource(String),

    #[error("index contains no shapes")]
    EmptyIndex,

    #[error("dimension mismatch for part `{part}`: expected {expected}, got {got}")]
    Dimension {
        part: String,
        expected: usize,
        got: usize,
    },

    #[error("invalid query: {0}")]
    Query(String),

    #[error("invalid parameters: {0}")]
    Param(String),

    #[error("ground truth shape {0} is not in the index")]
    MissingGroundTruth(u32),

    #[error("duplicate id `{0}`")]
    DuplicateId(String),

    #[error("unsupported index version {0}")]
    Version(u32),

    #[error("corrupt index: {0}")]
    Corruption(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
