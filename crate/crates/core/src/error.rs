use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("I/O error: {0}")]
    Stream(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("mesh has no triangles")]
    EmptyMesh,
    #[error("no triangle within radius {radius} of the query point")]
    EmptySurface { radius: f64 },
    #[error("local surface has zero area")]
    ZeroArea,
    #[error("degenerate scatter matrix (eigenvalues {0:?})")]
    DegenerateScatter([f64; 3]),
    #[error("degenerate local surface: {0}")]
    DegenerateSurface(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("descriptor length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("decimation would leave {0} vertices")]
    TooFewVertices(usize),
    #[error("index needs at least 2 entries, got {0}")]
    IndexTooSmall(usize),
    #[error("model '{name}' has {vertices} vertices, need more than {seeds}")]
    ModelTooSmall {
        name: String,
        vertices: usize,
        seeds: usize,
    },
    #[error("library format: {0}")]
    Format(String),
    #[error("parameter mismatch between library and request: {0}")]
    VersionMismatch(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
