use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("face {face} references vertex {index} but the mesh has {vertex_count} vertices")]
    IndexOutOfRange {
        face: usize,
        index: i64,
        vertex_count: usize,
    },

    #[error("face {face} references vertex {vertex} more than once")]
    RepeatedVertex { face: usize, vertex: u32 },

    #[error("mesh has no faces")]
    NoFaces,

    #[error("mesh bounding box has zero extent")]
    DegenerateMesh,

    #[error("face {0} is degenerate (area below threshold)")]
    DegenerateFace(usize),

    #[error("mesh has zero surface area")]
    ZeroArea,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("salient edge set was built for a mesh with {expected} vertices, got {actual}")]
    MeshMismatch { expected: usize, actual: usize },

    #[error("unknown mesh id in report rows: {0}")]
    UnknownMeshId(String),

    #[error("empty point set")]
    EmptyPointSet,

    #[error("every view produced an empty edge mask")]
    EmptyMasks,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("training diverged at step {step}: loss = {loss}")]
    Diverged { step: usize, loss: f64 },

    #[error("extracted surface is empty (grid is entirely inside or outside)")]
    EmptySurface,

    #[error("mesh is not watertight and no analytic occupancy oracle is available")]
    NotWatertight,

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("invalid checkpoint or point cloud file: {0}")]
    InvalidBinary(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
