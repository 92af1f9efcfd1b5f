use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty point cloud")]
    EmptyCloud,
    #[error("point cloud needs at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("zero nearest-neighbor distance")]
    ZeroNearestNeighborDistance,
    #[error("invalid point cloud: {0}")]
    InvalidCloud(String),
    #[error("mesh has no triangle with positive area")]
    DegenerateMesh,
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },
    #[error("invalid label {label} at row {row}; expected 0 or 1")]
    InvalidLabel { row: usize, label: u8 },
    #[error("non-finite gradient in parameter `{0}`")]
    NonFiniteGradient(String),
    #[error("non-finite loss at step {0}")]
    NonFiniteLoss(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("seed {index} lies outside the grid")]
    SeedOutsideGrid { index: usize },
    #[error("edge endpoints have the same occupancy class")]
    SameClassEndpoints,
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("bad model file magic")]
    BadMagic,
    #[error("unsupported model file version {0}")]
    UnsupportedVersion(u32),
    #[error("model file truncated while reading {0}")]
    Truncated(&'static str),
    #[error("model file is corrupt: {0}")]
    CorruptModel(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
