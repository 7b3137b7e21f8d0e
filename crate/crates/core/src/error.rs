use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (u32, u32),
        actual: (u32, u32),
    },

    #[error("invalid mask: {0}")]
    InvalidMask(String),

    #[error("grid too small: {width}x{height} cannot be split into 3x3 cells")]
    GridTooSmall { width: u32, height: u32 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("corpus needs at least {required} items, got {actual}")]
    CorpusTooSmall { required: usize, actual: usize },

    #[error("vector error: {0}")]
    Vector(String),

    #[error("no proposal contains any query point")]
    NoSeedProposal,

    #[error("point ({row}, {col}) outside {width}x{height} image")]
    PointOutOfBounds {
        row: u32,
        col: u32,
        width: u32,
        height: u32,
    },

    #[error("could not produce {wanted} distinct captions in {attempts} attempts")]
    CaptionExhausted { wanted: usize, attempts: usize },

    #[error("infeasible synthetic spec: {0}")]
    InfeasibleSpec(String),

    #[error("nonpositive loss value {value} for task {task}")]
    NonPositiveLoss { task: usize, value: f64 },

    #[error("all task gradients are zero")]
    ZeroGradients,

    #[error("training diverged at step {step}: loss {loss}")]
    Diverged { step: usize, loss: f64 },

    #[error("missing file for example {example}: {path}")]
    MissingFile { example: String, path: PathBuf },

    #[error("malformed {what}: {detail}")]
    Malformed { what: String, detail: String },

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}
