use std::path::PathBuf;

use thiserror::Error;

use crate::scene::Point;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("location ({}, {}) is within {guard} m of source {source_index}", .location.x, .location.y)]
    SingularLocation {
        location: Point,
        source_index: usize,
        guard: f64,
    },

    #[error("planar interpolation denominator {denominator:e} is degenerate for source {source_index}")]
    DegenerateInterpolation {
        source_index: usize,
        denominator: f64,
    },

    #[error("reference point coincides with the source (separation {separation:e} m)")]
    DegenerateDirection { separation: f64 },

    #[error("no radius satisfies eps = {eps:e}, even the minimum search radius {min_radius:e} m")]
    NoValidRadius { eps: f64, min_radius: f64 },

    #[error("bad configuration: {0}")]
    BadConfig(String),

    #[error("test grid would have {points} points, over the cap of {cap}")]
    GridTooLarge { points: u64, cap: u64 },

    #[error("could not sample a non-singular location after {retries} retries")]
    SamplingFailed { retries: usize },

    #[error("I/O error on {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum { stored: u32, computed: u32 },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: u64,
        column: String,
        message: String,
    },

    #[error("{} is empty", .0.display())]
    EmptyFile(PathBuf),

    #[error("rows outside the scene extent at lines {lines:?}")]
    OutOfExtent { lines: Vec<u64> },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("reference signal has zero energy")]
    ZeroReference,

    #[error("training diverged at epoch {epoch} (lr = {lr:e}): loss = {loss}")]
    Divergence { epoch: usize, lr: f64, loss: f64 },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
