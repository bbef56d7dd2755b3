use std::path::PathBuf;

use crate::raster::PixelCoord;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot decode {path}: {message}")]
    Decode { path: PathBuf, message: String },

    #[error("unsupported pixel format: {0}")]
    UnsupportedDepth(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate histogram: {0}")]
    DegenerateHistogram(String),

    #[error("threshold iteration did not converge after {iterations} iterations (last iterates {previous} and {last})")]
    NoConvergence {
        iterations: u32,
        previous: f64,
        last: f64,
    },

    #[error("pixel ({}, {}) is not on the skeleton", .0.row, .0.col)]
    OffSkeleton(PixelCoord),

    #[error("no skeleton path between ({}, {}) and ({}, {})", .from.row, .from.col, .to.row, .to.col)]
    Unreachable { from: PixelCoord, to: PixelCoord },

    #[error("cannot place {requested} tracks: only {placed} fit after {attempts} attempts")]
    Capacity {
        requested: usize,
        placed: usize,
        attempts: usize,
    },

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("undefined ratio: {0}")]
    UndefinedRatio(String),

    #[error("malformed counts table at line {line}: {message}")]
    Schema { line: u64, message: String },
}
