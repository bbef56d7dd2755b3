//! Counting of fission tracks, including overlapping clusters, in grayscale
//! photomicrographs, plus the track statistics computed from the counts.
//!
//! The per-image pipeline is median filter, global threshold, binary
//! clean-up, region labeling, skeletonization, and per-region separation of
//! overlapping tracks (see [`pipeline::count_image`]).

pub mod binarize;
pub mod error;
pub mod ftstats;
pub mod overlay;
pub mod pipeline;
pub mod raster;
pub mod report;
pub mod synth;
pub mod topo;
pub mod trackseg;

pub use error::{Error, Result};
