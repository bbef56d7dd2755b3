//! Whole-image counting: filter, threshold, clean up, label, count.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::binarize::{
    apply_threshold, clear_lower_right, compute_histogram, fill_holes, remove_small_objects, threshold,
    Method, Polarity, ThresholdResult, DEFAULT_MIN_SIZE,
};
use crate::error::{Error, Result};
use crate::raster::{median_filter, BinaryImage, GrayImage};
use crate::topo::label_regions;
use crate::trackseg::{count_region, RegionCount};

pub const DEFAULT_WINDOW: (usize, usize) = (7, 7);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountConfig {
    pub method: Method,
    /// overrides `method` when set
    pub manual_threshold: Option<u8>,
    pub polarity: Polarity,
    pub window: (usize, usize),
    pub min_size: usize,
}

impl Default for CountConfig {
    fn default() -> Self {
        Self {
            method: Method::Isodata,
            manual_threshold: None,
            polarity: Polarity::DarkForeground,
            window: DEFAULT_WINDOW,
            min_size: DEFAULT_MIN_SIZE,
        }
    }
}

impl CountConfig {
    pub fn with_method(method: Method) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountReport {
    /// caller-supplied identifier, usually the file name
    pub image: String,
    pub config: CountConfig,
    pub width: usize,
    pub height: usize,
    /// `None` when the filtered image has a single intensity
    pub threshold: Option<ThresholdResult>,
    pub total_tracks: usize,
    pub n_regions: usize,
    pub regions: Vec<RegionCount>,
    pub elapsed_s: f64,
    /// cleaned binary image the regions were taken from
    #[serde(skip)]
    pub mask: Option<BinaryImage>,
}

impl CountReport {
    /// Equality ignoring wall-clock timing.
    pub fn same_counts(&self, other: &CountReport) -> bool {
        self.config == other.config
            && self.width == other.width
            && self.height == other.height
            && self.threshold == other.threshold
            && self.total_tracks == other.total_tracks
            && self.regions == other.regions
    }
}

/// Binary image after thresholding and the three clean-up steps.
pub fn binarize_image(img: &GrayImage, cfg: &CountConfig) -> Result<(BinaryImage, Option<ThresholdResult>)> {
    let filtered = median_filter(img, cfg.window)?;
    let t = match cfg.manual_threshold {
        Some(t) => Some(ThresholdResult::manual(t, cfg.polarity)),
        None => match threshold(&compute_histogram(&filtered), cfg.method) {
            Ok(t) => Some(t.with_polarity(cfg.polarity)),
            Err(Error::DegenerateHistogram(_)) => None,
            Err(e) => return Err(e),
        },
    };
    let Some(t) = t else {
        return Ok((BinaryImage::empty(img.width(), img.height())?, None));
    };
    let bin = apply_threshold(&filtered, &t);
    let bin = remove_small_objects(&bin, cfg.min_size);
    let bin = fill_holes(&bin);
    let bin = clear_lower_right(&bin);
    Ok((bin, Some(t)))
}

pub fn count_image(img: &GrayImage, cfg: &CountConfig) -> Result<CountReport> {
    let start = Instant::now();
    let (bin, threshold) = binarize_image(img, cfg)?;
    let regions = label_regions(&bin)
        .regions()
        .iter()
        .map(count_region)
        .collect::<Result<Vec<_>>>()?;
    let total_tracks = regions.iter().map(|r| r.n_tracks).sum();
    Ok(CountReport {
        image: String::new(),
        config: *cfg,
        width: img.width(),
        height: img.height(),
        threshold,
        total_tracks,
        n_regions: regions.len(),
        regions,
        elapsed_s: start.elapsed().as_secs_f64(),
        mask: Some(bin),
    })
}

impl CountReport {
    pub fn with_image(mut self, image: impl Into<String>) -> Self {
        self.image = image.into();
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blank_image_has_no_tracks() {
        let img = GrayImage::filled(64, 48, 180).unwrap();
        let r = count_image(&img, &CountConfig::default()).unwrap();
        assert_eq!(r.total_tracks, 0);
        assert!(r.threshold.is_none());
    }

    #[test]
    fn one_dark_bar() {
        let img = GrayImage::from_fn(80, 60, |r, c| {
            if (20..27).contains(&r) && (10..50).contains(&c) {
                40
            } else {
                200
            }
        })
        .unwrap();
        let r = count_image(&img, &CountConfig::default()).unwrap();
        assert_eq!(r.total_tracks, 1);
        assert_eq!(r.n_regions, 1);
    }

    #[test]
    fn manual_threshold_overrides_method() {
        let img = GrayImage::from_fn(40, 40, |r, c| if (10..17).contains(&r) && c < 30 { 40 } else { 200 })
            .unwrap();
        let cfg = CountConfig {
            manual_threshold: Some(20),
            ..CountConfig::default()
        };
        let r = count_image(&img, &cfg).unwrap();
        assert_eq!(r.total_tracks, 0);
        assert_eq!(r.threshold.unwrap().method, Method::Manual);
    }
}
