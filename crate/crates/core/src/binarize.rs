//! Global histogram thresholds and the binary clean-up tools applied after
//! thresholding.
//!
//! Thresholds are expressed as a cut `T` on the 8-bit scale: the lower class
//! is `{v <= T}`, the upper class `{v > T}`. Every criterion is evaluated only
//! on cuts that leave both classes populated.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{BinaryImage, GrayImage};
use crate::topo::label_regions;

/// Default lower bound on region size kept by [`remove_small_objects`].
pub const DEFAULT_MIN_SIZE: usize = 25;

const LI_MAX_ITER: u32 = 100;
const ISODATA_MAX_ITER: u32 = 256;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram {
    bins: [u64; 256],
    total: u64,
}

impl Histogram {
    pub fn from_bins(bins: [u64; 256]) -> Self {
        let total = bins.iter().sum();
        Self { bins, total }
    }

    pub fn bins(&self) -> &[u64; 256] {
        &self.bins
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// First and last populated intensities.
    fn support(&self) -> Option<(usize, usize)> {
        let lo = self.bins.iter().position(|&b| b > 0)?;
        let hi = self.bins.iter().rposition(|&b| b > 0)?;
        Some((lo, hi))
    }

    /// Range of admissible cuts `lo..hi` (both classes populated).
    fn cut_range(&self) -> Result<(usize, usize)> {
        match self.support() {
            Some((lo, hi)) if lo < hi => Ok((lo, hi)),
            Some((lo, _)) => Err(Error::DegenerateHistogram(format!(
                "all {} pixels have intensity {lo}",
                self.total
            ))),
            None => Err(Error::DegenerateHistogram("histogram is empty".into())),
        }
    }

    fn mean(&self) -> f64 {
        let s: f64 = self
            .bins
            .iter()
            .enumerate()
            .map(|(i, &b)| i as f64 * b as f64)
            .sum();
        s / self.total as f64
    }
}

pub fn compute_histogram(img: &GrayImage) -> Histogram {
    let mut bins = [0u64; 256];
    for &v in img.pixels() {
        bins[v as usize] += 1;
    }
    Histogram::from_bins(bins)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Otsu,
    Yen,
    Li,
    Isodata,
    Manual,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Otsu => "otsu",
            Method::Yen => "yen",
            Method::Li => "li",
            Method::Isodata => "isodata",
            Method::Manual => "manual",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "otsu" => Ok(Method::Otsu),
            "yen" => Ok(Method::Yen),
            "li" => Ok(Method::Li),
            "isodata" => Ok(Method::Isodata),
            "manual" => Ok(Method::Manual),
            other => Err(Error::InvalidParameter(format!(
                "unknown binarization method '{other}'"
            ))),
        }
    }
}

/// Which side of the threshold is foreground.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    /// Foreground is `v <= T` (etched tracks are dark in transmitted light).
    #[default]
    DarkForeground,
    /// Foreground is `v > T`.
    BrightForeground,
}

impl FromStr for Polarity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dark" | "darkforeground" => Ok(Polarity::DarkForeground),
            "bright" | "brightforeground" => Ok(Polarity::BrightForeground),
            other => Err(Error::InvalidParameter(format!("unknown polarity '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub method: Method,
    pub threshold: u8,
    pub iterations: u32,
    pub polarity: Polarity,
}

impl ThresholdResult {
    pub fn manual(threshold: u8, polarity: Polarity) -> Self {
        Self {
            method: Method::Manual,
            threshold,
            iterations: 0,
            polarity,
        }
    }

    fn found(method: Method, threshold: usize, iterations: u32) -> Self {
        Self {
            method,
            threshold: threshold as u8,
            iterations,
            polarity: Polarity::DarkForeground,
        }
    }

    pub fn with_polarity(mut self, polarity: Polarity) -> Self {
        self.polarity = polarity;
        self
    }
}

/// Dispatches to the automatic method named by `method`.
pub fn threshold(h: &Histogram, method: Method) -> Result<ThresholdResult> {
    match method {
        Method::Otsu => threshold_otsu(h),
        Method::Yen => threshold_yen(h),
        Method::Li => threshold_li(h),
        Method::Isodata => threshold_isodata(h),
        Method::Manual => Err(Error::InvalidParameter(
            "manual thresholding needs an explicit threshold value".into(),
        )),
    }
}

/// Cumulative sums over the histogram: counts, first moments and squared
/// probabilities, each with a leading zero so that `cum[t + 1]` covers `0..=t`.
struct Cumulative {
    count: Vec<f64>,
    moment: Vec<f64>,
    square: Vec<f64>,
}

impl Cumulative {
    fn new(h: &Histogram) -> Self {
        let total = h.total as f64;
        let mut count = vec![0.0; 257];
        let mut moment = vec![0.0; 257];
        let mut square = vec![0.0; 257];
        for (i, &b) in h.bins.iter().enumerate() {
            let b = b as f64;
            let p = b / total;
            count[i + 1] = count[i] + b;
            moment[i + 1] = moment[i] + b * i as f64;
            square[i + 1] = square[i] + p * p;
        }
        Self {
            count,
            moment,
            square,
        }
    }
}

/// Returns the first cut maximising `score` (smallest `T` on ties).
fn argmax(range: (usize, usize), score: impl Fn(usize) -> f64) -> usize {
    let mut best_t = range.0;
    let mut best = f64::NEG_INFINITY;
    for t in range.0..range.1 {
        let s = score(t);
        if s > best {
            best = s;
            best_t = t;
        }
    }
    best_t
}

/// Otsu: maximise the between-class variance `w0 w1 (mu0 - mu1)^2`.
pub fn threshold_otsu(h: &Histogram) -> Result<ThresholdResult> {
    let range = h.cut_range()?;
    let cum = Cumulative::new(h);
    let n = h.total as f64;
    let s = cum.moment[256];
    let t = argmax(range, |t| {
        let w0 = cum.count[t + 1];
        let w1 = n - w0;
        let m0 = cum.moment[t + 1] / w0;
        let m1 = (s - cum.moment[t + 1]) / w1;
        w0 * w1 * (m0 - m1) * (m0 - m1)
    });
    Ok(ThresholdResult::found(Method::Otsu, t, 0))
}

/// Yen's maximum-correlation criterion.
pub fn threshold_yen(h: &Histogram) -> Result<ThresholdResult> {
    let range = h.cut_range()?;
    let cum = Cumulative::new(h);
    let n = h.total as f64;
    let sq_total = cum.square[256];
    let t = argmax(range, |t| {
        let p = cum.count[t + 1] / n;
        let g_lo = cum.square[t + 1];
        let g_hi = sq_total - g_lo;
        -(g_lo * g_hi).ln() + 2.0 * (p * (1.0 - p)).ln()
    });
    Ok(ThresholdResult::found(Method::Yen, t, 0))
}

/// Class means on the `v + 1` scale used by the cross-entropy criterion.
fn shifted_means(cum: &Cumulative, t: usize) -> (f64, f64) {
    let lo_n = cum.count[t + 1];
    let hi_n = cum.count[256] - lo_n;
    let lo_m = cum.moment[t + 1] + lo_n;
    let hi_m = cum.moment[256] + cum.count[256] - lo_m;
    (lo_m / lo_n, hi_m / hi_n)
}

/// Minimum cross-entropy objective for the cut `t` (constant terms dropped).
fn cross_entropy(cum: &Cumulative, t: usize) -> f64 {
    let lo_n = cum.count[t + 1];
    let lo_m = cum.moment[t + 1] + lo_n;
    let hi_m = cum.moment[256] + cum.count[256] - lo_m;
    let (mu_lo, mu_hi) = shifted_means(cum, t);
    -lo_m * mu_lo.ln() - hi_m * mu_hi.ln()
}

/// Li-Tam iteration on the continuous threshold; returns the final cut.
fn li_iterate(cum: &Cumulative, range: (usize, usize), start: f64, iterations: &mut u32) -> Result<usize> {
    let to_cut = |t: f64| ((t - 1.0).floor().max(range.0 as f64) as usize).min(range.1 - 1);
    let mut t = start;
    let mut previous = t;
    for _ in 0..LI_MAX_ITER {
        *iterations += 1;
        let (mu_lo, mu_hi) = shifted_means(cum, to_cut(t));
        let next = (mu_hi - mu_lo) / (mu_hi.ln() - mu_lo.ln());
        if (next - t).abs() < 0.5 {
            return Ok(to_cut(next));
        }
        previous = t;
        t = next;
    }
    Err(Error::NoConvergence {
        iterations: *iterations,
        previous,
        last: t,
    })
}

/// Walks to the neighbouring cut while the objective strictly decreases.
fn descend(h: &Histogram, cum: &Cumulative, range: (usize, usize), mut t: usize) -> usize {
    loop {
        let here = cross_entropy(cum, t);
        let mut best = (t, here);
        for c in [t.wrapping_sub(1), t + 1] {
            if c >= range.0 && c < range.1 {
                let e = cross_entropy(cum, c);
                if e < best.1 - 1e-12 * best.1.abs() {
                    best = (c, e);
                }
            }
        }
        if best.0 == t {
            return canonical_cut(h, t);
        }
        t = best.0;
    }
}

/// Smallest cut producing the same partition as `t`.
fn canonical_cut(h: &Histogram, mut t: usize) -> usize {
    while t > 0 && h.bins[t] == 0 {
        t -= 1;
    }
    t
}

/// Li's minimum cross-entropy threshold.
///
/// Runs the Li-Tam fixed-point iteration from the mean, then settles on the
/// adjacent discrete minimum of the objective. Multimodal histograms can
/// trap the iteration in a local minimum; when a full scan of the objective
/// finds a lower value the iteration is restarted from there.
pub fn threshold_li(h: &Histogram) -> Result<ThresholdResult> {
    let range = h.cut_range()?;
    let cum = Cumulative::new(h);
    let mut iterations = 0;

    let start = h.mean() + 1.0;
    let mut t = descend(h, &cum, range, li_iterate(&cum, range, start, &mut iterations)?);

    let global = (range.0..range.1)
        .map(|c| (c, cross_entropy(&cum, c)))
        .fold((t, f64::INFINITY), |best, c| if c.1 < best.1 { c } else { best });
    let here = cross_entropy(&cum, t);
    if here > global.1 + 1e-12 * global.1.abs() {
        let restart = li_iterate(&cum, range, global.0 as f64 + 1.0, &mut iterations)?;
        t = descend(h, &cum, range, restart);
    }
    Ok(ThresholdResult::found(Method::Li, t, iterations))
}

/// Ridler-Calvard ISODATA: `T = floor((mu_lo(T) + mu_hi(T)) / 2)`, iterated
/// from the global mean until two consecutive thresholds agree.
pub fn threshold_isodata(h: &Histogram) -> Result<ThresholdResult> {
    let range = h.cut_range()?;
    let cum = Cumulative::new(h);
    let clamp = |t: usize| t.clamp(range.0, range.1 - 1);
    let update = |t: usize| {
        let lo_n = cum.count[t + 1];
        let hi_n = cum.count[256] - lo_n;
        let mu_lo = cum.moment[t + 1] / lo_n;
        let mu_hi = (cum.moment[256] - cum.moment[t + 1]) / hi_n;
        clamp(((mu_lo + mu_hi) / 2.0).floor() as usize)
    };

    let mut t = clamp(h.mean().floor() as usize);
    let mut seen = vec![t];
    for iterations in 1..=ISODATA_MAX_ITER {
        let next = update(t);
        if next == t {
            return Ok(ThresholdResult::found(Method::Isodata, t, iterations));
        }
        if seen.contains(&next) {
            // integer rounding can produce a short cycle; settle on its smallest member
            let pos = seen.iter().position(|&s| s == next).unwrap_or(0);
            let t = seen[pos..].iter().copied().min().unwrap_or(next);
            return Ok(ThresholdResult::found(Method::Isodata, t, iterations));
        }
        seen.push(next);
        t = next;
    }
    Err(Error::NoConvergence {
        iterations: ISODATA_MAX_ITER,
        previous: seen[seen.len() - 2] as f64,
        last: t as f64,
    })
}

pub fn apply_threshold(img: &GrayImage, t: &ThresholdResult) -> BinaryImage {
    let mask = img
        .pixels()
        .iter()
        .map(|&v| match t.polarity {
            Polarity::DarkForeground => v <= t.threshold,
            Polarity::BrightForeground => v > t.threshold,
        })
        .collect();
    BinaryImage::new(img.width(), img.height(), mask).expect("same shape as source")
}

/// Erases every 8-connected component with fewer than `min_size` pixels.
pub fn remove_small_objects(bin: &BinaryImage, min_size: usize) -> BinaryImage {
    if min_size <= 1 {
        return bin.clone();
    }
    let labels = label_regions(bin);
    let mut sizes = vec![0usize; labels.count() + 1];
    for &l in labels.labels() {
        sizes[l as usize] += 1;
    }
    let mask = labels
        .labels()
        .iter()
        .map(|&l| l != 0 && sizes[l as usize] >= min_size)
        .collect();
    BinaryImage::new(bin.width(), bin.height(), mask).expect("same shape as source")
}

/// Sets every background pixel that is not 4-connected to the image border.
///
/// The boundary of a 4-connected hole is 8-connected, so every hole lies
/// inside the bounding box of the single component that encloses it; the
/// flood runs per component over that box plus a one-pixel frame.
pub fn fill_holes(bin: &BinaryImage) -> BinaryImage {
    let (w, h) = (bin.width(), bin.height());
    let labels = label_regions(bin);
    let n = labels.count();
    // (min_row, min_col, max_row, max_col)
    let mut boxes = vec![(usize::MAX, usize::MAX, 0usize, 0usize); n + 1];
    for (i, &l) in labels.labels().iter().enumerate() {
        if l != 0 {
            let (r, c) = (i / w, i % w);
            let b = &mut boxes[l as usize];
            *b = (b.0.min(r), b.1.min(c), b.2.max(r), b.3.max(c));
        }
    }

    let mut mask = bin.mask().to_vec();
    let mut outside = Vec::new();
    let mut stack = Vec::new();
    for (label, &(r0, c0, r1, c1)) in boxes.iter().enumerate().skip(1) {
        if r1 - r0 < 2 || c1 - c0 < 2 {
            continue;
        }
        // local grid with a one-pixel frame; local (lr, lc) is image (r0 + lr - 1, c0 + lc - 1)
        let (lh, lw) = (r1 - r0 + 3, c1 - c0 + 3);
        let wall = |lr: usize, lc: usize| {
            lr >= 1 && lc >= 1 && lr <= lh - 2 && lc <= lw - 2 && {
                let i = (r0 + lr - 1) * w + (c0 + lc - 1);
                labels.labels()[i] == label as u32
            }
        };
        outside.clear();
        outside.resize(lh * lw, false);
        outside[0] = true;
        stack.push(0usize);
        while let Some(i) = stack.pop() {
            let (lr, lc) = (i / lw, i % lw);
            let mut visit = |nr: usize, nc: usize| {
                let j = nr * lw + nc;
                if !outside[j] && !wall(nr, nc) {
                    outside[j] = true;
                    stack.push(j);
                }
            };
            if lr > 0 {
                visit(lr - 1, lc);
            }
            if lc > 0 {
                visit(lr, lc - 1);
            }
            if lr + 1 < lh {
                visit(lr + 1, lc);
            }
            if lc + 1 < lw {
                visit(lr, lc + 1);
            }
        }
        for lr in 1..lh - 1 {
            for lc in 1..lw - 1 {
                if !outside[lr * lw + lc] {
                    mask[(r0 + lr - 1) * w + (c0 + lc - 1)] = true;
                }
            }
        }
    }
    BinaryImage::new(w, h, mask).expect("same shape as source")
}

/// Erases every 8-connected component touching the last row or last column.
pub fn clear_lower_right(bin: &BinaryImage) -> BinaryImage {
    let (w, h) = (bin.width(), bin.height());
    let labels = label_regions(bin);
    let mut touching = vec![false; labels.count() + 1];
    for col in 0..w {
        touching[labels.get(h - 1, col) as usize] = true;
    }
    for row in 0..h {
        touching[labels.get(row, w - 1) as usize] = true;
    }
    let mask = labels
        .labels()
        .iter()
        .map(|&l| l != 0 && !touching[l as usize])
        .collect();
    BinaryImage::new(w, h, mask).expect("same shape as source")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn deltas(pairs: &[(usize, u64)]) -> Histogram {
        let mut bins = [0u64; 256];
        for &(v, n) in pairs {
            bins[v] += n;
        }
        Histogram::from_bins(bins)
    }

    #[test]
    fn histogram_counts() {
        let img = GrayImage::new(2, 2, vec![0, 0, 255, 255]).unwrap();
        let h = compute_histogram(&img);
        assert_eq!(h.bins()[0], 2);
        assert_eq!(h.bins()[255], 2);
        assert_eq!(h.bins().iter().sum::<u64>(), 4);
        let one = compute_histogram(&GrayImage::new(1, 1, vec![7]).unwrap());
        assert_eq!((one.bins()[7], one.total()), (1, 1));
    }

    #[test]
    fn two_deltas_are_separated() {
        let h = deltas(&[(50, 100), (150, 100)]);
        assert_eq!(threshold_otsu(&h).unwrap().threshold, 50);
        assert_eq!(threshold_yen(&h).unwrap().threshold, 50);
        let li = threshold_li(&h).unwrap().threshold;
        assert!((50..150).contains(&li));
        assert_eq!(threshold_isodata(&h).unwrap().threshold, 100);
    }

    #[test]
    fn single_bin_is_degenerate() {
        let h = deltas(&[(80, 10)]);
        for m in [Method::Otsu, Method::Yen, Method::Li, Method::Isodata] {
            assert!(matches!(threshold(&h, m), Err(Error::DegenerateHistogram(_))), "{m}");
        }
    }

    #[test]
    fn li_converges_on_outlier_histogram() {
        let mut bins = [0u64; 256];
        for b in bins.iter_mut().skip(100).take(20) {
            *b = 500;
        }
        bins[250] = 1;
        let h = Histogram::from_bins(bins);
        let r = threshold_li(&h).unwrap();
        assert!(r.iterations >= 1 && r.iterations <= LI_MAX_ITER);
    }

    #[test]
    fn apply_threshold_polarity_and_boundary() {
        let zeros = GrayImage::filled(3, 2, 0).unwrap();
        let whites = GrayImage::filled(3, 2, 255).unwrap();
        let t = ThresholdResult::manual(10, Polarity::DarkForeground);
        assert_eq!(apply_threshold(&zeros, &t).count(), 6);
        assert_eq!(apply_threshold(&whites, &t).count(), 0);
        let edge = GrayImage::new(2, 1, vec![10, 11]).unwrap();
        assert_eq!(apply_threshold(&edge, &t).mask(), &[true, false]);
        let bright = t.with_polarity(Polarity::BrightForeground);
        assert_eq!(apply_threshold(&edge, &bright).mask(), &[false, true]);
    }

    fn blob(mask: &mut BinaryImage, r0: usize, c0: usize, h: usize, w: usize) {
        for r in r0..r0 + h {
            for c in c0..c0 + w {
                mask.set(r, c, true);
            }
        }
    }

    #[test]
    fn small_objects_removed() {
        let mut m = BinaryImage::empty(30, 30).unwrap();
        blob(&mut m, 1, 1, 1, 3);
        blob(&mut m, 10, 10, 5, 10);
        assert_eq!(remove_small_objects(&m, 0), m);
        let out = remove_small_objects(&m, 10);
        assert_eq!(out.count(), 50);
        assert!(!out.get(1, 1));
        assert!(out.get(12, 12));
    }

    #[test]
    fn ring_is_filled() {
        let m = BinaryImage::from_fn(7, 7, |r, c| {
            (1..=5).contains(&r) && (1..=5).contains(&c) && (r == 1 || r == 5 || c == 1 || c == 5)
        })
        .unwrap();
        let out = fill_holes(&m);
        assert_eq!(out.count(), 25);
        let solid = BinaryImage::from_fn(7, 7, |r, c| (r + c) % 3 == 0 && r < 3).unwrap();
        assert_eq!(fill_holes(&solid), solid);
    }

    #[test]
    fn diagonal_gap_does_not_leak() {
        // 8-connected diamond encloses its centre under 4-connected background
        let m = BinaryImage::from_pixels(
            5,
            5,
            &[(1, 2), (2, 1), (2, 3), (3, 2)].map(|(r, c)| crate::raster::PixelCoord::new(r, c)),
        )
        .unwrap();
        assert!(fill_holes(&m).get(2, 2));
    }

    #[test]
    fn lower_right_border_cleared() {
        let mut m = BinaryImage::empty(10, 8).unwrap();
        blob(&mut m, 0, 2, 2, 2); // touches top only
        blob(&mut m, 5, 2, 3, 2); // reaches the last row
        blob(&mut m, 3, 8, 2, 2); // reaches the last column
        let out = clear_lower_right(&m);
        assert_eq!(out.count(), 4);
        assert!(out.get(0, 2));
        let mut tall = BinaryImage::empty(6, 6).unwrap();
        blob(&mut tall, 0, 2, 6, 1);
        assert_eq!(clear_lower_right(&tall).count(), 0);
    }

    #[test]
    fn method_names_parse() {
        for m in [Method::Otsu, Method::Yen, Method::Li, Method::Isodata, Method::Manual] {
            assert_eq!(m.to_string().parse::<Method>().unwrap(), m);
        }
        assert!("mlss".parse::<Method>().is_err());
    }
}
