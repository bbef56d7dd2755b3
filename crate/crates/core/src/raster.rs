//! Pixel containers, raster I/O and the median prefilter.

use std::path::Path;

use image::{DynamicImage, ImageReader};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row/column address of a pixel. Ordering is lexicographic by `(row, col)`,
/// which is the tie-break order used throughout the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PixelCoord {
    pub row: usize,
    pub col: usize,
}

impl PixelCoord {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }

    /// True when `other` is one of the eight pixels surrounding `self`.
    pub fn is_neighbor8(&self, other: &PixelCoord) -> bool {
        let dr = self.row.abs_diff(other.row);
        let dc = self.col.abs_diff(other.col);
        dr <= 1 && dc <= 1 && (dr, dc) != (0, 0)
    }

    pub fn euclid(&self, other: &PixelCoord) -> f64 {
        let dr = self.row as f64 - other.row as f64;
        let dc = self.col as f64 - other.col as f64;
        dr.hypot(dc)
    }

    /// Squared Euclidean distance, exact in integers.
    pub fn dist2(&self, other: &PixelCoord) -> u64 {
        let dr = self.row.abs_diff(other.row) as u64;
        let dc = self.col.abs_diff(other.col) as u64;
        dr * dr + dc * dc
    }
}

/// Offsets of the 8-neighbourhood in raster order.
pub(crate) const NEIGHBORS8: [(isize, isize); 8] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -1),
    (0, 1),
    (1, -1),
    (1, 0),
    (1, 1),
];

pub(crate) const NEIGHBORS4: [(isize, isize); 4] = [(-1, 0), (0, -1), (0, 1), (1, 0)];

/// 8-bit grayscale image, row-major, 0 = black.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        check_shape(width, height, pixels.len())?;
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> u8) -> Result<Self> {
        check_shape(width, height, width * height)?;
        let mut pixels = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                pixels.push(f(row, col));
            }
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: u8) {
        self.pixels[row * self.width + col] = value;
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let buf = image::GrayImage::from_raw(self.width as u32, self.height as u32, self.pixels.clone())
            .expect("shape checked at construction");
        buf.save(path).map_err(|e| encode_error(path, e))
    }
}

/// Foreground mask; `true` marks candidate track material.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryImage {
    width: usize,
    height: usize,
    mask: Vec<bool>,
}

impl BinaryImage {
    pub fn new(width: usize, height: usize, mask: Vec<bool>) -> Result<Self> {
        check_shape(width, height, mask.len())?;
        Ok(Self {
            width,
            height,
            mask,
        })
    }

    pub fn empty(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![false; width * height])
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Result<Self> {
        check_shape(width, height, width * height)?;
        let mut mask = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                mask.push(f(row, col));
            }
        }
        Ok(Self {
            width,
            height,
            mask,
        })
    }

    /// Builds a mask of the given shape with exactly `pixels` set.
    pub fn from_pixels(width: usize, height: usize, pixels: &[PixelCoord]) -> Result<Self> {
        let mut img = Self::empty(width, height)?;
        for p in pixels {
            if p.row >= height || p.col >= width {
                return Err(Error::InvalidParameter(format!(
                    "pixel ({}, {}) outside {}x{} image",
                    p.row, p.col, width, height
                )));
            }
            img.set(p.row, p.col, true);
        }
        Ok(img)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.mask[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.mask[row * self.width + col] = value;
    }

    /// Value at a signed position; anything outside the image is background.
    pub fn get_signed(&self, row: isize, col: isize) -> bool {
        row >= 0
            && col >= 0
            && (row as usize) < self.height
            && (col as usize) < self.width
            && self.get(row as usize, col as usize)
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&v| v).count()
    }

    pub fn foreground(&self) -> impl Iterator<Item = PixelCoord> + '_ {
        self.mask
            .iter()
            .enumerate()
            .filter(|(_, &v)| v)
            .map(|(i, _)| PixelCoord::new(i / self.width, i % self.width))
    }

    /// True when every foreground pixel of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &BinaryImage) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.mask.iter().zip(&other.mask).all(|(&a, &b)| !a || b)
    }
}

fn check_shape(width: usize, height: usize, len: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidParameter(format!(
            "image dimensions must be positive, got {width}x{height}"
        )));
    }
    if width.checked_mul(height) != Some(len) {
        return Err(Error::InvalidParameter(format!(
            "{len} pixels do not fill a {width}x{height} image"
        )));
    }
    Ok(())
}

pub(crate) fn encode_error(path: &Path, e: image::ImageError) -> Error {
    match e {
        image::ImageError::IoError(source) => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        other => Error::Decode {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    }
}

/// Integer luminance `round(0.299 R + 0.587 G + 0.114 B)`.
pub fn luminance(r: u32, g: u32, b: u32) -> u32 {
    (299 * r + 587 * g + 114 * b + 500) / 1000
}

/// Reads an 8/16-bit gray or RGB(A) PNG/TIFF as an 8-bit gray image.
///
/// Colour is reduced with [`luminance`]; 16-bit data is min-max stretched
/// onto `[0, 255]`.
pub fn load_gray(path: &Path) -> Result<GrayImage> {
    let reader = ImageReader::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let reader = reader.with_guessed_format().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let decoded = reader.decode().map_err(|e| encode_error(path, e))?;
    gray_from_dynamic(decoded)
}

pub fn gray_from_dynamic(img: DynamicImage) -> Result<GrayImage> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img {
        DynamicImage::ImageLuma8(buf) => GrayImage::new(w, h, buf.into_raw()),
        DynamicImage::ImageLumaA8(buf) => {
            GrayImage::new(w, h, buf.pixels().map(|p| p.0[0]).collect())
        }
        DynamicImage::ImageRgb8(buf) => GrayImage::new(
            w,
            h,
            buf.pixels()
                .map(|p| luminance(p[0] as u32, p[1] as u32, p[2] as u32) as u8)
                .collect(),
        ),
        DynamicImage::ImageRgba8(buf) => GrayImage::new(
            w,
            h,
            buf.pixels()
                .map(|p| luminance(p[0] as u32, p[1] as u32, p[2] as u32) as u8)
                .collect(),
        ),
        DynamicImage::ImageLuma16(buf) => stretch16(w, h, buf.pixels().map(|p| p.0[0] as u32)),
        DynamicImage::ImageLumaA16(buf) => stretch16(w, h, buf.pixels().map(|p| p.0[0] as u32)),
        DynamicImage::ImageRgb16(buf) => stretch16(
            w,
            h,
            buf.pixels()
                .map(|p| luminance(p[0] as u32, p[1] as u32, p[2] as u32)),
        ),
        DynamicImage::ImageRgba16(buf) => stretch16(
            w,
            h,
            buf.pixels()
                .map(|p| luminance(p[0] as u32, p[1] as u32, p[2] as u32)),
        ),
        other => Err(Error::UnsupportedDepth(format!("{:?}", other.color()))),
    }
}

/// Linear min-max stretch of 16-bit samples onto `[0, 255]`.
fn stretch16(width: usize, height: usize, samples: impl Iterator<Item = u32>) -> Result<GrayImage> {
    let values: Vec<u32> = samples.collect();
    let lo = values.iter().copied().min().unwrap_or(0);
    let hi = values.iter().copied().max().unwrap_or(0);
    let span = hi - lo;
    let pixels = values
        .iter()
        .map(|&v| {
            if span == 0 {
                0
            } else {
                ((v - lo) as u64 * 255 * 2 + span as u64).div_euclid(2 * span as u64) as u8
            }
        })
        .collect();
    GrayImage::new(width, height, pixels)
}

/// Mirror an out-of-range index back into `0..n` without repeating the edge
/// sample: `-1 -> 1`, `n -> n - 2`.
pub(crate) fn reflect(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

/// `k x l` median filter (`k` rows, `l` columns) with reflect padding.
///
/// Uses a running 256-bin histogram per row, so the cost per pixel is
/// proportional to `k` rather than `k * l`.
pub fn median_filter(img: &GrayImage, window: (usize, usize)) -> Result<GrayImage> {
    let (k, l) = window;
    if k == 0 || l == 0 || k % 2 == 0 || l % 2 == 0 {
        return Err(Error::InvalidParameter(format!(
            "median window must have odd positive sides, got {k}x{l}"
        )));
    }
    let (w, h) = (img.width, img.height);
    if k > 2 * h - 1 || l > 2 * w - 1 {
        return Err(Error::InvalidParameter(format!(
            "median window {k}x{l} exceeds the reflectable extent of a {w}x{h} image"
        )));
    }
    if k == 1 && l == 1 {
        return Ok(img.clone());
    }

    let (hk, hl) = ((k / 2) as isize, (l / 2) as isize);
    // reflected column index for every padded column position
    let cols: Vec<usize> = (-hl..w as isize + hl).map(|c| reflect(c, w)).collect();
    let half = (k * l / 2) as i64;
    let src = &img.pixels;
    let mut out = vec![0u8; w * h];

    for (row, out_row) in out.chunks_exact_mut(w).enumerate() {
        let rows: Vec<&[u8]> = (row as isize - hk..=row as isize + hk)
            .map(|r| {
                let r = reflect(r, h);
                &src[r * w..(r + 1) * w]
            })
            .collect();
        // fixed-size copies let the row loop unroll for common heights
        match k {
            3 => median_row(&<[&[u8]; 3]>::try_from(rows).unwrap(), &cols, l, half, out_row),
            5 => median_row(&<[&[u8]; 5]>::try_from(rows).unwrap(), &cols, l, half, out_row),
            7 => median_row(&<[&[u8]; 7]>::try_from(rows).unwrap(), &cols, l, half, out_row),
            _ => median_row(&rows, &cols, l, half, out_row),
        }
    }
    GrayImage::new(w, h, out)
}

/// One output row of the running-histogram median.
#[inline(always)]
fn median_row(rows: &[&[u8]], cols: &[usize], l: usize, half: i64, out_row: &mut [u8]) {
    let mut hist = [0i64; 256];
    for &c in &cols[..l] {
        for r in rows {
            hist[r[c] as usize] += 1;
        }
    }
    // `below` counts window samples strictly less than `med`
    let mut med = 0usize;
    let mut below = 0i64;
    while below + hist[med] <= half {
        below += hist[med];
        med += 1;
    }
    out_row[0] = med as u8;

    for (col, (&leaving, &entering)) in cols.iter().zip(&cols[l..]).enumerate() {
        let m = med as u8;
        let mut delta = 0i64;
        for r in rows {
            let (old, new) = (r[leaving], r[entering]);
            hist[old as usize] -= 1;
            hist[new as usize] += 1;
            delta += i64::from(new < m) - i64::from(old < m);
        }
        below += delta;
        while below > half {
            med -= 1;
            below -= hist[med];
        }
        while below + hist[med] <= half {
            below += hist[med];
            med += 1;
        }
        out_row[col + 1] = med as u8;
    }
}
