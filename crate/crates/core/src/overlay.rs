//! Annotated view of a count: region outlines, extremities, chords, routes
//! and per-region counts drawn over the input image.

use std::path::Path;

use image::{Rgb, RgbImage};

use crate::error::{Error, Result};
use crate::pipeline::CountReport;
use crate::raster::{encode_error, GrayImage, PixelCoord, NEIGHBORS4};
use crate::topo::label_regions;

pub const SINGLE_TRACK_OUTLINE: Rgb<u8> = Rgb([255, 0, 255]);
pub const CLUSTER_OUTLINE: Rgb<u8> = Rgb([255, 160, 0]);
pub const EXTREMITY: Rgb<u8> = Rgb([0, 220, 0]);
pub const CHORD: Rgb<u8> = Rgb([0, 220, 0]);
pub const ROUTE: Rgb<u8> = Rgb([40, 90, 255]);
const LABEL_FG: Rgb<u8> = Rgb([255, 255, 255]);
const LABEL_BG: Rgb<u8> = Rgb([0, 0, 0]);

// 3x5 digits, one row per entry, bit 2 is the left column
const DIGITS: [[u8; 5]; 10] = [
    [7, 5, 5, 5, 7],
    [2, 6, 2, 2, 7],
    [7, 1, 7, 4, 7],
    [7, 1, 7, 1, 7],
    [5, 5, 7, 1, 1],
    [7, 4, 7, 1, 7],
    [7, 4, 7, 5, 7],
    [7, 1, 1, 1, 1],
    [7, 5, 7, 5, 7],
    [7, 5, 7, 1, 7],
];

struct Canvas(RgbImage);

impl Canvas {
    fn put(&mut self, row: isize, col: isize, c: Rgb<u8>) {
        if row >= 0 && col >= 0 && (col as u32) < self.0.width() && (row as u32) < self.0.height() {
            self.0.put_pixel(col as u32, row as u32, c);
        }
    }

    fn dot(&mut self, p: PixelCoord, c: Rgb<u8>) {
        for dr in -1..=1 {
            for dc in -1..=1 {
                self.put(p.row as isize + dr, p.col as isize + dc, c);
            }
        }
    }

    fn text(&mut self, row: isize, col: isize, s: &str) {
        const SCALE: isize = 2;
        let w = s.len() as isize * 4 * SCALE + SCALE;
        for r in -SCALE..6 * SCALE {
            for c in -SCALE..w {
                self.put(row + r, col + c, LABEL_BG);
            }
        }
        for (i, ch) in s.bytes().enumerate() {
            let glyph = DIGITS[(ch - b'0') as usize];
            for (gr, bits) in glyph.iter().enumerate() {
                for gc in 0..3 {
                    if bits & (4 >> gc) != 0 {
                        for sr in 0..SCALE {
                            for sc in 0..SCALE {
                                let x = col + (i as isize * 4 + gc) * SCALE + sc;
                                self.put(row + gr as isize * SCALE + sr, x, LABEL_FG);
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Draws the report over `img`. The report must carry its mask, as returned
/// by [`crate::pipeline::count_image`].
pub fn render_overlay(img: &GrayImage, report: &CountReport) -> Result<RgbImage> {
    let mask = report
        .mask
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("report has no mask to draw".into()))?;
    if (mask.width(), mask.height()) != (img.width(), img.height()) {
        return Err(Error::InvalidParameter("report and image sizes differ".into()));
    }
    let mut canvas = Canvas(RgbImage::from_fn(img.width() as u32, img.height() as u32, |x, y| {
        let v = img.get(y as usize, x as usize);
        Rgb([v, v, v])
    }));

    let labels = label_regions(mask);
    let regions = labels.regions();
    for (region, count) in regions.iter().zip(&report.regions) {
        let colour = if count.n_tracks == 1 {
            SINGLE_TRACK_OUTLINE
        } else {
            CLUSTER_OUTLINE
        };
        for p in region.pixels() {
            let edge = NEIGHBORS4
                .iter()
                .any(|&(dr, dc)| !mask.get_signed(p.row as isize + dr, p.col as isize + dc));
            if edge {
                canvas.put(p.row as isize, p.col as isize, colour);
            }
        }
    }
    for count in &report.regions {
        for cand in &count.candidates {
            for p in &cand.route.path {
                canvas.put(p.row as isize, p.col as isize, ROUTE);
            }
            for p in &cand.chord.raster {
                canvas.put(p.row as isize, p.col as isize, CHORD);
            }
        }
        for &p in &count.extremities {
            canvas.dot(p, EXTREMITY);
        }
    }
    for (region, count) in regions.iter().zip(&report.regions) {
        let b = region.bbox();
        canvas.text(b.min_row as isize - 14, b.max_col as isize + 3, &count.n_tracks.to_string());
    }
    Ok(canvas.0)
}

pub fn save_overlay(img: &RgbImage, path: &Path) -> Result<()> {
    img.save(path).map_err(|e| encode_error(path, e))
}
