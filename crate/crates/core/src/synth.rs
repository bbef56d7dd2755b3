//! Seeded synthetic photomicrographs with known track counts.
//!
//! Tracks are dark capsules (a segment swept by a disc) on a bright
//! background with additive uniform noise. Isolated tracks keep a clearance
//! from each other; crossing pairs share an interior point.

use std::f64::consts::PI;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::GrayImage;

const MAX_ATTEMPTS: usize = 20_000;
const MIN_CROSSING_ANGLE: f64 = PI / 6.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub width: usize,
    pub height: usize,
    pub n_tracks: usize,
    /// capsule axis length, pixels
    pub length_range: (f64, f64),
    /// capsule diameter, pixels
    pub width_range: (f64, f64),
    /// chance that a track is drawn crossing the next one
    pub overlap_probability: f64,
    /// crossing pairs drawn regardless of `overlap_probability`
    pub forced_crossings: usize,
    pub background: u8,
    pub track_intensity: u8,
    pub noise: u8,
    /// minimum free space between separate track groups, pixels
    pub clearance: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            width: 256,
            height: 256,
            n_tracks: 12,
            length_range: (20.0, 36.0),
            width_range: (5.0, 7.5),
            overlap_probability: 0.0,
            forced_crossings: 0,
            background: 200,
            track_intensity: 70,
            noise: 20,
            clearance: 8.0,
            seed: 0,
        }
    }
}

impl SynthSpec {
    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if self.width == 0 || self.height == 0 {
            return bad("image dimensions must be positive");
        }
        if self.track_intensity >= self.background {
            return bad("tracks must be darker than the background");
        }
        let (l0, l1) = self.length_range;
        let (w0, w1) = self.width_range;
        if !(l0 > 0.0 && l0 <= l1 && w0 > 0.0 && w0 <= w1) {
            return bad("length and width ranges must be positive and ordered");
        }
        if !(0.0..=1.0).contains(&self.overlap_probability) {
            return bad("overlap probability must lie in [0, 1]");
        }
        if 2 * self.forced_crossings > self.n_tracks {
            return bad("forced crossings need two tracks each");
        }
        Ok(())
    }
}

/// One rendered capsule in `(row, col)` coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthTrack {
    pub a: (f64, f64),
    pub b: (f64, f64),
    pub diameter: f64,
}

impl SynthTrack {
    pub fn length(&self) -> f64 {
        (self.a.0 - self.b.0).hypot(self.a.1 - self.b.1)
    }

    fn distance_to(&self, p: (f64, f64)) -> f64 {
        point_segment_distance(p, self.a, self.b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub seed: u64,
    pub n_tracks: usize,
    #[serde(rename = "endpoints")]
    pub tracks: Vec<SynthTrack>,
}

#[derive(Debug, Clone)]
pub struct SynthImage {
    pub image: GrayImage,
    pub truth: GroundTruth,
}

fn point_segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    (p.0 - a.0 - t * dx).hypot(p.1 - a.1 - t * dy)
}

fn segments_intersect(a: (f64, f64), b: (f64, f64), c: (f64, f64), d: (f64, f64)) -> bool {
    let cross = |o: (f64, f64), p: (f64, f64), q: (f64, f64)| (p.0 - o.0) * (q.1 - o.1) - (p.1 - o.1) * (q.0 - o.0);
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

fn segment_distance(s: &SynthTrack, t: &SynthTrack) -> f64 {
    if segments_intersect(s.a, s.b, t.a, t.b) {
        return 0.0;
    }
    [
        point_segment_distance(s.a, t.a, t.b),
        point_segment_distance(s.b, t.a, t.b),
        point_segment_distance(t.a, s.a, s.b),
        point_segment_distance(t.b, s.a, s.b),
    ]
    .into_iter()
    .fold(f64::INFINITY, f64::min)
}

struct Placer<'a> {
    spec: &'a SynthSpec,
    rng: ChaCha8Rng,
    groups: Vec<Vec<SynthTrack>>,
}

impl Placer<'_> {
    fn capsule(&mut self, center: (f64, f64), angle: f64) -> SynthTrack {
        let (l0, l1) = self.spec.length_range;
        let (w0, w1) = self.spec.width_range;
        let length = if l0 < l1 { self.rng.random_range(l0..=l1) } else { l0 };
        let diameter = if w0 < w1 { self.rng.random_range(w0..=w1) } else { w0 };
        let (dr, dc) = (angle.sin() * length / 2.0, angle.cos() * length / 2.0);
        SynthTrack {
            a: (center.0 - dr, center.1 - dc),
            b: (center.0 + dr, center.1 + dc),
            diameter,
        }
    }

    /// Inside the frame, with extra room at the bottom and right so that
    /// border clearing never removes a track.
    fn fits_frame(&self, t: &SynthTrack) -> bool {
        let r = t.diameter / 2.0;
        let (lo, hi_r, hi_c) = (
            r + 2.0,
            self.spec.height as f64 - r - 2.0 - self.spec.clearance,
            self.spec.width as f64 - r - 2.0 - self.spec.clearance,
        );
        [t.a, t.b]
            .iter()
            .all(|p| p.0 >= lo && p.1 >= lo && p.0 <= hi_r && p.1 <= hi_c)
    }

    fn clear_of_others(&self, group: &[SynthTrack]) -> bool {
        self.groups.iter().flatten().all(|other| {
            group.iter().all(|t| {
                segment_distance(t, other) - (t.diameter + other.diameter) / 2.0 >= self.spec.clearance
            })
        })
    }

    fn random_center(&mut self) -> (f64, f64) {
        (
            self.rng.random_range(0.0..self.spec.height as f64),
            self.rng.random_range(0.0..self.spec.width as f64),
        )
    }

    fn place(&mut self, crossing: bool) -> bool {
        for _ in 0..MAX_ATTEMPTS {
            let center = self.random_center();
            let angle = self.rng.random_range(0.0..PI);
            let group = if crossing {
                let delta = self.rng.random_range(MIN_CROSSING_ANGLE..=PI - MIN_CROSSING_ANGLE);
                // the shared point sits in the central fifth of both tracks
                let mut pair = Vec::with_capacity(2);
                for theta in [angle, angle + delta] {
                    let t = self.capsule(center, theta);
                    let shift = self.rng.random_range(-0.1..=0.1) * t.length();
                    let (sr, sc) = (theta.sin() * shift, theta.cos() * shift);
                    pair.push(SynthTrack {
                        a: (t.a.0 + sr, t.a.1 + sc),
                        b: (t.b.0 + sr, t.b.1 + sc),
                        ..t
                    });
                }
                pair
            } else {
                vec![self.capsule(center, angle)]
            };
            if group.iter().all(|t| self.fits_frame(t)) && self.clear_of_others(&group) {
                self.groups.push(group);
                return true;
            }
        }
        false
    }
}

/// Renders a synthetic image and its ground truth.
pub fn generate(spec: &SynthSpec) -> Result<SynthImage> {
    spec.validate()?;
    let mut placer = Placer {
        spec,
        rng: ChaCha8Rng::seed_from_u64(spec.seed),
        groups: Vec::new(),
    };

    let mut placed = 0;
    let mut crossings_left = spec.forced_crossings;
    while placed < spec.n_tracks {
        let remaining = spec.n_tracks - placed;
        let crossing = remaining >= 2
            && (crossings_left > 0
                || (remaining > 2 * crossings_left && placer.rng.random_bool(spec.overlap_probability)));
        if !placer.place(crossing) {
            return Err(Error::Capacity {
                requested: spec.n_tracks,
                placed,
                attempts: MAX_ATTEMPTS,
            });
        }
        if crossing {
            placed += 2;
            crossings_left = crossings_left.saturating_sub(1);
        } else {
            placed += 1;
        }
    }

    let tracks: Vec<SynthTrack> = placer.groups.into_iter().flatten().collect();
    let mut rng = placer.rng;
    let noise = spec.noise as i32;
    let mut pixels = Vec::with_capacity(spec.width * spec.height);
    for row in 0..spec.height {
        for col in 0..spec.width {
            let p = (row as f64, col as f64);
            let inside = tracks.iter().any(|t| t.distance_to(p) <= t.diameter / 2.0);
            let base = if inside { spec.track_intensity } else { spec.background } as i32;
            let n = if noise > 0 { rng.random_range(-noise..=noise) } else { 0 };
            pixels.push((base + n).clamp(0, 255) as u8);
        }
    }

    Ok(SynthImage {
        image: GrayImage::new(spec.width, spec.height, pixels)?,
        truth: GroundTruth {
            seed: spec.seed,
            n_tracks: tracks.len(),
            tracks,
        },
    })
}
