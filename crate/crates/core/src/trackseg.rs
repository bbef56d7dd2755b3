//! Separation of overlapping tracks inside one region.
//!
//! Extremity pixels of the region skeleton are paired greedily. For every
//! remaining pair we take the shortest on-skeleton route and the straight
//! chord between the two pixels; the pair whose route and chord enclose the
//! fewest pixels is accepted as a track, its extremities are retired, and
//! the search repeats. An odd extremity left at the end is closed onto the
//! nearest intersection pixel.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{BinaryImage, PixelCoord, NEIGHBORS4, NEIGHBORS8};
use crate::topo::{classify_pixels, skeletonize, PixelClass, PixelClasses, Region, Skeleton};

/// Path length `orthogonal + diagonal * sqrt(2)`, compared exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct StepCount {
    pub orthogonal: u32,
    pub diagonal: u32,
}

impl StepCount {
    pub fn length(&self) -> f64 {
        self.orthogonal as f64 + self.diagonal as f64 * std::f64::consts::SQRT_2
    }

    fn step(self, diagonal: bool) -> Self {
        if diagonal {
            Self {
                diagonal: self.diagonal + 1,
                ..self
            }
        } else {
            Self {
                orthogonal: self.orthogonal + 1,
                ..self
            }
        }
    }
}

impl Ord for StepCount {
    fn cmp(&self, other: &Self) -> Ordering {
        // sign of da + db * sqrt(2) without rounding
        let da = self.orthogonal as i64 - other.orthogonal as i64;
        let db = self.diagonal as i64 - other.diagonal as i64;
        match (da.signum(), db.signum()) {
            (0, 0) => Ordering::Equal,
            (a, b) if a >= 0 && b >= 0 => Ordering::Greater,
            (a, b) if a <= 0 && b <= 0 => Ordering::Less,
            (1, _) => (da * da).cmp(&(2 * db * db)),
            _ => (2 * db * db).cmp(&(da * da)),
        }
    }
}

impl PartialOrd for StepCount {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub path: Vec<PixelCoord>,
    pub steps: StepCount,
    pub cost: f64,
}

/// Minimum-cost path along the skeleton with unit orthogonal and `sqrt(2)`
/// diagonal steps. Equal-cost frontier pixels are settled in `(row, col)`
/// order and a pixel keeps the first predecessor that reached it, so the
/// result is deterministic.
pub fn shortest_route(skel: &Skeleton, a: PixelCoord, b: PixelCoord) -> Result<Route> {
    for p in [a, b] {
        if !skel.contains(p) {
            return Err(Error::OffSkeleton(p));
        }
    }
    let mut best: HashMap<PixelCoord, (StepCount, Option<PixelCoord>)> = HashMap::new();
    let mut heap = BinaryHeap::new();
    best.insert(a, (StepCount::default(), None));
    heap.push(Reverse((StepCount::default(), a)));

    while let Some(Reverse((cost, p))) = heap.pop() {
        if best.get(&p).is_some_and(|&(c, _)| c < cost) {
            continue;
        }
        if p == b {
            break;
        }
        for q in skel.neighbors(p) {
            let next = cost.step(p.row != q.row && p.col != q.col);
            let improves = best.get(&q).is_none_or(|&(c, _)| next < c);
            if improves {
                best.insert(q, (next, Some(p)));
                heap.push(Reverse((next, q)));
            }
        }
    }

    let Some(&(steps, _)) = best.get(&b) else {
        return Err(Error::Unreachable { from: a, to: b });
    };
    let mut path = vec![b];
    let mut cur = b;
    while let Some(&(_, Some(prev))) = best.get(&cur) {
        path.push(prev);
        cur = prev;
    }
    path.reverse();
    Ok(Route {
        path,
        steps,
        cost: steps.length(),
    })
}

/// Straight segment between two pixels and its raster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chord {
    pub a: PixelCoord,
    pub b: PixelCoord,
    pub raster: Vec<PixelCoord>,
    pub euclid: f64,
}

/// Bresenham rasterization from `a` to `b`, endpoints included.
pub fn rasterize_chord(a: PixelCoord, b: PixelCoord) -> Chord {
    let (r0, c0) = (a.row as i64, a.col as i64);
    let (r1, c1) = (b.row as i64, b.col as i64);
    let dc = (c1 - c0).abs();
    let dr = -(r1 - r0).abs();
    let sc = if c0 < c1 { 1 } else { -1 };
    let sr = if r0 < r1 { 1 } else { -1 };
    let (mut r, mut c) = (r0, c0);
    let mut err = dc + dr;
    let mut raster = Vec::with_capacity((dc.max(-dr) + 1) as usize);
    loop {
        raster.push(PixelCoord::new(r as usize, c as usize));
        if r == r1 && c == c1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dr {
            err += dr;
            c += sc;
        }
        if e2 <= dc {
            err += dc;
            r += sr;
        }
    }
    Chord {
        a,
        b,
        raster,
        euclid: a.euclid(&b),
    }
}

/// Pixels strictly enclosed by the closed curve `route + chord`.
///
/// Both curves are 8-connected, so a 4-connected fill started outside their
/// bounding box cannot cross them; whatever the fill misses and is not on a
/// curve is enclosed. Figure-eight loops contribute every pocket.
pub fn inner_area(route: &Route, chord: &Chord) -> Result<usize> {
    let (first, last) = match (route.path.first(), route.path.last()) {
        (Some(&f), Some(&l)) => (f, l),
        _ => return Err(Error::InvalidParameter("route has no pixels".into())),
    };
    let same = (first, last) == (chord.a, chord.b) || (first, last) == (chord.b, chord.a);
    if !same {
        return Err(Error::InvalidParameter(format!(
            "route ({},{})-({},{}) and chord ({},{})-({},{}) do not share endpoints",
            first.row, first.col, last.row, last.col, chord.a.row, chord.a.col, chord.b.row, chord.b.col
        )));
    }
    Ok(enclosed_count(route.path.iter().chain(&chord.raster).copied()))
}

fn enclosed_count(curve: impl Iterator<Item = PixelCoord> + Clone) -> usize {
    let (mut min_r, mut min_c, mut max_r, mut max_c) = (usize::MAX, usize::MAX, 0, 0);
    for p in curve.clone() {
        min_r = min_r.min(p.row);
        min_c = min_c.min(p.col);
        max_r = max_r.max(p.row);
        max_c = max_c.max(p.col);
    }
    let (w, h) = (max_c - min_c + 3, max_r - min_r + 3);
    let mut wall = BinaryImage::empty(w, h).expect("nonempty curve");
    for p in curve {
        wall.set(p.row - min_r + 1, p.col - min_c + 1, true);
    }
    let mut outside = vec![false; w * h];
    let mut queue = VecDeque::from([(0usize, 0usize)]);
    outside[0] = true;
    let mut reached = 1;
    while let Some((r, c)) = queue.pop_front() {
        for (dr, dc) in NEIGHBORS4 {
            let (nr, nc) = (r as isize + dr, c as isize + dc);
            if nr < 0 || nc < 0 || nr >= h as isize || nc >= w as isize {
                continue;
            }
            let i = nr as usize * w + nc as usize;
            if !outside[i] && !wall.mask()[i] {
                outside[i] = true;
                reached += 1;
                queue.push_back((nr as usize, nc as usize));
            }
        }
    }
    w * h - reached - wall.count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackCandidate {
    pub endpoints: (PixelCoord, PixelCoord),
    pub route: Route,
    pub chord: Chord,
    pub inner_area: usize,
    /// the second endpoint is an intersection pixel (odd extremity left over)
    pub closes_on_intersection: bool,
    /// the route passes through at least one intersection pixel
    pub via_intersection: bool,
}

impl TrackCandidate {
    fn build(skel: &Skeleton, classes: &PixelClasses, a: PixelCoord, b: PixelCoord) -> Result<Self> {
        let route = shortest_route(skel, a, b)?;
        let chord = rasterize_chord(a, b);
        let inner_area = inner_area(&route, &chord)?;
        let via_intersection = route
            .path
            .iter()
            .any(|p| classes.get(p) == Some(PixelClass::Intersection));
        Ok(Self {
            endpoints: (a, b),
            route,
            chord,
            inner_area,
            closes_on_intersection: false,
            via_intersection,
        })
    }
}

/// Why a region bypassed the pairing loop, if it did.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Degenerate {
    #[default]
    None,
    /// the skeleton is a lone pixel: no extremities to pair, zero tracks
    SinglePixel,
    /// no intersection pixels: a single track
    NoIntersections,
    /// intersections but no extremity pixels (closed loop): zero tracks
    NoExtremities,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionCount {
    pub label: u32,
    pub n_tracks: usize,
    pub candidates: Vec<TrackCandidate>,
    pub degenerate: Degenerate,
    pub extremities: Vec<PixelCoord>,
    pub intersections: Vec<PixelCoord>,
}

/// Greedy minimum-inner-area pairing of the extremity pixels.
pub fn pair_extremities(skel: &Skeleton, classes: &PixelClasses) -> Result<RegionCount> {
    let extremities = classes.extremities();
    let intersections = classes.intersections();
    let mut result = RegionCount {
        label: skel.source_label,
        n_tracks: 0,
        candidates: Vec::new(),
        degenerate: Degenerate::None,
        extremities: extremities.clone(),
        intersections: intersections.clone(),
    };
    if extremities.is_empty() {
        result.degenerate = Degenerate::NoExtremities;
        return Ok(result);
    }

    // pair geometry never changes between rounds, so evaluate each pair once
    let mut cache: HashMap<(PixelCoord, PixelCoord), TrackCandidate> = HashMap::new();
    let mut remaining = extremities;
    while remaining.len() >= 2 {
        let mut best: Option<(usize, usize, usize)> = None;
        for i in 0..remaining.len() {
            for j in i + 1..remaining.len() {
                let key = (remaining[i], remaining[j]);
                let area = match cache.get(&key) {
                    Some(c) => c.inner_area,
                    None => {
                        let c = TrackCandidate::build(skel, classes, key.0, key.1)?;
                        let area = c.inner_area;
                        cache.insert(key, c);
                        area
                    }
                };
                // strict comparison keeps the lexicographically first pair on ties
                if best.is_none_or(|(_, _, a)| area < a) {
                    best = Some((i, j, area));
                }
            }
        }
        let (i, j, _) = best.expect("at least one pair");
        let key = (remaining[i], remaining[j]);
        result.candidates.push(cache.remove(&key).expect("evaluated above"));
        remaining.remove(j);
        remaining.remove(i);
    }

    if let Some(&last) = remaining.first() {
        let nearest = intersections
            .iter()
            .copied()
            .min_by_key(|q| (last.dist2(q), *q))
            .ok_or_else(|| {
                Error::InvalidParameter("odd extremity left but the skeleton has no intersections".into())
            })?;
        let mut c = TrackCandidate::build(skel, classes, last, nearest)?;
        c.closes_on_intersection = true;
        result.candidates.push(c);
    }
    result.n_tracks = result.candidates.len();
    Ok(result)
}

/// Tracks in one region: zero for a point skeleton, one for a skeleton
/// without intersections, otherwise the greedy pairing.
pub fn count_region(region: &Region) -> Result<RegionCount> {
    let skel = skeletonize(region);
    count_skeleton(&skel)
}

pub fn count_skeleton(skel: &Skeleton) -> Result<RegionCount> {
    let classes = classify_pixels(skel);
    let extremities = classes.extremities();
    let intersections = classes.intersections();
    let mut rc = RegionCount {
        label: skel.source_label,
        n_tracks: 0,
        candidates: Vec::new(),
        degenerate: Degenerate::None,
        extremities: extremities.clone(),
        intersections: intersections.clone(),
    };

    if classes.count(PixelClass::Isolated) == skel.len() {
        rc.degenerate = Degenerate::SinglePixel;
        return Ok(rc);
    }
    if intersections.is_empty() {
        if extremities.len() < 2 {
            rc.degenerate = Degenerate::NoExtremities;
            return Ok(rc);
        }
        let (a, b) = (extremities[0], extremities[extremities.len() - 1]);
        rc.candidates.push(TrackCandidate::build(skel, &classes, a, b)?);
        rc.n_tracks = 1;
        rc.degenerate = Degenerate::NoIntersections;
        return Ok(rc);
    }
    pair_extremities(skel, &classes)
}

/// Number of 8-neighbour steps in a pixel path that are diagonal.
pub fn diagonal_steps(path: &[PixelCoord]) -> usize {
    path.windows(2)
        .filter(|w| w[0].row != w[1].row && w[0].col != w[1].col)
        .count()
}

/// True when consecutive pixels of `path` are 8-neighbours.
pub fn is_connected_path(path: &[PixelCoord]) -> bool {
    path.windows(2).all(|w| {
        NEIGHBORS8.iter().any(|&(dr, dc)| {
            w[0].row as isize + dr == w[1].row as isize && w[0].col as isize + dc == w[1].col as isize
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(r: usize, c: usize) -> PixelCoord {
        PixelCoord::new(r, c)
    }

    fn skel(list: &[(usize, usize)]) -> Skeleton {
        Skeleton::from_pixels(1, list.iter().map(|&(r, c)| p(r, c)).collect())
    }

    #[test]
    fn step_count_ordering_is_exact() {
        let s = |o, d| StepCount {
            orthogonal: o,
            diagonal: d,
        };
        assert!(s(3, 0) > s(0, 2)); // 3 > 2.83
        assert!(s(2, 0) < s(0, 2)); // 2 < 2.83
        assert!(s(1, 1) < s(3, 0));
        assert!(s(7, 0) > s(0, 4)); // 7 > 5.66
        assert!(s(0, 5) > s(7, 0)); // 7.07 > 7
        assert_eq!(s(2, 2).cmp(&s(2, 2)), Ordering::Equal);
    }

    #[test]
    fn route_to_self() {
        let s = skel(&[(1, 1), (1, 2)]);
        let r = shortest_route(&s, p(1, 1), p(1, 1)).unwrap();
        assert_eq!(r.path, vec![p(1, 1)]);
        assert_eq!(r.cost, 0.0);
    }

    #[test]
    fn route_along_line() {
        let s = skel(&(0..8).map(|c| (3, c)).collect::<Vec<_>>());
        let r = shortest_route(&s, p(3, 0), p(3, 7)).unwrap();
        assert_eq!(r.path.len(), 8);
        assert_eq!(r.cost, 7.0);
    }

    #[test]
    fn route_errors() {
        let s = skel(&[(0, 0), (0, 1), (5, 5)]);
        assert!(matches!(shortest_route(&s, p(0, 0), p(2, 2)), Err(Error::OffSkeleton(_))));
        assert!(matches!(
            shortest_route(&s, p(0, 0), p(5, 5)),
            Err(Error::Unreachable { .. })
        ));
    }

    #[test]
    fn chord_examples() {
        let c = rasterize_chord(p(0, 0), p(0, 5));
        assert_eq!(c.raster, (0..6).map(|c| p(0, c)).collect::<Vec<_>>());
        assert_eq!(c.euclid, 5.0);
        assert_eq!(rasterize_chord(p(0, 0), p(3, 4)).euclid, 5.0);
        let single = rasterize_chord(p(2, 2), p(2, 2));
        assert_eq!((single.raster.len(), single.euclid), (1, 0.0));
        let back = rasterize_chord(p(5, 2), p(0, 0));
        assert_eq!((back.raster[0], *back.raster.last().unwrap()), (p(5, 2), p(0, 0)));
    }

    #[test]
    fn straight_loop_has_no_area() {
        let s = skel(&(0..6).map(|c| (2, c)).collect::<Vec<_>>());
        let r = shortest_route(&s, p(2, 0), p(2, 5)).unwrap();
        let c = rasterize_chord(p(2, 0), p(2, 5));
        assert_eq!(inner_area(&r, &c).unwrap(), 0);
    }

    fn square_loop(r0: usize, c0: usize) -> (Route, Chord) {
        // three sides of a 10x10 square, chord along the fourth
        let mut path = Vec::new();
        path.extend((0..10).map(|r| p(r0 + r, c0)));
        path.extend((1..10).map(|c| p(r0 + 9, c0 + c)));
        path.extend((0..9).rev().map(|r| p(r0 + r, c0 + 9)));
        let route = Route {
            steps: StepCount {
                orthogonal: (path.len() - 1) as u32,
                diagonal: 0,
            },
            cost: (path.len() - 1) as f64,
            path,
        };
        (route, rasterize_chord(p(r0, c0), p(r0, c0 + 9)))
    }

    #[test]
    fn square_area_and_translation() {
        let (r, c) = square_loop(0, 0);
        assert_eq!(inner_area(&r, &c).unwrap(), 64);
        let (r, c) = square_loop(7, 3);
        assert_eq!(inner_area(&r, &c).unwrap(), 64);
    }

    #[test]
    fn mismatched_endpoints_rejected() {
        let (r, _) = square_loop(0, 0);
        let c = rasterize_chord(p(0, 0), p(0, 8));
        assert!(matches!(inner_area(&r, &c), Err(Error::InvalidParameter(_))));
    }

    fn plus() -> Skeleton {
        let mut v: Vec<(usize, usize)> = (0..9).map(|c| (4, c)).collect();
        v.extend((0..9).filter(|&r| r != 4).map(|r| (r, 4)));
        skel(&v)
    }

    #[test]
    fn plus_counts_two() {
        let rc = count_skeleton(&plus()).unwrap();
        assert_eq!(rc.n_tracks, 2);
        assert_eq!(rc.degenerate, Degenerate::None);
        // straight pairs enclose nothing, bent pairs enclose a triangle
        for cand in &rc.candidates {
            assert_eq!(cand.inner_area, 0);
            assert!(cand.via_intersection);
        }
    }

    #[test]
    fn y_counts_two_with_closure() {
        // stem going down from (4, 4), two arms going up-left and up-right
        let mut v: Vec<(usize, usize)> = (5..10).map(|r| (r, 4)).collect();
        v.push((4, 4));
        v.extend((1..5).map(|k| (4 - k, 4 - k)));
        v.extend((1..5).map(|k| (4 - k, 4 + k)));
        let rc = count_skeleton(&skel(&v)).unwrap();
        assert_eq!(rc.extremities.len(), 3);
        assert_eq!(rc.n_tracks, 2);
        let closing: Vec<_> = rc.candidates.iter().filter(|c| c.closes_on_intersection).collect();
        assert_eq!(closing.len(), 1);
        assert!(rc.intersections.contains(&closing[0].endpoints.1));
    }

    #[test]
    fn point_and_path_degenerates() {
        let point = count_skeleton(&skel(&[(3, 3)])).unwrap();
        assert_eq!((point.n_tracks, point.degenerate), (0, Degenerate::SinglePixel));
        let path = count_skeleton(&skel(&[(0, 0), (1, 1), (2, 2), (2, 3)])).unwrap();
        assert_eq!((path.n_tracks, path.degenerate), (1, Degenerate::NoIntersections));
        assert_eq!(path.candidates.len(), 1);
    }

    #[test]
    fn loop_skeleton_has_no_extremities() {
        let ring = skel(&[(0, 1), (1, 0), (1, 2), (2, 1)]);
        let rc = count_skeleton(&ring).unwrap();
        assert_eq!((rc.n_tracks, rc.degenerate), (0, Degenerate::NoExtremities));
    }

    #[test]
    fn region_of_one_pixel_counts_zero() {
        let rc = count_region(&Region::new(1, vec![p(5, 5)])).unwrap();
        assert_eq!(rc.n_tracks, 0);
    }
}
