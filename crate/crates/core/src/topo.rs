//! Connected components, skeletonization and skeleton pixel classes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::raster::{BinaryImage, PixelCoord, NEIGHBORS8};

/// Component labels: 0 is background, `1..=count` are 8-connected regions
/// numbered in raster order of their first pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledImage {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    count: usize,
}

impl LabeledImage {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn get(&self, row: usize, col: usize) -> u32 {
        self.labels[row * self.width + col]
    }

    /// All regions, ordered by label.
    pub fn regions(&self) -> Vec<Region> {
        let mut pixels: Vec<Vec<PixelCoord>> = vec![Vec::new(); self.count];
        for (i, &l) in self.labels.iter().enumerate() {
            if l != 0 {
                pixels[l as usize - 1].push(PixelCoord::new(i / self.width, i % self.width));
            }
        }
        pixels
            .into_iter()
            .enumerate()
            .map(|(i, px)| Region::new(i as u32 + 1, px))
            .collect()
    }
}

pub fn label_regions(bin: &BinaryImage) -> LabeledImage {
    let (w, h) = (bin.width(), bin.height());
    let mut labels = vec![0u32; w * h];
    let mut count = 0u32;
    let mut stack = Vec::new();
    for start in 0..w * h {
        if !bin.mask()[start] || labels[start] != 0 {
            continue;
        }
        count += 1;
        labels[start] = count;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let (row, col) = ((i / w) as isize, (i % w) as isize);
            for (dr, dc) in NEIGHBORS8 {
                let (r, c) = (row + dr, col + dc);
                if r < 0 || c < 0 || r >= h as isize || c >= w as isize {
                    continue;
                }
                let j = r as usize * w + c as usize;
                if bin.mask()[j] && labels[j] == 0 {
                    labels[j] = count;
                    stack.push(j);
                }
            }
        }
    }
    LabeledImage {
        width: w,
        height: h,
        labels,
        count: count as usize,
    }
}

/// Inclusive bounding box `(min_row, min_col, max_row, max_col)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min_row: usize,
    pub min_col: usize,
    pub max_row: usize,
    pub max_col: usize,
}

impl BoundingBox {
    fn of(pixels: &[PixelCoord]) -> Self {
        let mut b = BoundingBox {
            min_row: usize::MAX,
            min_col: usize::MAX,
            max_row: 0,
            max_col: 0,
        };
        for p in pixels {
            b.min_row = b.min_row.min(p.row);
            b.min_col = b.min_col.min(p.col);
            b.max_row = b.max_row.max(p.row);
            b.max_col = b.max_col.max(p.col);
        }
        b
    }

    pub fn height(&self) -> usize {
        self.max_row - self.min_row + 1
    }

    pub fn width(&self) -> usize {
        self.max_col - self.min_col + 1
    }
}

/// One connected foreground component.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Region {
    pub label: u32,
    pixels: Vec<PixelCoord>,
    bbox: BoundingBox,
}

impl Region {
    /// Panics on an empty pixel list; connectivity is the caller's contract.
    pub fn new(label: u32, mut pixels: Vec<PixelCoord>) -> Self {
        assert!(!pixels.is_empty(), "a region needs at least one pixel");
        pixels.sort_unstable();
        pixels.dedup();
        let bbox = BoundingBox::of(&pixels);
        Self {
            label,
            pixels,
            bbox,
        }
    }

    pub fn pixels(&self) -> &[PixelCoord] {
        &self.pixels
    }

    pub fn bbox(&self) -> BoundingBox {
        self.bbox
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }
}

/// A pixel set held in a local grid that covers its bounding box plus a
/// one-pixel background margin.
#[derive(Debug, Clone, PartialEq, Eq)]
struct LocalGrid {
    /// global coordinate of local `(0, 0)`, may be -1
    origin: (isize, isize),
    grid: BinaryImage,
}

impl LocalGrid {
    fn new(pixels: &[PixelCoord]) -> Self {
        let bbox = BoundingBox::of(pixels);
        let origin = (bbox.min_row as isize - 1, bbox.min_col as isize - 1);
        let mut grid = BinaryImage::empty(bbox.width() + 2, bbox.height() + 2)
            .expect("bounding box is nonempty");
        for p in pixels {
            grid.set(
                (p.row as isize - origin.0) as usize,
                (p.col as isize - origin.1) as usize,
                true,
            );
        }
        Self { origin, grid }
    }

    fn local(&self, p: PixelCoord) -> Option<(usize, usize)> {
        let r = p.row as isize - self.origin.0;
        let c = p.col as isize - self.origin.1;
        (r >= 0 && c >= 0 && (r as usize) < self.grid.height() && (c as usize) < self.grid.width())
            .then_some((r as usize, c as usize))
    }

    fn global(&self, r: usize, c: usize) -> PixelCoord {
        PixelCoord::new(
            (r as isize + self.origin.0) as usize,
            (c as isize + self.origin.1) as usize,
        )
    }

    fn contains(&self, p: PixelCoord) -> bool {
        self.local(p).is_some_and(|(r, c)| self.grid.get(r, c))
    }

    fn pixels(&self) -> Vec<PixelCoord> {
        self.grid
            .foreground()
            .map(|p| self.global(p.row, p.col))
            .collect()
    }
}

/// Unit-width, topology-preserving reduction of one region.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Skeleton {
    pub source_label: u32,
    pixels: Vec<PixelCoord>,
    local: LocalGrid,
}

impl Skeleton {
    /// Wraps an explicit pixel set (used for hand-built skeletons).
    pub fn from_pixels(source_label: u32, mut pixels: Vec<PixelCoord>) -> Self {
        assert!(!pixels.is_empty(), "a skeleton needs at least one pixel");
        pixels.sort_unstable();
        pixels.dedup();
        let local = LocalGrid::new(&pixels);
        Self {
            source_label,
            pixels,
            local,
        }
    }

    /// Skeleton pixels in raster order.
    pub fn pixels(&self) -> &[PixelCoord] {
        &self.pixels
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn contains(&self, p: PixelCoord) -> bool {
        self.local.contains(p)
    }

    /// 8-neighbours of `p` that are on the skeleton, in raster order.
    pub fn neighbors(&self, p: PixelCoord) -> impl Iterator<Item = PixelCoord> + '_ {
        NEIGHBORS8.iter().filter_map(move |&(dr, dc)| {
            let r = p.row as isize + dr;
            let c = p.col as isize + dc;
            if r < 0 || c < 0 {
                return None;
            }
            let q = PixelCoord::new(r as usize, c as usize);
            self.contains(q).then_some(q)
        })
    }
}

/// Local 3x3 neighbourhood bits in the order E, NE, N, NW, W, SW, S, SE.
fn ring(grid: &BinaryImage, r: usize, c: usize) -> [bool; 8] {
    let (r, c) = (r as isize, c as isize);
    [
        grid.get_signed(r, c + 1),
        grid.get_signed(r - 1, c + 1),
        grid.get_signed(r - 1, c),
        grid.get_signed(r - 1, c - 1),
        grid.get_signed(r, c - 1),
        grid.get_signed(r + 1, c - 1),
        grid.get_signed(r + 1, c),
        grid.get_signed(r + 1, c + 1),
    ]
}

/// Yokoi connectivity number for 8-connected foreground. A border pixel is
/// simple (deletable without changing topology) exactly when this is 1.
fn yokoi8(x: &[bool; 8]) -> u32 {
    let nb = |k: usize| u32::from(!x[k % 8]);
    [0, 2, 4, 6]
        .iter()
        .map(|&k| nb(k) - nb(k) * nb(k + 1) * nb(k + 2))
        .sum()
}

/// Guo-Hall deletion test for one sub-iteration; `x` is in E, NE, N, NW, W,
/// SW, S, SE order.
fn guo_hall_deletes(x: &[bool; 8], second: bool) -> bool {
    let b = |k: usize| x[k % 8];
    let crossings = [0, 2, 4, 6]
        .iter()
        .filter(|&&i| !b(i) && (b(i + 1) || b(i + 2)))
        .count();
    if crossings != 1 {
        return false;
    }
    let n1 = [1, 3, 5, 7].iter().filter(|&&k| b(k) || b(k - 1)).count();
    let n2 = [1, 3, 5, 7].iter().filter(|&&k| b(k) || b(k + 1)).count();
    if !(2..=3).contains(&n1.min(n2)) {
        return false;
    }
    if second {
        !((b(5) || b(6) || !b(3)) && b(4))
    } else {
        !((b(1) || b(2) || !b(7)) && b(0))
    }
}

/// Thins a region to a unit-width skeleton.
///
/// Guo-Hall two-sub-iteration parallel thinning, which preserves
/// 8-connectivity but keeps isolated 2x2 squares; any 2x2 block left over
/// is broken up afterwards.
pub fn skeletonize(region: &Region) -> Skeleton {
    let mut local = LocalGrid::new(region.pixels());
    let grid = &mut local.grid;
    let (w, h) = (grid.width(), grid.height());

    let mut changed = true;
    while changed {
        changed = false;
        for second in [false, true] {
            let doomed: Vec<(usize, usize)> = (1..h - 1)
                .flat_map(|r| (1..w - 1).map(move |c| (r, c)))
                .filter(|&(r, c)| grid.get(r, c) && guo_hall_deletes(&ring(grid, r, c), second))
                .collect();
            changed |= !doomed.is_empty();
            for (r, c) in doomed {
                grid.set(r, c, false);
            }
        }
    }
    break_blocks(grid);

    Skeleton {
        source_label: region.label,
        pixels: local.pixels(),
        local,
    }
}

fn full_block(grid: &BinaryImage, r: usize, c: usize) -> bool {
    grid.get(r, c) && grid.get(r, c + 1) && grid.get(r + 1, c) && grid.get(r + 1, c + 1)
}

/// Removes pixels until no 2x2 block is entirely foreground, keeping a
/// single 8-connected component.
fn break_blocks(grid: &mut BinaryImage) {
    let (w, h) = (grid.width(), grid.height());
    'scan: loop {
        for r in 0..h - 1 {
            for c in 0..w - 1 {
                if !full_block(grid, r, c) {
                    continue;
                }
                let corners = [(r, c), (r, c + 1), (r + 1, c), (r + 1, c + 1)];
                if let Some(&(pr, pc)) = corners
                    .iter()
                    .find(|&&(pr, pc)| yokoi8(&ring(grid, pr, pc)) == 1)
                {
                    grid.set(pr, pc, false);
                    continue 'scan;
                }
                // every corner anchors a branch: drop the one whose removal
                // detaches the fewest pixels, together with that branch
                let mut best: Option<(usize, BinaryImage)> = None;
                for &(pr, pc) in &corners {
                    let mut trial = grid.clone();
                    trial.set(pr, pc, false);
                    let kept = keep_largest_component(&trial);
                    let lost = grid.count() - kept.count();
                    if best.as_ref().is_none_or(|(l, _)| lost < *l) {
                        best = Some((lost, kept));
                    }
                }
                *grid = best.expect("four corners tried").1;
                continue 'scan;
            }
        }
        break;
    }
}

fn keep_largest_component(grid: &BinaryImage) -> BinaryImage {
    let labels = label_regions(grid);
    let mut sizes = vec![0usize; labels.count() + 1];
    for &l in labels.labels() {
        sizes[l as usize] += 1;
    }
    // first label wins ties
    let keep = (1..sizes.len()).fold(0, |best, l| if sizes[l] > sizes[best] { l } else { best });
    BinaryImage::new(
        grid.width(),
        grid.height(),
        labels.labels().iter().map(|&l| l as usize == keep && keep != 0).collect(),
    )
    .expect("same shape")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PixelClass {
    /// exactly one skeleton neighbour
    Extremity,
    /// more than two skeleton neighbours
    Intersection,
    /// exactly two skeleton neighbours
    Common,
    /// no skeleton neighbours
    Isolated,
}

impl PixelClass {
    pub fn from_neighbor_count(n: usize) -> Self {
        match n {
            0 => PixelClass::Isolated,
            1 => PixelClass::Extremity,
            2 => PixelClass::Common,
            _ => PixelClass::Intersection,
        }
    }
}

/// Class of every skeleton pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PixelClasses(BTreeMap<PixelCoord, PixelClass>);

impl PixelClasses {
    pub fn get(&self, p: &PixelCoord) -> Option<PixelClass> {
        self.0.get(p).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PixelCoord, &PixelClass)> {
        self.0.iter()
    }

    /// Pixels of one class in raster order.
    pub fn of(&self, class: PixelClass) -> Vec<PixelCoord> {
        self.0
            .iter()
            .filter(|(_, &c)| c == class)
            .map(|(&p, _)| p)
            .collect()
    }

    pub fn count(&self, class: PixelClass) -> usize {
        self.0.values().filter(|&&c| c == class).count()
    }

    pub fn extremities(&self) -> Vec<PixelCoord> {
        self.of(PixelClass::Extremity)
    }

    pub fn intersections(&self) -> Vec<PixelCoord> {
        self.of(PixelClass::Intersection)
    }
}

pub fn classify_pixels(skel: &Skeleton) -> PixelClasses {
    PixelClasses(
        skel.pixels()
            .iter()
            .map(|&p| (p, PixelClass::from_neighbor_count(skel.neighbors(p).count())))
            .collect(),
    )
}
