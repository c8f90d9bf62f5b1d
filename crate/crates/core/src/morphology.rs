//! Chamfer distance transforms, skeletonization and contour tracing.
//!
//! Distances are integers in chamfer units: an orthogonal step costs
//! [`ORTHO`], a diagonal step costs [`DIAG`].

use crate::error::{Error, Result};
use crate::raster::{bounding_box, BinaryShape, BoundingBox};

pub const ORTHO: u32 = 3;
pub const DIAG: u32 = 4;

const UNSET: u32 = u32::MAX / 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceDomain {
    /// Distance from each object pixel to the nearest background pixel.
    ObjectInterior,
    /// Distance from each pixel of a box to the nearest box-border pixel.
    BoxInterior,
}

/// Row-major grid of chamfer distances.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceMap {
    pub width: usize,
    pub height: usize,
    pub values: Vec<u32>,
    pub domain: DistanceDomain,
}

impl DistanceMap {
    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u32 {
        self.values[row * self.width + col]
    }
}

/// Two raster passes with the forward half-mask (left→right, top→bottom)
/// and its point reflection (right→left, bottom→top). Cells already at zero
/// are seeds; every other cell must start at `UNSET`.
fn chamfer_two_pass(values: &mut [u32], width: usize, height: usize) {
    let at = |r: usize, c: usize| r * width + c;
    for r in 0..height {
        for c in 0..width {
            let mut v = values[at(r, c)];
            if v == 0 {
                continue;
            }
            if c > 0 {
                v = v.min(values[at(r, c - 1)] + ORTHO);
            }
            if r > 0 {
                v = v.min(values[at(r - 1, c)] + ORTHO);
                if c > 0 {
                    v = v.min(values[at(r - 1, c - 1)] + DIAG);
                }
                if c + 1 < width {
                    v = v.min(values[at(r - 1, c + 1)] + DIAG);
                }
            }
            values[at(r, c)] = v;
        }
    }
    for r in (0..height).rev() {
        for c in (0..width).rev() {
            let mut v = values[at(r, c)];
            if v == 0 {
                continue;
            }
            if c + 1 < width {
                v = v.min(values[at(r, c + 1)] + ORTHO);
            }
            if r + 1 < height {
                v = v.min(values[at(r + 1, c)] + ORTHO);
                if c + 1 < width {
                    v = v.min(values[at(r + 1, c + 1)] + DIAG);
                }
                if c > 0 {
                    v = v.min(values[at(r + 1, c - 1)] + DIAG);
                }
            }
            values[at(r, c)] = v;
        }
    }
}

/// Chamfer (3,4) distance of every object pixel to the background.
pub fn distance_transform(shape: &BinaryShape) -> DistanceMap {
    let (width, height) = (shape.width(), shape.height());
    let mut values: Vec<u32> = shape
        .mask()
        .iter()
        .map(|&fg| if fg { UNSET } else { 0 })
        .collect();
    chamfer_two_pass(&mut values, width, height);
    DistanceMap {
        width,
        height,
        values,
        domain: DistanceDomain::ObjectInterior,
    }
}

/// Chamfer (3,4) distance of every pixel of the box to the box border.
/// The map is indexed relative to the box's top-left corner.
pub fn box_distance_transform(bbox: &BoundingBox) -> DistanceMap {
    let (width, height) = (bbox.width(), bbox.height());
    let mut values = vec![UNSET; width * height];
    for r in 0..height {
        for c in 0..width {
            if r == 0 || c == 0 || r + 1 == height || c + 1 == width {
                values[r * width + c] = 0;
            }
        }
    }
    chamfer_two_pass(&mut values, width, height);
    DistanceMap {
        width,
        height,
        values,
        domain: DistanceDomain::BoxInterior,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct SkeletonPoint {
    pub row: usize,
    pub col: usize,
    /// Chamfer distance to the background at this point.
    pub radius: u32,
}

/// Medial pixels of a shape with their inscribed-disc radii.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Skeleton {
    pub points: Vec<SkeletonPoint>,
}

impl Skeleton {
    pub fn radii(&self) -> impl Iterator<Item = u32> + '_ {
        self.points.iter().map(|p| p.radius)
    }
}

// Neighbor offsets in Zhang-Suen order P2..P9: N, NE, E, SE, S, SW, W, NW.
const ZS_OFFSETS: [(isize, isize); 8] = [
    (-1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
    (1, 0),
    (1, -1),
    (0, -1),
    (-1, -1),
];

fn zs_neighbors(mask: &[bool], width: usize, r: usize, c: usize) -> [bool; 8] {
    let mut n = [false; 8];
    for (slot, (dr, dc)) in n.iter_mut().zip(ZS_OFFSETS) {
        let (rr, cc) = ((r as isize + dr) as usize, (c as isize + dc) as usize);
        *slot = mask[rr * width + cc];
    }
    n
}

/// Zhang-Suen deletion test for one sub-iteration.
fn zs_deletable(n: &[bool; 8], first_pass: bool) -> bool {
    let b = n.iter().filter(|&&v| v).count();
    if !(2..=6).contains(&b) {
        return false;
    }
    let transitions = (0..8).filter(|&i| !n[i] && n[(i + 1) % 8]).count();
    if transitions != 1 {
        return false;
    }
    let [p2, _, p4, _, p6, _, p8, _] = *n;
    if first_pass {
        !(p2 && p4 && p6) && !(p4 && p6 && p8)
    } else {
        !(p2 && p4 && p8) && !(p2 && p6 && p8)
    }
}

/// Zhang-Suen thinning in place. Candidates of each sub-iteration are
/// collected in parallel and then re-checked one by one in raster order
/// before removal, so every removed pixel is simple at the moment it goes.
/// This keeps 2×2 blocks and two-pixel-thick diagonals from vanishing.
/// The mask must have a clear one-pixel border.
pub fn zhang_suen_thin(mask: &mut [bool], width: usize, height: usize) {
    if width < 3 || height < 3 {
        return;
    }
    loop {
        let mut changed = false;
        for first_pass in [true, false] {
            let mut candidates = Vec::new();
            for r in 1..height - 1 {
                for c in 1..width - 1 {
                    if mask[r * width + c] && zs_deletable(&zs_neighbors(mask, width, r, c), first_pass) {
                        candidates.push((r, c));
                    }
                }
            }
            for (r, c) in candidates {
                if zs_deletable(&zs_neighbors(mask, width, r, c), first_pass) {
                    mask[r * width + c] = false;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
}

/// Thin, connectivity-preserving skeleton with radii read from `dmap`.
///
/// Thinning runs on the shape's canonical pose (see
/// [`BinaryShape::canonical_orientation`]) and the result is mapped back, so
/// the radius multiset is identical for all translated, rotated and
/// mirrored copies of a shape.
pub fn extract_skeleton(shape: &BinaryShape, dmap: &DistanceMap) -> Result<Skeleton> {
    if dmap.width != shape.width() || dmap.height != shape.height() {
        return Err(Error::DimensionMismatch(format!(
            "distance map {}×{} vs shape {}×{}",
            dmap.width,
            dmap.height,
            shape.width(),
            shape.height()
        )));
    }
    if dmap.domain != DistanceDomain::ObjectInterior {
        return Err(Error::InvalidArgument(
            "skeleton radii need an object-interior distance map".into(),
        ));
    }
    let bb = bounding_box(shape);
    let (canon, orientation) = shape.canonical_orientation();
    let (ch, cw) = (canon.height(), canon.width());
    let mut thin = canon.mask().to_vec();
    zhang_suen_thin(&mut thin, cw, ch);

    let back = orientation.inverse();
    let mut points: Vec<SkeletonPoint> = thin
        .iter()
        .enumerate()
        .filter(|(_, &v)| v)
        .map(|(i, _)| {
            // canonical → cropped (1-px margin) → original coordinates
            let (r, c) = back.map(i / cw, i % cw, ch, cw);
            let (row, col) = (r + bb.min_row - 1, c + bb.min_col - 1);
            SkeletonPoint {
                row,
                col,
                radius: dmap.get(row, col),
            }
        })
        .collect();
    points.sort();
    Ok(Skeleton { points })
}

/// Boundary pixels of a shape.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Contour {
    /// Closed Moore traversals in discovery order. Consecutive entries (and
    /// last→first) are 8-adjacent; one-pixel-wide parts are walked on both
    /// sides, so a pixel can repeat within a loop.
    pub loops: Vec<Vec<(usize, usize)>>,
    /// Each boundary pixel once, in first-visit order.
    pub points: Vec<(usize, usize)>,
}

// Clockwise (row axis pointing down): E, SE, S, SW, W, NW, N, NE.
const MOORE_OFFSETS: [(isize, isize); 8] = [
    (0, 1),
    (1, 1),
    (1, 0),
    (1, -1),
    (0, -1),
    (-1, -1),
    (-1, 0),
    (-1, 1),
];

fn moore_trace(shape: &BinaryShape, start: (usize, usize), start_back: usize) -> Vec<(usize, usize)> {
    let mut path = vec![start];
    let (mut cur, mut back) = (start, start_back);
    // Each (pixel, backtrack) state occurs at most once per loop.
    let cap = 8 * shape.width() * shape.height() + 8;
    for _ in 0..cap {
        let mut next = None;
        for k in 1..=8 {
            let d = (back + k) % 8;
            let (dr, dc) = MOORE_OFFSETS[d];
            let (r, c) = (cur.0 as isize + dr, cur.1 as isize + dc);
            if shape.get_signed(r, c) {
                let prev = (back + k - 1) % 8;
                next = Some(((r as usize, c as usize), prev));
                break;
            }
        }
        let Some((pix, prev_dir)) = next else {
            // isolated pixel
            return path;
        };
        // express the backtrack pixel as a direction seen from the new pixel
        let (pr, pc) = MOORE_OFFSETS[prev_dir];
        let bpix = (cur.0 as isize + pr, cur.1 as isize + pc);
        let rel = (bpix.0 - pix.0 as isize, bpix.1 - pix.1 as isize);
        let new_back = MOORE_OFFSETS
            .iter()
            .position(|&o| o == rel)
            .expect("backtrack pixel is adjacent to the next contour pixel");
        if pix == start && new_back == start_back {
            break;
        }
        path.push(pix);
        cur = pix;
        back = new_back;
    }
    path
}

fn has_background_4_neighbor(shape: &BinaryShape, r: usize, c: usize) -> Option<usize> {
    // W, N, E, S as indices into MOORE_OFFSETS
    [4usize, 6, 0, 2].into_iter().find(|&d| {
        let (dr, dc) = MOORE_OFFSETS[d];
        !shape.get_signed(r as isize + dr, c as isize + dc)
    })
}

/// Moore-neighbor tracing of every boundary (outer and hole) of every
/// component. The point set is exactly the object pixels that have a
/// 4-neighbor in the background.
pub fn extract_contour(shape: &BinaryShape) -> Contour {
    let w = shape.width();
    let mut visited = vec![false; w * shape.height()];
    let mut loops = Vec::new();
    let mut points = Vec::new();
    for (r, c) in shape.foreground() {
        if visited[r * w + c] {
            continue;
        }
        let Some(back) = has_background_4_neighbor(shape, r, c) else {
            continue;
        };
        let lp = moore_trace(shape, (r, c), back);
        for &(pr, pc) in &lp {
            if !visited[pr * w + pc] {
                visited[pr * w + pc] = true;
                points.push((pr, pc));
            }
        }
        loops.push(lp);
    }
    Contour { loops, points }
}
