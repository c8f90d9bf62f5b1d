//! Fixed-length unit-mass shape histograms: skeleton pattern spectrum,
//! contour pattern spectrum and rotation-invariant local binary patterns.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::morphology::{box_distance_transform, distance_transform, extract_contour, extract_skeleton};
use crate::raster::{bounding_box, BinaryShape};

pub const SPECTRUM_BINS: usize = 10;
pub const LBP_BINS: usize = 36;

/// Slack used when flooring `bins · r / max`, so that radii sitting exactly on
/// a bin edge land in the same bin whatever common factor they were scaled by.
const EDGE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HistogramKind {
    /// Skeleton pattern spectrum.
    Sps,
    /// Contour pattern spectrum.
    Cps,
    /// Rotation-invariant local binary patterns.
    Lbp,
}

impl HistogramKind {
    pub fn bin_count(self) -> usize {
        match self {
            HistogramKind::Sps | HistogramKind::Cps => SPECTRUM_BINS,
            HistogramKind::Lbp => LBP_BINS,
        }
    }
}

/// Non-negative weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    kind: HistogramKind,
    bins: Vec<f64>,
}

impl Histogram {
    /// Validates bin count, sign and unit mass (within 1e-12).
    pub fn new(kind: HistogramKind, bins: Vec<f64>) -> Result<Self> {
        if bins.len() != kind.bin_count() {
            return Err(Error::BinConfig(format!(
                "{kind:?} histogram has {} bins, expected {}",
                bins.len(),
                kind.bin_count()
            )));
        }
        if bins.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidArgument(format!(
                "{kind:?} histogram has negative or non-finite weights"
            )));
        }
        let mass: f64 = bins.iter().sum();
        if (mass - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "{kind:?} histogram mass {mass} is not 1"
            )));
        }
        Ok(Self { kind, bins })
    }

    /// Normalizes raw counts to unit mass.
    pub fn from_counts(kind: HistogramKind, counts: &[u64]) -> Result<Self> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::EmptySpectrumSource);
        }
        let bins = counts.iter().map(|&c| c as f64 / total as f64).collect();
        Self::new(kind, bins)
    }

    pub fn kind(&self) -> HistogramKind {
        self.kind
    }

    pub fn bins(&self) -> &[f64] {
        &self.bins
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }
}

/// The three histograms describing one shape.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorSet {
    pub shape_id: String,
    pub class_label: String,
    pub sps: Histogram,
    pub cps: Histogram,
    pub lbp: Histogram,
}

/// Bin of radius `r` among [`SPECTRUM_BINS`] equal-width bins over `[0, max]`.
#[inline]
fn spectrum_bin(r: f64, max: f64) -> usize {
    let t = SPECTRUM_BINS as f64 * r / max;
    ((t + EDGE_SLACK).floor() as usize).min(SPECTRUM_BINS - 1)
}

/// Ten-bin size distribution of positive radii, normalized by the largest
/// radius so that uniformly scaling all radii leaves it unchanged.
pub fn spectrum_histogram(radii: &[f64], kind: HistogramKind) -> Result<Histogram> {
    if kind == HistogramKind::Lbp {
        return Err(Error::InvalidArgument("spectrum histograms are SPS or CPS".into()));
    }
    if radii.is_empty() {
        return Err(Error::EmptySpectrumSource);
    }
    if let Some(&bad) = radii.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
        return Err(Error::InvalidRadius(bad));
    }
    let max = radii.iter().copied().fold(f64::MIN, f64::max);
    let mut counts = [0u64; SPECTRUM_BINS];
    for &r in radii {
        counts[spectrum_bin(r, max)] += 1;
    }
    Histogram::from_counts(kind, &counts)
}

/// Pattern spectrum of the skeleton's inscribed-disc radii.
pub fn skeleton_spectrum(shape: &BinaryShape) -> Result<Histogram> {
    let dmap = distance_transform(shape);
    let skeleton = extract_skeleton(shape, &dmap)?;
    let radii: Vec<f64> = skeleton.radii().map(f64::from).collect();
    spectrum_histogram(&radii, HistogramKind::Sps)
}

/// Pattern spectrum of contour pixels measured against the bounding box.
/// Contour pixels lying on the box border are lifted from 0 to 1.
pub fn contour_spectrum(shape: &BinaryShape) -> Result<Histogram> {
    let bb = bounding_box(shape);
    let box_map = box_distance_transform(&bb);
    let contour = extract_contour(shape);
    let radii: Vec<f64> = contour
        .points
        .iter()
        .map(|&(r, c)| f64::from(box_map.get(r - bb.min_row, c - bb.min_col).max(1)))
        .collect();
    spectrum_histogram(&radii, HistogramKind::Cps)
}

/// 8-neighbor LBP code. `neighbors` run counterclockwise from east
/// (E, NE, N, NW, W, SW, S, SE); bit `p` is set when `neighbors[p] >= center`.
pub fn lbp_code<T: PartialOrd>(center: T, neighbors: &[T; 8]) -> u8 {
    neighbors
        .iter()
        .enumerate()
        .fold(0u8, |code, (p, g)| if *g >= center { code | (1 << p) } else { code })
}

/// Smallest value among the eight circular right-rotations of `code`.
pub const fn rotation_invariant_code(code: u8) -> u8 {
    let mut min = code;
    let mut i = 1;
    while i < 8 {
        let r = code.rotate_right(i);
        if r < min {
            min = r;
        }
        i += 1;
    }
    min
}

const fn build_canonical_codes() -> ([u8; LBP_BINS], [u8; 256]) {
    let mut codes = [0u8; LBP_BINS];
    let mut bin_of = [u8::MAX; 256];
    let mut n = 0;
    let mut x = 0usize;
    while x < 256 {
        if rotation_invariant_code(x as u8) == x as u8 {
            codes[n] = x as u8;
            n += 1;
        }
        x += 1;
    }
    assert!(n == LBP_BINS);
    let mut x = 0usize;
    while x < 256 {
        let canon = rotation_invariant_code(x as u8);
        let mut b = 0;
        while codes[b] != canon {
            b += 1;
        }
        bin_of[x] = b as u8;
        x += 1;
    }
    (codes, bin_of)
}

const TABLES: ([u8; LBP_BINS], [u8; 256]) = build_canonical_codes();

/// The 36 rotation-invariant codes in ascending order; position = bin index.
pub const CANONICAL_CODES: [u8; LBP_BINS] = TABLES.0;

/// Histogram bin of any raw 8-bit LBP code.
#[inline]
pub fn lbp_bin(code: u8) -> usize {
    TABLES.1[code as usize] as usize
}

// E, NE, N, NW, W, SW, S, SE with rows growing downwards
const LBP_OFFSETS: [(isize, isize); 8] = [
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
];

/// Rotation-invariant LBP histogram over the object pixels.
///
/// Codes are taken on the shape's canonical pose; rotation-invariant codes
/// already absorb quarter turns, and the pose fixes the handedness so that
/// mirrored copies give the same histogram.
pub fn lbp_histogram(shape: &BinaryShape) -> Result<Histogram> {
    let (canon, _) = shape.canonical_orientation();
    let mut counts = [0u64; LBP_BINS];
    for (r, c) in canon.foreground() {
        let mut nb = [false; 8];
        for (slot, (dr, dc)) in nb.iter_mut().zip(LBP_OFFSETS) {
            *slot = canon.get_signed(r as isize + dr, c as isize + dc);
        }
        counts[lbp_bin(lbp_code(true, &nb))] += 1;
    }
    Histogram::from_counts(HistogramKind::Lbp, &counts)
}

/// Extracts all three histograms of a shape.
pub fn describe(shape: &BinaryShape) -> Result<DescriptorSet> {
    let wrap = |e: Error| Error::Extraction {
        shape_id: shape.shape_id().to_string(),
        source: Box::new(e),
    };
    Ok(DescriptorSet {
        shape_id: shape.shape_id().to_string(),
        class_label: shape.class_label().to_string(),
        sps: skeleton_spectrum(shape).map_err(wrap)?,
        cps: contour_spectrum(shape).map_err(wrap)?,
        lbp: lbp_histogram(shape).map_err(wrap)?,
    })
}
