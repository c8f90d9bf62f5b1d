//! Binary shape rasters: loading, validation, normalization and dataset ingestion.
//!
//! Every [`BinaryShape`] carries a background margin of at least one pixel so
//! that neighborhood operations downstream never have to special-case the
//! image border.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Intensities strictly above this value become foreground.
pub const FOREGROUND_THRESHOLD: u8 = 128;

/// A 2-D boolean raster (true = object) with identity and class metadata.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryShape {
    width: usize,
    height: usize,
    mask: Vec<bool>,
    shape_id: String,
    class_label: String,
}

/// Tight axis-aligned box around the foreground, inclusive on all sides.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BoundingBox {
    pub min_row: usize,
    pub min_col: usize,
    pub max_row: usize,
    pub max_col: usize,
}

impl BoundingBox {
    pub fn height(&self) -> usize {
        self.max_row - self.min_row + 1
    }

    pub fn width(&self) -> usize {
        self.max_col - self.min_col + 1
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        (self.min_row..=self.max_row).contains(&row) && (self.min_col..=self.max_col).contains(&col)
    }
}

/// One of the eight symmetries of the square grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Orientation {
    Identity,
    Rot90,
    Rot180,
    Rot270,
    FlipHorizontal,
    FlipVertical,
    Transpose,
    AntiTranspose,
}

impl Orientation {
    pub const ALL: [Orientation; 8] = [
        Orientation::Identity,
        Orientation::Rot90,
        Orientation::Rot180,
        Orientation::Rot270,
        Orientation::FlipHorizontal,
        Orientation::FlipVertical,
        Orientation::Transpose,
        Orientation::AntiTranspose,
    ];

    /// Dimensions (height, width) of a `height × width` grid after the transform.
    pub fn output_dims(self, height: usize, width: usize) -> (usize, usize) {
        match self {
            Orientation::Identity
            | Orientation::Rot180
            | Orientation::FlipHorizontal
            | Orientation::FlipVertical => (height, width),
            _ => (width, height),
        }
    }

    /// Where pixel `(row, col)` of a `height × width` grid lands.
    /// `Rot90` is a clockwise quarter turn.
    pub fn map(self, row: usize, col: usize, height: usize, width: usize) -> (usize, usize) {
        match self {
            Orientation::Identity => (row, col),
            Orientation::Rot90 => (col, height - 1 - row),
            Orientation::Rot180 => (height - 1 - row, width - 1 - col),
            Orientation::Rot270 => (width - 1 - col, row),
            Orientation::FlipHorizontal => (row, width - 1 - col),
            Orientation::FlipVertical => (height - 1 - row, col),
            Orientation::Transpose => (col, row),
            Orientation::AntiTranspose => (width - 1 - col, height - 1 - row),
        }
    }

    pub fn inverse(self) -> Orientation {
        match self {
            Orientation::Rot90 => Orientation::Rot270,
            Orientation::Rot270 => Orientation::Rot90,
            other => other,
        }
    }
}

impl BinaryShape {
    /// Wraps an already-normalized mask. Fails unless the mask has
    /// `width × height` entries, at least one foreground pixel and a clear
    /// one-pixel border.
    pub fn new(
        width: usize,
        height: usize,
        mask: Vec<bool>,
        shape_id: impl Into<String>,
        class_label: impl Into<String>,
    ) -> Result<Self> {
        let shape_id = shape_id.into();
        if mask.len() != width * height {
            return Err(Error::InvalidShape(format!(
                "{shape_id}: mask has {} entries, expected {width}×{height}",
                mask.len()
            )));
        }
        if !mask.iter().any(|&v| v) {
            return Err(Error::EmptyShape(shape_id));
        }
        let touches_border = (0..width).any(|c| mask[c] || mask[(height - 1) * width + c])
            || (0..height).any(|r| mask[r * width] || mask[r * width + width - 1]);
        if touches_border {
            return Err(Error::InvalidShape(format!(
                "{shape_id}: foreground touches the outer border"
            )));
        }
        Ok(Self {
            width,
            height,
            mask,
            shape_id,
            class_label: class_label.into(),
        })
    }

    /// Builds a shape from a raw mask, adding a one-pixel background border.
    pub fn from_unpadded(
        width: usize,
        height: usize,
        mask: &[bool],
        shape_id: impl Into<String>,
        class_label: impl Into<String>,
    ) -> Result<Self> {
        let shape_id = shape_id.into();
        if mask.len() != width * height {
            return Err(Error::InvalidShape(format!(
                "{shape_id}: mask has {} entries, expected {width}×{height}",
                mask.len()
            )));
        }
        let (pw, ph) = (width + 2, height + 2);
        let mut padded = vec![false; pw * ph];
        for r in 0..height {
            padded[(r + 1) * pw + 1..(r + 1) * pw + 1 + width]
                .copy_from_slice(&mask[r * width..(r + 1) * width]);
        }
        Self::new(pw, ph, padded, shape_id, class_label)
    }

    /// Convenience constructor from rows of `'#'` (foreground) and any other
    /// character (background); the result is padded.
    pub fn from_ascii(rows: &[&str], shape_id: &str, class_label: &str) -> Result<Self> {
        let height = rows.len();
        let width = rows.iter().map(|r| r.chars().count()).max().unwrap_or(0);
        let mut mask = vec![false; width * height];
        for (r, line) in rows.iter().enumerate() {
            for (c, ch) in line.chars().enumerate() {
                mask[r * width + c] = ch == '#';
            }
        }
        Self::from_unpadded(width, height, &mask, shape_id, class_label)
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

    pub fn shape_id(&self) -> &str {
        &self.shape_id
    }

    pub fn class_label(&self) -> &str {
        &self.class_label
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.mask[row * self.width + col]
    }

    /// Like [`get`](Self::get) but treats anything outside the grid as background.
    #[inline]
    pub fn get_signed(&self, row: isize, col: isize) -> bool {
        row >= 0
            && col >= 0
            && (row as usize) < self.height
            && (col as usize) < self.width
            && self.mask[row as usize * self.width + col as usize]
    }

    pub fn foreground_count(&self) -> usize {
        self.mask.iter().filter(|&&v| v).count()
    }

    /// Foreground pixel coordinates in raster order.
    pub fn foreground(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.mask
            .iter()
            .enumerate()
            .filter(|(_, &v)| v)
            .map(move |(i, _)| (i / w, i % w))
    }

    pub fn with_identity(mut self, shape_id: impl Into<String>, class_label: impl Into<String>) -> Self {
        self.shape_id = shape_id.into();
        self.class_label = class_label.into();
        self
    }

    /// Applies a grid symmetry to the whole raster (padding included).
    pub fn oriented(&self, orientation: Orientation) -> BinaryShape {
        let (h, w) = orientation.output_dims(self.height, self.width);
        let mut mask = vec![false; w * h];
        for (r, c) in self.foreground() {
            let (nr, nc) = orientation.map(r, c, self.height, self.width);
            mask[nr * w + nc] = true;
        }
        BinaryShape {
            width: w,
            height: h,
            mask,
            shape_id: self.shape_id.clone(),
            class_label: self.class_label.clone(),
        }
    }

    /// Moves the foreground by `(dr, dc)` inside a grid enlarged by
    /// `(extra_rows, extra_cols)`. Fails if the result would leave the grid or
    /// touch its border.
    pub fn translated(&self, dr: isize, dc: isize, extra_rows: usize, extra_cols: usize) -> Result<BinaryShape> {
        let (h, w) = (self.height + extra_rows, self.width + extra_cols);
        let mut mask = vec![false; w * h];
        for (r, c) in self.foreground() {
            let (nr, nc) = (r as isize + dr, c as isize + dc);
            if nr < 0 || nc < 0 || nr as usize >= h || nc as usize >= w {
                return Err(Error::InvalidShape(format!(
                    "{}: translation moves foreground outside the grid",
                    self.shape_id
                )));
            }
            mask[nr as usize * w + nc as usize] = true;
        }
        BinaryShape::new(w, h, mask, self.shape_id.clone(), self.class_label.clone())
    }

    /// Crops to the bounding box and re-pads with a single background pixel.
    pub fn cropped(&self) -> BinaryShape {
        let bb = bounding_box(self);
        let (w, h) = (bb.width() + 2, bb.height() + 2);
        let mut mask = vec![false; w * h];
        for (r, c) in self.foreground() {
            mask[(r - bb.min_row + 1) * w + (c - bb.min_col + 1)] = true;
        }
        BinaryShape {
            width: w,
            height: h,
            mask,
            shape_id: self.shape_id.clone(),
            class_label: self.class_label.clone(),
        }
    }

    /// The orientation that maps the cropped shape to its canonical pose:
    /// among the eight symmetric variants, the one with the smallest
    /// `(height, width, mask)` key. Shapes that differ only by translation or a
    /// grid symmetry share the same canonical pose.
    pub fn canonical_orientation(&self) -> (BinaryShape, Orientation) {
        let base = self.cropped();
        let mut best: Option<(BinaryShape, Orientation)> = None;
        for o in Orientation::ALL {
            let cand = base.oriented(o);
            let better = match &best {
                None => true,
                Some((b, _)) => {
                    (cand.height, cand.width, &cand.mask) < (b.height, b.width, &b.mask)
                }
            };
            if better {
                best = Some((cand, o));
            }
        }
        let (shape, o) = best.expect("eight candidates");
        (shape, o)
    }
}

/// Tight bounding box of the foreground.
pub fn bounding_box(shape: &BinaryShape) -> BoundingBox {
    let mut bb = BoundingBox {
        min_row: usize::MAX,
        min_col: usize::MAX,
        max_row: 0,
        max_col: 0,
    };
    for (r, c) in shape.foreground() {
        bb.min_row = bb.min_row.min(r);
        bb.max_row = bb.max_row.max(r);
        bb.min_col = bb.min_col.min(c);
        bb.max_col = bb.max_col.max(c);
    }
    bb
}

/// Per-load knobs.
#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Treat dark pixels as the object instead of bright ones.
    pub invert: bool,
}

/// Loads a PGM or PNG file with default options.
pub fn load_shape(path: impl AsRef<Path>) -> Result<BinaryShape> {
    load_shape_with(path, LoadOptions::default())
}

pub fn load_shape_with(path: impl AsRef<Path>, opts: LoadOptions) -> Result<BinaryShape> {
    let path = path.as_ref();
    let (width, height, gray) = decode_gray(path)?;
    let mask: Vec<bool> = gray
        .iter()
        .map(|&v| (v > FOREGROUND_THRESHOLD) != opts.invert)
        .collect();
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| Error::Malformed {
            path: path.to_path_buf(),
            reason: "file name is not valid UTF-8".into(),
        })?
        .to_string();
    let label = class_label_from_stem(&stem);
    BinaryShape::from_unpadded(width, height, &mask, stem, label)
}

/// `apple-1` → `apple`, `bird07` → `bird`, `device0-12` → `device0`.
pub fn class_label_from_stem(stem: &str) -> String {
    if let Some((prefix, suffix)) = stem.rsplit_once('-') {
        if !prefix.is_empty() && !suffix.is_empty() {
            return prefix.to_string();
        }
    }
    let trimmed = stem.trim_end_matches(|c: char| c.is_ascii_digit() || c == '_' || c == ' ');
    if trimmed.is_empty() {
        stem.to_string()
    } else {
        trimmed.to_string()
    }
}

fn extension(path: &Path) -> Option<String> {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
}

fn decode_gray(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    match extension(path).as_deref() {
        Some("pgm") | Some("pnm") => {
            let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
            decode_pgm(&bytes).map_err(|reason| Error::Malformed {
                path: path.to_path_buf(),
                reason,
            })
        }
        Some("png") => decode_png(path),
        Some("gif") => Err(Error::UnsupportedFormat {
            path: path.to_path_buf(),
            reason: "GIF is not decoded; convert the dataset to PNG first".into(),
        }),
        other => Err(Error::UnsupportedFormat {
            path: path.to_path_buf(),
            reason: format!("extension {other:?} (expected .pgm or .png)"),
        }),
    }
}

fn decode_png(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    use image::ColorType;
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let img = image::load_from_memory_with_format(&bytes, image::ImageFormat::Png).map_err(|e| {
        Error::Malformed {
            path: path.to_path_buf(),
            reason: e.to_string(),
        }
    })?;
    match img.color() {
        ColorType::L8 | ColorType::La8 | ColorType::L16 | ColorType::La16 => {}
        other => {
            return Err(Error::UnsupportedFormat {
                path: path.to_path_buf(),
                reason: format!("PNG color type {other:?}; only grayscale rasters are accepted"),
            })
        }
    }
    let luma = img.to_luma8();
    let (w, h) = luma.dimensions();
    Ok((w as usize, h as usize, luma.into_raw()))
}

/// Decodes plain (P2) and raw (P5) PGM, scaling samples to 0..=255.
pub fn decode_pgm(bytes: &[u8]) -> std::result::Result<(usize, usize, Vec<u8>), String> {
    let mut pos = 0usize;
    let magic = next_token(bytes, &mut pos).ok_or("missing magic number")?;
    let raw = match magic.as_slice() {
        b"P2" => false,
        b"P5" => true,
        other => return Err(format!("unsupported magic {:?}", String::from_utf8_lossy(other))),
    };
    let mut header = [0usize; 3];
    for (slot, name) in header.iter_mut().zip(["width", "height", "maxval"]) {
        let tok = next_token(bytes, &mut pos).ok_or(format!("missing {name}"))?;
        *slot = std::str::from_utf8(&tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or(format!("invalid {name}"))?;
    }
    let [width, height, maxval] = header;
    if width == 0 || height == 0 {
        return Err("zero-sized image".into());
    }
    if maxval == 0 || maxval > 65535 {
        return Err(format!("maxval {maxval} out of range"));
    }
    let n = width * height;
    let scale = |v: usize| -> u8 { ((v.min(maxval) * 255 + maxval / 2) / maxval) as u8 };
    let mut out = Vec::with_capacity(n);
    if raw {
        // exactly one whitespace byte separates the header from the raster
        pos += 1;
        let bps = if maxval > 255 { 2 } else { 1 };
        let data = bytes.get(pos..pos + n * bps).ok_or("truncated raster")?;
        if bps == 1 {
            out.extend(data.iter().map(|&b| scale(b as usize)));
        } else {
            out.extend(
                data.chunks_exact(2)
                    .map(|p| scale(((p[0] as usize) << 8) | p[1] as usize)),
            );
        }
    } else {
        for _ in 0..n {
            let tok = next_token(bytes, &mut pos).ok_or("truncated raster")?;
            let v: usize = std::str::from_utf8(&tok)
                .ok()
                .and_then(|s| s.parse().ok())
                .ok_or("invalid sample")?;
            out.push(scale(v));
        }
    }
    Ok((width, height, out))
}

fn next_token(bytes: &[u8], pos: &mut usize) -> Option<Vec<u8>> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    (start < *pos).then(|| bytes[start..*pos].to_vec())
}

/// Writes the shape without its one-pixel margin, so that a subsequent
/// [`load_shape`] reproduces the mask exactly. Foreground is written as 255.
/// The format follows the extension (`.pgm` or `.png`).
pub fn save_shape(shape: &BinaryShape, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let (w, h) = (shape.width - 2, shape.height - 2);
    let mut pixels = Vec::with_capacity(w * h);
    for r in 1..shape.height - 1 {
        for c in 1..shape.width - 1 {
            pixels.push(if shape.get(r, c) { 255u8 } else { 0 });
        }
    }
    match extension(path).as_deref() {
        Some("pgm") | Some("pnm") => {
            let mut buf = format!("P5\n{w} {h}\n255\n").into_bytes();
            buf.extend_from_slice(&pixels);
            let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
            f.write_all(&buf).map_err(|e| Error::io(path, e))
        }
        Some("png") => {
            let img = image::GrayImage::from_raw(w as u32, h as u32, pixels)
                .expect("buffer matches dimensions");
            img.save_with_format(path, image::ImageFormat::Png)
                .map_err(|e| Error::Malformed {
                    path: path.to_path_buf(),
                    reason: e.to_string(),
                })
        }
        other => Err(Error::UnsupportedFormat {
            path: path.to_path_buf(),
            reason: format!("extension {other:?} (expected .pgm or .png)"),
        }),
    }
}

/// How shape files are arranged on disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetLayout {
    /// `<class>-<index>.<ext>` files directly under the root.
    NameIndex,
    /// `<class>/<file>` one directory per class.
    ClassDirectories,
}

/// Shapes of one dataset in deterministic order.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub shapes: Vec<BinaryShape>,
}

impl Dataset {
    /// Class label → number of shapes, sorted by label.
    pub fn class_sizes(&self) -> BTreeMap<String, usize> {
        class_sizes(self.shapes.iter().map(|s| s.class_label()))
    }
}

pub(crate) fn class_sizes<'a>(labels: impl Iterator<Item = &'a str>) -> BTreeMap<String, usize> {
    let mut sizes = BTreeMap::new();
    for l in labels {
        *sizes.entry(l.to_string()).or_insert(0) += 1;
    }
    sizes
}

fn is_shape_file(path: &Path) -> bool {
    matches!(
        extension(path).as_deref(),
        Some("pgm") | Some("pnm") | Some("png") | Some("gif")
    )
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        out.push(entry.path());
    }
    out.sort();
    Ok(out)
}

/// Inspects `root` and reports which layout it follows.
pub fn detect_layout(root: &Path) -> Result<DatasetLayout> {
    let entries = sorted_entries(root)?;
    let has_files = entries.iter().any(|p| p.is_file() && is_shape_file(p));
    let has_dirs = entries.iter().any(|p| p.is_dir());
    match (has_files, has_dirs) {
        (true, false) => Ok(DatasetLayout::NameIndex),
        (false, true) => Ok(DatasetLayout::ClassDirectories),
        (true, true) => Err(Error::Layout {
            path: root.to_path_buf(),
            reason: "mixed layout: both shape files and class directories at the top level".into(),
        }),
        (false, false) => Err(Error::NoShapesFound(root.to_path_buf())),
    }
}

/// Loads every shape under `root`, ordered by shape_id.
pub fn ingest_dataset(root: impl AsRef<Path>, layout: DatasetLayout, opts: LoadOptions) -> Result<Dataset> {
    let root = root.as_ref();
    if !root.is_dir() {
        return Err(Error::io(
            root,
            std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory"),
        ));
    }
    // (path, class label override)
    let mut files: Vec<(PathBuf, Option<String>)> = Vec::new();
    match layout {
        DatasetLayout::NameIndex => {
            for p in sorted_entries(root)? {
                if p.is_dir() {
                    return Err(Error::Layout {
                        path: root.to_path_buf(),
                        reason: format!("unexpected directory {} in name-index layout", p.display()),
                    });
                }
                if is_shape_file(&p) {
                    files.push((p, None));
                }
            }
        }
        DatasetLayout::ClassDirectories => {
            for dir in sorted_entries(root)? {
                if !dir.is_dir() {
                    if is_shape_file(&dir) {
                        return Err(Error::Layout {
                            path: root.to_path_buf(),
                            reason: format!("stray file {} in class-directory layout", dir.display()),
                        });
                    }
                    continue;
                }
                let label = dir
                    .file_name()
                    .and_then(|s| s.to_str())
                    .unwrap_or_default()
                    .to_string();
                for p in sorted_entries(&dir)? {
                    if p.is_file() && is_shape_file(&p) {
                        files.push((p, Some(label.clone())));
                    }
                }
            }
        }
    }
    if files.is_empty() {
        return Err(Error::NoShapesFound(root.to_path_buf()));
    }

    let mut shapes = files
        .par_iter()
        .map(|(p, label)| {
            let shape = load_shape_with(p, opts)?;
            Ok(match label {
                Some(l) => {
                    let id = shape.shape_id().to_string();
                    shape.with_identity(id, l.clone())
                }
                None => shape,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    shapes.sort_by(|a, b| a.shape_id.cmp(&b.shape_id));

    let mut seen = HashSet::new();
    for s in &shapes {
        if !seen.insert(s.shape_id.as_str()) {
            return Err(Error::DuplicateShapeId(s.shape_id.clone()));
        }
    }

    let name = root
        .file_name()
        .and_then(|s| s.to_str())
        .unwrap_or("dataset")
        .to_string();
    Ok(Dataset { name, shapes })
}
