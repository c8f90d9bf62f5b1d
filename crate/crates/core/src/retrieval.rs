//! Knowledge base construction and persistence, per-channel EMD distance
//! matrices, weighted decision-level fusion and ranked queries.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::descriptors::{describe, DescriptorSet, Histogram, HistogramKind, LBP_BINS, SPECTRUM_BINS};
use crate::emd::{emd, GroundDistanceMatrix};
use crate::error::{Error, Result};
use crate::evaluation::bulls_eye;
use crate::raster::BinaryShape;

pub const KB_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinConfig {
    pub sps_bins: usize,
    pub cps_bins: usize,
    pub lbp_bins: usize,
}

impl Default for BinConfig {
    fn default() -> Self {
        Self {
            sps_bins: SPECTRUM_BINS,
            cps_bins: SPECTRUM_BINS,
            lbp_bins: LBP_BINS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildMetadata {
    pub tool_version: String,
    pub timestamp_unix: u64,
}

impl BuildMetadata {
    /// Current tool version; the timestamp honours `SOURCE_DATE_EPOCH`.
    pub fn now() -> Self {
        let timestamp_unix = std::env::var("SOURCE_DATE_EPOCH")
            .ok()
            .and_then(|s| s.trim().parse().ok())
            .unwrap_or_else(|| {
                SystemTime::now()
                    .duration_since(UNIX_EPOCH)
                    .map(|d| d.as_secs())
                    .unwrap_or(0)
            });
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp_unix,
        }
    }

    /// Metadata with the timestamp zeroed, for byte-level comparisons.
    pub fn canonical() -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp_unix: 0,
        }
    }
}

/// Descriptor sets of a whole dataset. Immutable once built or loaded.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeBase {
    pub dataset_name: String,
    pub build_metadata: BuildMetadata,
    entries: Vec<DescriptorSet>,
}

impl KnowledgeBase {
    pub fn from_entries(dataset_name: impl Into<String>, entries: Vec<DescriptorSet>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidArgument("knowledge base needs at least one entry".into()));
        }
        let mut seen = HashSet::new();
        for e in &entries {
            if e.shape_id.is_empty() {
                return Err(Error::InvalidArgument("empty shape_id".into()));
            }
            if !seen.insert(e.shape_id.as_str()) {
                return Err(Error::DuplicateShapeId(e.shape_id.clone()));
            }
            for (h, kind) in [(&e.sps, HistogramKind::Sps), (&e.cps, HistogramKind::Cps), (&e.lbp, HistogramKind::Lbp)] {
                if h.kind() != kind || h.len() != kind.bin_count() {
                    return Err(Error::BinConfig(format!(
                        "{}: {kind:?} slot holds a {:?} histogram with {} bins",
                        e.shape_id,
                        h.kind(),
                        h.len()
                    )));
                }
            }
        }
        Ok(Self {
            dataset_name: dataset_name.into(),
            build_metadata: BuildMetadata::now(),
            entries,
        })
    }

    pub fn bin_config(&self) -> BinConfig {
        BinConfig::default()
    }

    pub fn entries(&self) -> &[DescriptorSet] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn index_of(&self, shape_id: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.shape_id == shape_id)
    }

    /// Class label → number of entries.
    pub fn class_sizes(&self) -> BTreeMap<String, usize> {
        crate::raster::class_sizes(self.entries.iter().map(|e| e.class_label.as_str()))
    }

    pub fn histogram(&self, index: usize, kind: HistogramKind) -> &Histogram {
        let e = &self.entries[index];
        match kind {
            HistogramKind::Sps => &e.sps,
            HistogramKind::Cps => &e.cps,
            HistogramKind::Lbp => &e.lbp,
        }
    }
}

/// Extracts one descriptor set per shape, keeping the input order.
pub fn build_knowledge_base(shapes: &[BinaryShape], dataset_name: &str) -> Result<KnowledgeBase> {
    if shapes.is_empty() {
        return Err(Error::InvalidArgument("no shapes to index".into()));
    }
    let mut seen = HashSet::new();
    for s in shapes {
        if !seen.insert(s.shape_id()) {
            return Err(Error::DuplicateShapeId(s.shape_id().to_string()));
        }
    }
    let entries = shapes.par_iter().map(describe).collect::<Result<Vec<_>>>()?;
    KnowledgeBase::from_entries(dataset_name, entries)
}

#[derive(Serialize, Deserialize)]
struct KbEntryFile {
    shape_id: String,
    class_label: String,
    sps: Vec<f64>,
    cps: Vec<f64>,
    lbp: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct KbFile {
    format_version: u32,
    dataset_name: String,
    bin_config: BinConfig,
    build_metadata: BuildMetadata,
    entries: Vec<KbEntryFile>,
}

/// Serializes the knowledge base as a JSON document. Floats are written in
/// shortest round-trip form, so loading restores every weight bit for bit.
pub fn kb_to_json(kb: &KnowledgeBase) -> Result<String> {
    let file = KbFile {
        format_version: KB_FORMAT_VERSION,
        dataset_name: kb.dataset_name.clone(),
        bin_config: kb.bin_config(),
        build_metadata: kb.build_metadata.clone(),
        entries: kb
            .entries
            .iter()
            .map(|e| KbEntryFile {
                shape_id: e.shape_id.clone(),
                class_label: e.class_label.clone(),
                sps: e.sps.bins().to_vec(),
                cps: e.cps.bins().to_vec(),
                lbp: e.lbp.bins().to_vec(),
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&file)?;
    s.push('\n');
    Ok(s)
}

pub fn kb_from_json(text: &str) -> Result<KnowledgeBase> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::KbFormat(e.to_string()))?;
    match value.get("format_version") {
        None => return Err(Error::KbFormat("missing format_version".into())),
        Some(v) if v.as_u64() != Some(KB_FORMAT_VERSION as u64) => {
            return Err(Error::KbVersion {
                expected: KB_FORMAT_VERSION,
                found: v.to_string(),
            })
        }
        Some(_) => {}
    }
    let file: KbFile = serde_json::from_value(value).map_err(|e| Error::KbFormat(e.to_string()))?;
    if file.bin_config != BinConfig::default() {
        return Err(Error::BinConfig(format!(
            "file declares {:?}, expected {:?}",
            file.bin_config,
            BinConfig::default()
        )));
    }
    let entries = file
        .entries
        .into_iter()
        .map(|e| {
            let hist = |kind: HistogramKind, bins: Vec<f64>| {
                if bins.len() != kind.bin_count() {
                    return Err(Error::BinConfig(format!(
                        "{}: {kind:?} has {} bins, expected {}",
                        e.shape_id,
                        bins.len(),
                        kind.bin_count()
                    )));
                }
                Histogram::new(kind, bins)
                    .map_err(|err| Error::KbFormat(format!("{}: {err}", e.shape_id)))
            };
            Ok(DescriptorSet {
                sps: hist(HistogramKind::Sps, e.sps.clone())?,
                cps: hist(HistogramKind::Cps, e.cps.clone())?,
                lbp: hist(HistogramKind::Lbp, e.lbp.clone())?,
                shape_id: e.shape_id,
                class_label: e.class_label,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut kb = KnowledgeBase::from_entries(file.dataset_name, entries)?;
    kb.build_metadata = file.build_metadata;
    Ok(kb)
}

pub fn save_kb(kb: &KnowledgeBase, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, kb_to_json(kb)?).map_err(|e| Error::io(path, e))
}

pub fn load_kb(path: impl AsRef<Path>) -> Result<KnowledgeBase> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    kb_from_json(&text)
}

/// Non-negative channel weights normalized to sum to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for FusionWeights {
    fn default() -> Self {
        Self {
            alpha: 1.0 / 3.0,
            beta: 1.0 / 3.0,
            gamma: 1.0 / 3.0,
        }
    }
}

impl FusionWeights {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        let w = [alpha, beta, gamma];
        if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidWeights(format!(
                "({alpha}, {beta}, {gamma}): weights must be finite and non-negative"
            )));
        }
        let sum = alpha + beta + gamma;
        if sum <= 0.0 {
            return Err(Error::InvalidWeights("weights sum to zero".into()));
        }
        Ok(Self {
            alpha: alpha / sum,
            beta: beta / sum,
            gamma: gamma / sum,
        })
    }

    /// Parses `a,b,c`.
    pub fn parse(text: &str) -> Result<Self> {
        let parts: Vec<f64> = text
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidWeights(format!("{text:?}: {e}")))?;
        match parts.as_slice() {
            [a, b, c] => Self::new(*a, *b, *c),
            _ => Err(Error::InvalidWeights(format!("{text:?}: expected three comma-separated numbers"))),
        }
    }

    /// Reads a `{alpha, beta, gamma}` JSON document (extra fields ignored).
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let w: FusionWeights = serde_json::from_str(&text)?;
        Self::new(w.alpha, w.beta, w.gamma)
    }

    fn as_array(&self) -> [f64; 3] {
        [self.alpha, self.beta, self.gamma]
    }
}

/// Which descriptor a distance matrix was computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Channel {
    #[serde(rename = "S")]
    Skeleton,
    #[serde(rename = "C")]
    Contour,
    #[serde(rename = "L")]
    Lbp,
    #[serde(rename = "fused")]
    Fused,
}

impl Channel {
    /// Histogram kind behind a single-descriptor channel.
    pub fn kind(self) -> Option<HistogramKind> {
        match self {
            Channel::Skeleton => Some(HistogramKind::Sps),
            Channel::Contour => Some(HistogramKind::Cps),
            Channel::Lbp => Some(HistogramKind::Lbp),
            Channel::Fused => None,
        }
    }
}

/// Square matrix of pairwise distances over knowledge-base entries.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    pub n: usize,
    pub values: Vec<f64>,
    pub channel: Channel,
}

impl DistanceMatrix {
    pub fn new(n: usize, values: Vec<f64>, channel: Channel) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {n}×{n} matrix",
                values.len()
            )));
        }
        Ok(Self { n, values, channel })
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    /// Multiplies every entry by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            n: self.n,
            values: self.values.iter().map(|v| v * factor).collect(),
            channel: self.channel,
        }
    }
}

/// All-pairs EMD (L1 ground distance) on one channel. Only the upper
/// triangle is solved; the lower triangle mirrors it.
pub fn channel_distance_matrix(kb: &KnowledgeBase, channel: Channel) -> Result<DistanceMatrix> {
    let kind = channel
        .kind()
        .ok_or_else(|| Error::InvalidArgument("fused matrices come from fuse()".into()))?;
    let n = kb.len();
    let bins = kind.bin_count();
    let ground = GroundDistanceMatrix::l1(bins, bins);
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let hi = kb.histogram(i, kind);
            (i + 1..n)
                .map(|j| emd(hi, kb.histogram(j, kind), &ground))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let mut values = vec![0.0; n * n];
    for (i, row) in rows.into_iter().enumerate() {
        for (off, v) in row.into_iter().enumerate() {
            let j = i + 1 + off;
            values[i * n + j] = v;
            values[j * n + i] = v;
        }
    }
    DistanceMatrix::new(n, values, channel)
}

/// The three channel matrices, in S, C, L order.
pub fn all_channel_matrices(kb: &KnowledgeBase) -> Result<[DistanceMatrix; 3]> {
    Ok([
        channel_distance_matrix(kb, Channel::Skeleton)?,
        channel_distance_matrix(kb, Channel::Contour)?,
        channel_distance_matrix(kb, Channel::Lbp)?,
    ])
}

/// `alpha·S + beta·C + gamma·L`, elementwise.
pub fn fuse(
    ds: &DistanceMatrix,
    dc: &DistanceMatrix,
    dl: &DistanceMatrix,
    w: &FusionWeights,
) -> Result<DistanceMatrix> {
    if ds.n != dc.n || ds.n != dl.n {
        return Err(Error::DimensionMismatch(format!(
            "cannot fuse {}, {} and {} entry matrices",
            ds.n, dc.n, dl.n
        )));
    }
    let expected = [(ds, Channel::Skeleton), (dc, Channel::Contour), (dl, Channel::Lbp)];
    if let Some((m, c)) = expected.iter().find(|(m, c)| m.channel != *c) {
        return Err(Error::InvalidArgument(format!(
            "expected a {c:?} matrix, got {:?}",
            m.channel
        )));
    }
    let values = ds
        .values
        .iter()
        .zip(&dc.values)
        .zip(&dl.values)
        .map(|((s, c), l)| w.alpha * s + w.beta * c + w.gamma * l)
        .collect();
    DistanceMatrix::new(ds.n, values, Channel::Fused)
}

/// Whether a query may retrieve itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelfMatch {
    #[default]
    Include,
    Exclude,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub shape_id: String,
    pub class_label: String,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedResult {
    pub query_id: String,
    pub hits: Vec<Hit>,
}

/// Ranking order: ascending distance, the query itself first among equal
/// distances, then ascending shape_id.
fn rank_order(kb: &KnowledgeBase, dist: &[f64], query_id: &str, a: usize, b: usize) -> Ordering {
    let (ea, eb) = (&kb.entries[a], &kb.entries[b]);
    dist[a]
        .total_cmp(&dist[b])
        .then_with(|| (ea.shape_id != query_id).cmp(&(eb.shape_id != query_id)))
        .then_with(|| ea.shape_id.cmp(&eb.shape_id))
}

/// The first `limit` entries in ranking order for a distance vector.
pub fn rank_entries(
    kb: &KnowledgeBase,
    dist: &[f64],
    query_id: &str,
    self_match: SelfMatch,
    limit: usize,
) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..kb.len())
        .filter(|&i| self_match == SelfMatch::Include || kb.entries[i].shape_id != query_id)
        .collect();
    let limit = limit.min(idx.len());
    if limit == 0 {
        return Vec::new();
    }
    let cmp = |a: &usize, b: &usize| rank_order(kb, dist, query_id, *a, *b);
    if limit < idx.len() {
        idx.select_nth_unstable_by(limit - 1, cmp);
        idx.truncate(limit);
    }
    idx.sort_unstable_by(cmp);
    idx
}

/// Ranks the knowledge base against one query shape.
pub fn query(
    kb: &KnowledgeBase,
    query_shape: &BinaryShape,
    w: &FusionWeights,
    top_n: usize,
    self_match: SelfMatch,
) -> Result<RankedResult> {
    if top_n == 0 {
        return Err(Error::InvalidArgument("top_n must be at least 1".into()));
    }
    let q = describe(query_shape)?;
    query_descriptors(kb, &q, w, top_n, self_match)
}

/// [`query`] for an already-extracted descriptor set.
pub fn query_descriptors(
    kb: &KnowledgeBase,
    q: &DescriptorSet,
    w: &FusionWeights,
    top_n: usize,
    self_match: SelfMatch,
) -> Result<RankedResult> {
    let g10 = GroundDistanceMatrix::l1(SPECTRUM_BINS, SPECTRUM_BINS);
    let g36 = GroundDistanceMatrix::l1(LBP_BINS, LBP_BINS);
    let dist = kb
        .entries
        .par_iter()
        .map(|e| {
            let s = emd(&q.sps, &e.sps, &g10)?;
            let c = emd(&q.cps, &e.cps, &g10)?;
            let l = emd(&q.lbp, &e.lbp, &g36)?;
            Ok(w.alpha * s + w.beta * c + w.gamma * l)
        })
        .collect::<Result<Vec<f64>>>()?;
    let available = match self_match {
        SelfMatch::Include => kb.len(),
        SelfMatch::Exclude => kb.entries.iter().filter(|e| e.shape_id != q.shape_id).count(),
    };
    if top_n > available {
        log::warn!("top_n {top_n} exceeds the {available} available entries; clamping");
    }
    let hits = rank_entries(kb, &dist, &q.shape_id, self_match, top_n)
        .into_iter()
        .map(|i| Hit {
            shape_id: kb.entries[i].shape_id.clone(),
            class_label: kb.entries[i].class_label.clone(),
            distance: dist[i],
        })
        .collect();
    Ok(RankedResult {
        query_id: q.shape_id.clone(),
        hits,
    })
}

/// Result of a weight search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneOutcome {
    pub weights: FusionWeights,
    /// Bull's-eye score reached with `weights`.
    pub score: f64,
    /// Number of simplex grid points scored.
    pub candidates_evaluated: usize,
}

/// Grid points `(i, j, k) / steps` with `i + j + k = steps`, lexicographic.
pub fn simplex_grid(grid_step: f64) -> Result<Vec<[f64; 3]>> {
    if !(grid_step > 0.0 && grid_step <= 0.5) {
        return Err(Error::InvalidArgument(format!(
            "grid step {grid_step} outside (0, 0.5]"
        )));
    }
    let steps = (1.0 / grid_step).round();
    if (steps * grid_step - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "grid step {grid_step} does not divide 1"
        )));
    }
    let steps = steps as usize;
    let mut out = Vec::new();
    for i in 0..=steps {
        for j in 0..=steps - i {
            let k = steps - i - j;
            out.push([i as f64 / steps as f64, j as f64 / steps as f64, k as f64 / steps as f64]);
        }
    }
    Ok(out)
}

/// Exhaustive weight search maximizing the self-retrieval Bull's-eye score.
/// The neutral weights (1/3, 1/3, 1/3) are kept unless a grid point scores
/// strictly higher; among equally scoring grid points the one closest to
/// neutral wins, then the lexicographically smallest.
pub fn tune_weights(kb: &KnowledgeBase, grid_step: f64) -> Result<TuneOutcome> {
    let [ds, dc, dl] = all_channel_matrices(kb)?;
    tune_weights_with(kb, &ds, &dc, &dl, grid_step)
}

/// [`tune_weights`] with precomputed channel matrices.
pub fn tune_weights_with(
    kb: &KnowledgeBase,
    ds: &DistanceMatrix,
    dc: &DistanceMatrix,
    dl: &DistanceMatrix,
    grid_step: f64,
) -> Result<TuneOutcome> {
    const SCORE_TIE: f64 = 1e-9;
    let grid = simplex_grid(grid_step)?;
    let neutral = FusionWeights::default();
    let score_of = |w: &FusionWeights| -> Result<f64> { Ok(bulls_eye(kb, &fuse(ds, dc, dl, w)?)?.score) };

    let mut best_w = neutral;
    let mut best_score = score_of(&neutral)?;
    let mut best_is_grid = false;
    let center_dist = |w: &FusionWeights| -> f64 {
        w.as_array().iter().map(|x| (x - 1.0 / 3.0).powi(2)).sum()
    };
    for p in &grid {
        let w = FusionWeights::new(p[0], p[1], p[2])?;
        let score = score_of(&w)?;
        let better = if score > best_score + SCORE_TIE {
            true
        } else if (score - best_score).abs() <= SCORE_TIE && best_is_grid {
            center_dist(&w) < center_dist(&best_w) - 1e-15
        } else {
            false
        };
        if better {
            best_w = w;
            best_score = score;
            best_is_grid = true;
        }
    }
    Ok(TuneOutcome {
        weights: best_w,
        score: best_score,
        candidates_evaluated: grid.len(),
    })
}
