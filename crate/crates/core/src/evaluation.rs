//! Retrieval benchmarks over a fused distance matrix: Bull's-eye score,
//! top-k rank tables and per-class hit counts, plus report serialization.
//!
//! All rankings use the order of [`rank_entries`]: ascending distance, the
//! query itself first among ties, then ascending shape_id.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::retrieval::{rank_entries, DistanceMatrix, FusionWeights, KnowledgeBase, SelfMatch};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryHits {
    pub query_id: String,
    pub hits_in_window: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BullsEyeReport {
    pub dataset_name: String,
    pub class_size: usize,
    pub window: usize,
    pub per_query_hits: Vec<QueryHits>,
    /// Percentage in `[0, 100]`.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopKTable {
    pub k: usize,
    pub self_match: SelfMatch,
    /// `correct_at_rank[r]` = queries whose rank `r + 1` neighbor shares their class.
    pub correct_at_rank: Vec<usize>,
    pub total: usize,
    pub queries: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassCount {
    pub class_label: String,
    /// Mean same-class hits per query of this class.
    pub hits: f64,
}

fn check_dims(kb: &KnowledgeBase, fused: &DistanceMatrix) -> Result<()> {
    if fused.n != kb.len() {
        return Err(Error::DimensionMismatch(format!(
            "distance matrix has {} entries, knowledge base {}",
            fused.n,
            kb.len()
        )));
    }
    Ok(())
}

/// The common class size, or an error naming the classes that deviate from
/// the most frequent size.
pub fn uniform_class_size(kb: &KnowledgeBase) -> Result<usize> {
    let sizes = kb.class_sizes();
    let mut freq = std::collections::BTreeMap::new();
    for &s in sizes.values() {
        *freq.entry(s).or_insert(0usize) += 1;
    }
    // most frequent size, larger size on ties
    let (&mode, _) = freq
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then(a.0.cmp(b.0)))
        .expect("knowledge base is non-empty");
    let offending: Vec<String> = sizes
        .iter()
        .filter(|(_, &s)| s != mode)
        .map(|(l, s)| format!("{l} ({s})"))
        .collect();
    if offending.is_empty() {
        Ok(mode)
    } else {
        Err(Error::NonUniformClasses(format!(
            "expected {mode} shapes per class; offending: {}",
            offending.join(", ")
        )))
    }
}

fn same_class_hits(kb: &KnowledgeBase, fused: &DistanceMatrix, q: usize, window: usize) -> usize {
    let entries = kb.entries();
    let label = &entries[q].class_label;
    rank_entries(kb, fused.row(q), &entries[q].shape_id, SelfMatch::Include, window)
        .into_iter()
        .filter(|&i| &entries[i].class_label == label)
        .count()
}

/// For every query, same-class shapes (itself included) among its top `2·C`
/// retrievals; score = 100 · hits / (N · C).
pub fn bulls_eye(kb: &KnowledgeBase, fused: &DistanceMatrix) -> Result<BullsEyeReport> {
    check_dims(kb, fused)?;
    let class_size = uniform_class_size(kb)?;
    let n = kb.len();
    let window = (2 * class_size).min(n);
    let per_query_hits: Vec<QueryHits> = (0..n)
        .into_par_iter()
        .map(|q| QueryHits {
            query_id: kb.entries()[q].shape_id.clone(),
            hits_in_window: same_class_hits(kb, fused, q, window),
        })
        .collect();
    let total: usize = per_query_hits.iter().map(|h| h.hits_in_window).sum();
    Ok(BullsEyeReport {
        dataset_name: kb.dataset_name.clone(),
        class_size,
        window,
        per_query_hits,
        score: 100.0 * total as f64 / (n * class_size) as f64,
    })
}

/// Counts, for each rank `1..=k`, the queries whose neighbor at that rank is
/// of the query's class. With [`SelfMatch::Exclude`] rank 1 is the first
/// neighbor other than the query; with `Include` rank 1 is the query itself.
pub fn top_k_table(kb: &KnowledgeBase, fused: &DistanceMatrix, k: usize, self_match: SelfMatch) -> Result<TopKTable> {
    check_dims(kb, fused)?;
    let n = kb.len();
    let available = match self_match {
        SelfMatch::Include => n,
        SelfMatch::Exclude => n - 1,
    };
    if k == 0 || k > available {
        return Err(Error::InvalidArgument(format!(
            "k = {k} needs 1 ≤ k ≤ {available} for {n} entries"
        )));
    }
    let entries = kb.entries();
    let per_query: Vec<Vec<bool>> = (0..n)
        .into_par_iter()
        .map(|q| {
            rank_entries(kb, fused.row(q), &entries[q].shape_id, self_match, k)
                .into_iter()
                .map(|i| entries[i].class_label == entries[q].class_label)
                .collect()
        })
        .collect();
    let mut correct_at_rank = vec![0usize; k];
    for row in &per_query {
        for (r, &ok) in row.iter().enumerate() {
            correct_at_rank[r] += ok as usize;
        }
    }
    Ok(TopKTable {
        k,
        self_match,
        total: correct_at_rank.iter().sum(),
        correct_at_rank,
        queries: n,
    })
}

/// Per class, the mean number of same-class shapes in each member's top
/// `window` retrievals (itself included).
pub fn per_class_counts(kb: &KnowledgeBase, fused: &DistanceMatrix, window: usize) -> Result<Vec<ClassCount>> {
    check_dims(kb, fused)?;
    if window == 0 || window > kb.len() {
        return Err(Error::InvalidArgument(format!(
            "window {window} outside 1..={}",
            kb.len()
        )));
    }
    let hits: Vec<usize> = (0..kb.len())
        .into_par_iter()
        .map(|q| same_class_hits(kb, fused, q, window))
        .collect();
    let mut sums: std::collections::BTreeMap<&str, (usize, usize)> = Default::default();
    for (e, h) in kb.entries().iter().zip(hits) {
        let slot = sums.entry(e.class_label.as_str()).or_default();
        slot.0 += h;
        slot.1 += 1;
    }
    Ok(sums
        .into_iter()
        .map(|(label, (h, count))| ClassCount {
            class_label: label.to_string(),
            hits: h as f64 / count as f64,
        })
        .collect())
}

/// Default number of rank columns: one less than the class size, capped at 12.
pub fn default_k(class_size: usize, entries: usize) -> usize {
    class_size
        .saturating_sub(1)
        .clamp(1, 12)
        .min(entries.saturating_sub(1).max(1))
}

/// Published figures for the standard benchmarks, recognised by their
/// (entries, classes) layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceFigures {
    pub benchmark: String,
    pub bulls_eye: f64,
    pub top_k: Vec<usize>,
}

pub fn reference_figures(entries: usize, classes: usize) -> Option<ReferenceFigures> {
    let (benchmark, bulls_eye, top_k): (&str, f64, &[usize]) = match (entries, classes) {
        (99, 9) => ("Kimia-99", 99.08, &[99, 97, 97, 88, 88, 86, 86, 90, 80, 77]),
        (216, 18) => (
            "Kimia-216",
            95.25,
            &[216, 209, 205, 195, 195, 197, 188, 180, 179, 163, 152],
        ),
        (1400, 70) => (
            "MPEG-7",
            79.38,
            &[1400, 1345, 1276, 1221, 1157, 1113, 1070, 1023, 995, 961, 933, 898],
        ),
        _ => return None,
    };
    Some(ReferenceFigures {
        benchmark: benchmark.into(),
        bulls_eye,
        top_k: top_k.to_vec(),
    })
}

/// Everything `evaluate` reports for one knowledge base and weight choice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub dataset_name: String,
    pub weights: FusionWeights,
    pub bulls_eye: BullsEyeReport,
    pub top_k: TopKTable,
    pub per_class: Vec<ClassCount>,
    pub reference: Option<ReferenceFigures>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Text,
    Csv,
    Json,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Text => "txt",
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
        }
    }
}

/// Deterministic text, CSV and JSON renderings.
pub trait Report: Serialize {
    fn to_text(&self) -> String;
    fn to_csv(&self) -> String;

    fn render(&self, format: ReportFormat) -> Result<String> {
        Ok(match format {
            ReportFormat::Text => self.to_text(),
            ReportFormat::Csv => self.to_csv(),
            ReportFormat::Json => {
                let mut s = serde_json::to_string_pretty(self)?;
                s.push('\n');
                s
            }
        })
    }
}

impl Report for BullsEyeReport {
    fn to_text(&self) -> String {
        format!(
            "bulls-eye {}: {:.2}% (class size {}, window {}, {} queries)\n",
            self.dataset_name,
            self.score,
            self.class_size,
            self.window,
            self.per_query_hits.len()
        )
    }

    /// `dataset,class_size,window,queries,score`
    fn to_csv(&self) -> String {
        format!(
            "dataset,class_size,window,queries,score\n{},{},{},{},{:.2}\n",
            csv_field(&self.dataset_name),
            self.class_size,
            self.window,
            self.per_query_hits.len(),
            self.score
        )
    }
}

impl Report for TopKTable {
    fn to_text(&self) -> String {
        let mut s = String::new();
        let header: Vec<String> = (1..=self.k).map(|r| format!("{r:>6}")).collect();
        let row: Vec<String> = self.correct_at_rank.iter().map(|c| format!("{c:>6}")).collect();
        let _ = writeln!(s, "rank  {} | total", header.join(""));
        let _ = writeln!(s, "hits  {} | {}", row.join(""), self.total);
        s
    }

    /// `rank_1,…,rank_k,total`
    fn to_csv(&self) -> String {
        let header: Vec<String> = (1..=self.k).map(|r| format!("rank_{r}")).collect();
        let row: Vec<String> = self.correct_at_rank.iter().map(|c| c.to_string()).collect();
        format!("{},total\n{},{}\n", header.join(","), row.join(","), self.total)
    }
}

impl Report for Vec<ClassCount> {
    fn to_text(&self) -> String {
        let width = self.iter().map(|c| c.class_label.len()).max().unwrap_or(5).max(5);
        let mut s = String::new();
        for c in self {
            let _ = writeln!(s, "{:<width$}  {:.2}", c.class_label, c.hits);
        }
        s
    }

    /// `class_label,hits`
    fn to_csv(&self) -> String {
        let mut s = String::from("class_label,hits\n");
        for c in self {
            let _ = writeln!(s, "{},{:.2}", csv_field(&c.class_label), c.hits);
        }
        s
    }
}

impl Report for EvaluationReport {
    fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "dataset {} with weights alpha={:.4} beta={:.4} gamma={:.4}",
            self.dataset_name, self.weights.alpha, self.weights.beta, self.weights.gamma
        );
        s.push_str(&self.bulls_eye.to_text());
        let self_match = match self.top_k.self_match {
            SelfMatch::Include => "query counted",
            SelfMatch::Exclude => "query excluded",
        };
        let _ = writeln!(s, "top-{} closest matches ({self_match}):", self.top_k.k);
        s.push_str(&self.top_k.to_text());
        if let Some(r) = &self.reference {
            let _ = writeln!(s, "published {} reference: bulls-eye {:.2}%", r.benchmark, r.bulls_eye);
            let row: Vec<String> = r.top_k.iter().map(|c| format!("{c:>6}")).collect();
            let _ = writeln!(s, "ref   {} | {}", row.join(""), r.top_k.iter().sum::<usize>());
        }
        let _ = writeln!(s, "per-class hits in top {}:", self.bulls_eye.window);
        s.push_str(&self.per_class.to_text());
        s
    }

    /// The bulls-eye, top-k and per-class tables, separated by blank lines.
    fn to_csv(&self) -> String {
        [self.bulls_eye.to_csv(), self.top_k.to_csv(), self.per_class.to_csv()].join("\n")
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Writes `report` to `path` in the requested format.
pub fn emit_report<R: Report>(report: &R, format: ReportFormat, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, report.render(format)?).map_err(|e| Error::io(path, e))
}
