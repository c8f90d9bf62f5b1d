//! Command-line front end: `index`, `query`, `evaluate` and `tune`.
//!
//! Exit codes: 0 on success, 1 for usage errors, 2 for data errors.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::evaluation::{
    bulls_eye, default_k, per_class_counts, reference_figures, top_k_table, EvaluationReport, Report,
    ReportFormat,
};
use crate::raster::{detect_layout, ingest_dataset, load_shape_with, DatasetLayout, LoadOptions};
use crate::retrieval::{
    all_channel_matrices, build_knowledge_base, fuse, load_kb, query, save_kb, tune_weights_with, BuildMetadata,
    DistanceMatrix, FusionWeights, KnowledgeBase, SelfMatch,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

/// Environment variable overriding the worker thread count.
pub const THREADS_ENV: &str = "SPECTRUMSHAPE_THREADS";

const DEFAULT_GRID_STEP: f64 = 0.1;

#[derive(Debug, Parser)]
#[command(name = "spectrumshape", version, about = "Binary shape retrieval with pattern spectra, LBP and EMD")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract descriptors for every shape in a dataset and write a knowledge base.
    Index {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        kb: PathBuf,
        #[arg(long, value_enum, default_value_t = LayoutArg::Auto)]
        layout: LayoutArg,
        /// Treat dark pixels as the object.
        #[arg(long)]
        invert: bool,
        /// Zero the build timestamp so repeated builds are byte-identical.
        #[arg(long)]
        canonical: bool,
        /// Name stored in the knowledge base; defaults to the dataset directory name.
        #[arg(long)]
        name: Option<String>,
    },
    /// Rank the knowledge base against one query image.
    Query {
        #[arg(long)]
        kb: PathBuf,
        #[arg(long)]
        query: PathBuf,
        /// `a,b,c`, `auto`, or a JSON file with alpha/beta/gamma.
        #[arg(long, default_value = "1,1,1")]
        weights: String,
        #[arg(long, default_value_t = 10)]
        top_n: usize,
        #[arg(long, value_enum, default_value_t = SelfMatchArg::Include)]
        self_match: SelfMatchArg,
        #[arg(long, value_enum, default_value_t = FormatArg::Text)]
        format: FormatArg,
        #[arg(long)]
        invert: bool,
        #[arg(long, default_value_t = DEFAULT_GRID_STEP)]
        grid_step: f64,
    },
    /// Bull's-eye score, top-k table and per-class counts over the whole knowledge base.
    Evaluate {
        #[arg(long)]
        kb: PathBuf,
        #[arg(long, default_value = "1,1,1")]
        weights: String,
        /// Whether rank 1 of the top-k table may be the query itself.
        #[arg(long, value_enum, default_value_t = SelfMatchArg::Exclude)]
        self_match: SelfMatchArg,
        /// Rank columns; defaults to min(class size - 1, 12).
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, value_enum, default_value_t = FormatArg::Text)]
        format: FormatArg,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_GRID_STEP)]
        grid_step: f64,
    },
    /// Grid-search fusion weights for the highest Bull's-eye score.
    Tune {
        #[arg(long)]
        kb: PathBuf,
        #[arg(long, default_value_t = DEFAULT_GRID_STEP)]
        grid_step: f64,
        /// Write the chosen weights as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LayoutArg {
    Auto,
    NameIndex,
    ClassDirs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SelfMatchArg {
    Include,
    Exclude,
}

impl From<SelfMatchArg> for SelfMatch {
    fn from(a: SelfMatchArg) -> Self {
        match a {
            SelfMatchArg::Include => SelfMatch::Include,
            SelfMatchArg::Exclude => SelfMatch::Exclude,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Text,
    Csv,
    Json,
}

impl From<FormatArg> for ReportFormat {
    fn from(a: FormatArg) -> Self {
        match a {
            FormatArg::Text => ReportFormat::Text,
            FormatArg::Csv => ReportFormat::Csv,
            FormatArg::Json => ReportFormat::Json,
        }
    }
}

/// Process-wide settings taken from the environment.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunConfig {
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn from_env() -> Result<Self> {
        let threads = match std::env::var(THREADS_ENV) {
            Ok(v) => Some(
                v.trim()
                    .parse::<usize>()
                    .ok()
                    .filter(|&n| n > 0)
                    .ok_or_else(|| Error::InvalidArgument(format!("{THREADS_ENV}={v:?} is not a positive integer")))?,
            ),
            Err(_) => None,
        };
        Ok(Self { threads })
    }

    /// Sizes the global rayon pool; a pool that already exists is left alone.
    pub fn apply(&self) {
        if let Some(n) = self.threads {
            if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
                log::debug!("global thread pool already initialized");
            }
        }
    }
}

enum WeightsSpec {
    Fixed(FusionWeights),
    Auto,
}

fn parse_weights(text: &str) -> Result<WeightsSpec> {
    if text == "auto" {
        Ok(WeightsSpec::Auto)
    } else if text.ends_with(".json") || Path::new(text).is_file() {
        Ok(WeightsSpec::Fixed(FusionWeights::load(text)?))
    } else {
        Ok(WeightsSpec::Fixed(FusionWeights::parse(text)?))
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidArgument(_) | Error::InvalidWeights(_) => EXIT_USAGE,
        _ => EXIT_DATA,
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = RunConfig::from_env().and_then(|cfg| {
        cfg.apply();
        let stdout = std::io::stdout();
        execute(cli.command, &mut stdout.lock())
    });
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let mut msg = format!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                msg.push_str(&format!("\n  caused by: {s}"));
                src = s.source();
            }
            eprintln!("{msg}");
            exit_code(&e)
        }
    }
}

fn write_out(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes())
        .map_err(|e| Error::io("<stdout>", e))
}

/// Runs one parsed command, writing its report to `out`.
pub fn execute(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Index {
            dataset,
            kb,
            layout,
            invert,
            canonical,
            name,
        } => cmd_index(&dataset, &kb, layout, invert, canonical, name, out),
        Command::Query {
            kb,
            query,
            weights,
            top_n,
            self_match,
            format,
            invert,
            grid_step,
        } => cmd_query(&kb, &query, &weights, top_n, self_match.into(), format, invert, grid_step, out),
        Command::Evaluate {
            kb,
            weights,
            self_match,
            k,
            format,
            out: out_path,
            grid_step,
        } => cmd_evaluate(&kb, &weights, self_match.into(), k, format.into(), out_path.as_deref(), grid_step, out),
        Command::Tune { kb, grid_step, out: out_path } => cmd_tune(&kb, grid_step, out_path.as_deref(), out),
    }
}

fn class_summary(kb: &KnowledgeBase) -> String {
    let sizes = kb.class_sizes();
    let min = sizes.values().min().copied().unwrap_or(0);
    let max = sizes.values().max().copied().unwrap_or(0);
    if min == max {
        format!("{} classes × {}", sizes.len(), min)
    } else {
        format!("{} classes, {}..{} shapes per class", sizes.len(), min, max)
    }
}

fn cmd_index(
    dataset: &Path,
    kb_path: &Path,
    layout: LayoutArg,
    invert: bool,
    canonical: bool,
    name: Option<String>,
    out: &mut dyn Write,
) -> Result<()> {
    let layout = match layout {
        LayoutArg::Auto => detect_layout(dataset)?,
        LayoutArg::NameIndex => DatasetLayout::NameIndex,
        LayoutArg::ClassDirs => DatasetLayout::ClassDirectories,
    };
    let ds = ingest_dataset(dataset, layout, LoadOptions { invert })?;
    let name = name.unwrap_or(ds.name);
    let mut kb = build_knowledge_base(&ds.shapes, &name)?;
    if canonical {
        kb.build_metadata = BuildMetadata::canonical();
    }
    save_kb(&kb, kb_path)?;
    write_out(
        out,
        &format!(
            "indexed {} shapes ({}) into {}\n",
            kb.len(),
            class_summary(&kb),
            kb_path.display()
        ),
    )
}

fn channel_matrices(kb: &KnowledgeBase) -> Result<[DistanceMatrix; 3]> {
    log::info!("computing {} pairwise distances per channel", kb.len() * (kb.len() - 1) / 2);
    all_channel_matrices(kb)
}

fn resolve_weights(
    spec: WeightsSpec,
    kb: &KnowledgeBase,
    mats: Option<&[DistanceMatrix; 3]>,
    grid_step: f64,
) -> Result<FusionWeights> {
    match spec {
        WeightsSpec::Fixed(w) => Ok(w),
        WeightsSpec::Auto => {
            let owned;
            let [ds, dc, dl] = match mats {
                Some(m) => m,
                None => {
                    owned = channel_matrices(kb)?;
                    &owned
                }
            };
            Ok(tune_weights_with(kb, ds, dc, dl, grid_step)?.weights)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_query(
    kb_path: &Path,
    query_path: &Path,
    weights: &str,
    top_n: usize,
    self_match: SelfMatch,
    format: FormatArg,
    invert: bool,
    grid_step: f64,
    out: &mut dyn Write,
) -> Result<()> {
    let spec = parse_weights(weights)?;
    let kb = load_kb(kb_path)?;
    let w = resolve_weights(spec, &kb, None, grid_step)?;
    let shape = load_shape_with(query_path, LoadOptions { invert })?;
    let result = query(&kb, &shape, &w, top_n, self_match)?;
    let text = match format {
        FormatArg::Json => {
            let mut s = serde_json::to_string_pretty(&result)?;
            s.push('\n');
            s
        }
        FormatArg::Csv => {
            let mut s = String::from("rank,shape_id,class_label,distance\n");
            for (r, h) in result.hits.iter().enumerate() {
                s.push_str(&format!("{},{},{},{:.6}\n", r + 1, h.shape_id, h.class_label, h.distance));
            }
            s
        }
        FormatArg::Text => {
            let mut s = format!("query {}\n", result.query_id);
            for (r, h) in result.hits.iter().enumerate() {
                s.push_str(&format!("{:>4}  {:<24} {:<16} {:.6}\n", r + 1, h.shape_id, h.class_label, h.distance));
            }
            s
        }
    };
    write_out(out, &text)
}

#[allow(clippy::too_many_arguments)]
fn cmd_evaluate(
    kb_path: &Path,
    weights: &str,
    self_match: SelfMatch,
    k: Option<usize>,
    format: ReportFormat,
    out_path: Option<&Path>,
    grid_step: f64,
    out: &mut dyn Write,
) -> Result<()> {
    let spec = parse_weights(weights)?;
    let kb = load_kb(kb_path)?;
    let mats = channel_matrices(&kb)?;
    let w = resolve_weights(spec, &kb, Some(&mats), grid_step)?;
    let [ds, dc, dl] = &mats;
    let fused = fuse(ds, dc, dl, &w)?;
    let be = bulls_eye(&kb, &fused)?;
    let k = k.unwrap_or_else(|| default_k(be.class_size, kb.len()));
    let top_k = top_k_table(&kb, &fused, k, self_match)?;
    let per_class = per_class_counts(&kb, &fused, be.window)?;
    let classes = kb.class_sizes().len();
    let reference = reference_figures(kb.len(), classes);
    let report = EvaluationReport {
        dataset_name: kb.dataset_name.clone(),
        weights: w,
        bulls_eye: be,
        top_k,
        per_class,
        reference,
    };
    let text = report.render(format)?;
    match out_path {
        Some(p) => {
            std::fs::write(p, &text).map_err(|e| Error::io(p, e))?;
            write_out(
                out,
                &format!("bulls-eye {:.2}%; report written to {}\n", report.bulls_eye.score, p.display()),
            )
        }
        None => write_out(out, &text),
    }
}

fn cmd_tune(kb_path: &Path, grid_step: f64, out_path: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    let kb = load_kb(kb_path)?;
    let [ds, dc, dl] = channel_matrices(&kb)?;
    let outcome = tune_weights_with(&kb, &ds, &dc, &dl, grid_step)?;
    let w = outcome.weights;
    if let Some(p) = out_path {
        let doc = serde_json::json!({
            "alpha": w.alpha,
            "beta": w.beta,
            "gamma": w.gamma,
            "bulls_eye": outcome.score,
            "grid_step": grid_step,
            "candidates_evaluated": outcome.candidates_evaluated,
        });
        let mut s = serde_json::to_string_pretty(&doc)?;
        s.push('\n');
        std::fs::write(p, s).map_err(|e| Error::io(p, e))?;
    }
    write_out(
        out,
        &format!(
            "weights alpha={:.4} beta={:.4} gamma={:.4}; bulls-eye {:.2}% over {} grid points\n",
            w.alpha, w.beta, w.gamma, outcome.score, outcome.candidates_evaluated
        ),
    )
}
