use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use uwqa_core::deteval::{BoxFormat, CandidateFile, Detection, GroundTruth};
use uwqa_core::qindex::{ExtremaOrder, ORIGINAL_MODEL};

use crate::commands::{self, CANDIDATES_FILE};
use crate::config::CliConfig;
use crate::layout::{DatasetLayout, GROUND_TRUTH_FILE};
use crate::service::{self, AppState};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_PARTIAL: i32 = 2;

/// No-reference underwater image quality and detection evaluation.
///
/// Each command writes into `<out>/<command>/`; later stages read earlier
/// outputs from there unless given explicit paths.
#[derive(Debug, Parser)]
#[command(name = "uwqa", version)]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true, env = "UWQA_CONFIG")]
    pub config: Option<PathBuf>,
    /// Seed for sampled outputs; overrides the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output root.
    #[arg(long, global = true, default_value = "uwqa-out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score every image of a dataset layout with the four metrics.
    Metrics {
        /// Dataset root with `original/` and one folder per enhancement model.
        layout: PathBuf,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Fuse metrics into the Q-index, deltas, bins and distributions.
    Qindex {
        /// Metric table (default: <out>/metrics/metrics.csv).
        #[arg(long)]
        metrics: Option<PathBuf>,
        /// Take the global min/max after or before outlier replacement.
        #[arg(long, value_enum, default_value_t = OrderArg::AfterReplacement)]
        extrema_order: OrderArg,
    },
    /// mAP50:95 per class and overall for each detection file.
    Map {
        #[command(flatten)]
        inputs: DetectionInputs,
        /// JSON array of {"id", "name"} classes (default: from ground truth).
        #[arg(long)]
        classes: Option<PathBuf>,
    },
    /// Correlate per-model metric means with overall mAP.
    Correlate {
        /// Model summaries (default: <out>/qindex/summary.csv).
        #[arg(long)]
        summary: Option<PathBuf>,
        /// Evaluation tables (default: <out>/map/map.csv). Repeatable.
        #[arg(long = "map")]
        maps: Vec<PathBuf>,
    },
    /// Find confident detections that no ground-truth box explains.
    Audit {
        #[command(flatten)]
        inputs: DetectionInputs,
        /// Minimum confidence for a candidate (default 0.5).
        #[arg(long)]
        conf_min: Option<f64>,
        /// IoU against ground truth at which a detection counts as matched (default 0.5).
        #[arg(long)]
        iou_max: Option<f64>,
        /// IoU linking detections from different models (default 0.5).
        #[arg(long)]
        cluster_iou: Option<f64>,
    },
    /// Serve the candidate review API.
    Serve {
        /// Dataset root used to resolve image requests.
        #[arg(long)]
        layout: PathBuf,
        /// Ground truth (default: <layout>/ground_truth.json).
        #[arg(long)]
        gt: Option<PathBuf>,
        /// Box convention of the ground truth: xyxy or xywh.
        #[arg(long, default_value_t = BoxFormat::Xyxy)]
        box_format: BoxFormat,
        /// Candidate file (default: <out>/audit/candidates.json).
        #[arg(long)]
        candidates: Option<PathBuf>,
        /// Verdict log (default: <out>/audit/verdicts.jsonl).
        #[arg(long)]
        verdicts: Option<PathBuf>,
        /// Listen address.
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: String,
        /// Built frontend assets to serve at `/`.
        #[arg(long)]
        static_dir: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OrderArg {
    AfterReplacement,
    BeforeReplacement,
}

impl From<OrderArg> for ExtremaOrder {
    fn from(o: OrderArg) -> Self {
        match o {
            OrderArg::AfterReplacement => ExtremaOrder::AfterReplacement,
            OrderArg::BeforeReplacement => ExtremaOrder::BeforeReplacement,
        }
    }
}

/// Ground truth and detections, either explicit or from a layout's
/// `ground_truth.json` and `detections/*.json`.
#[derive(Debug, Args)]
pub struct DetectionInputs {
    /// Dataset root providing `ground_truth.json` and `detections/*.json`.
    #[arg(long)]
    pub layout: Option<PathBuf>,
    /// Ground truth (default: <layout>/ground_truth.json).
    #[arg(long)]
    pub gt: Option<PathBuf>,
    /// MODEL=PATH detection file. Repeatable.
    #[arg(long = "det", value_parser = commands::parse_model_path)]
    pub dets: Vec<(String, PathBuf)>,
    /// Box convention of all input files: xyxy or xywh.
    #[arg(long, default_value_t = BoxFormat::Xyxy)]
    pub box_format: BoxFormat,
}

impl DetectionInputs {
    fn load(&self) -> anyhow::Result<(GroundTruth, Vec<(String, Vec<Detection>)>)> {
        let layout_root = self.layout.as_deref();
        let gt_path = match (&self.gt, layout_root) {
            (Some(p), _) => p.clone(),
            (None, Some(root)) => root.join(GROUND_TRUTH_FILE),
            (None, None) => bail!("give --gt or --layout"),
        };
        let mut specs = self.dets.clone();
        if specs.is_empty() {
            if let Some(root) = layout_root {
                specs = DatasetLayout::open(root)?.detection_files();
                // `original` leads, as in every other model listing.
                specs.sort_by_key(|(m, _)| m != ORIGINAL_MODEL);
            }
        }
        if specs.is_empty() {
            bail!("no detection files: give --det MODEL=PATH or a layout with detections/");
        }
        let gt = commands::load_ground_truth(&gt_path, self.box_format)?;
        let dets = commands::load_detections(&specs, self.box_format, &gt)?;
        Ok((gt, dets))
    }
}

fn or_default(given: Option<PathBuf>, out: &Path, stage: &str, file: &str) -> PathBuf {
    given.unwrap_or_else(|| out.join(stage).join(file))
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_ERROR
        }
    }
}

fn execute(cli: Cli) -> anyhow::Result<i32> {
    let cfg = CliConfig::resolve(cli.config.as_deref())?;
    let seed = cli.seed.or(cfg.seed).unwrap_or(0);
    let out = cli.out;
    match cli.command {
        Command::Metrics { layout, jobs } => {
            let layout = DatasetLayout::open(&layout)?;
            let dest = out.join("metrics");
            let s = commands::run_metrics(&layout, &cfg.metrics, jobs.or(cfg.jobs), &dest)?;
            eprintln!(
                "metrics: {} scored, {} reused, {} failed, {} rows in {}",
                s.scored,
                s.reused,
                s.failures.len(),
                s.rows,
                dest.join("metrics.csv").display()
            );
            if s.failures.is_empty() {
                Ok(EXIT_OK)
            } else {
                for f in &s.failures {
                    eprintln!("  failed {}/{}: {}", f.model, f.image_id, f.error);
                }
                Ok(EXIT_PARTIAL)
            }
        }
        Command::Qindex { metrics, extrema_order } => {
            let input = or_default(metrics, &out, "metrics", "metrics.csv");
            let dest = out.join("qindex");
            let m = commands::run_qindex(&input, extrema_order.into(), seed, &dest)?;
            eprintln!("qindex: wrote {} files to {}", m.entries.len(), dest.display());
            Ok(EXIT_OK)
        }
        Command::Map { inputs, classes } => {
            let (gt, dets) = inputs.load()?;
            let explicit = classes.as_deref().map(commands::load_classes).transpose()?;
            let classes = commands::resolve_classes(&gt, explicit);
            let dest = out.join("map");
            let table = commands::run_map(&gt, &dets, &classes, &dest)?;
            for row in &table.rows {
                eprintln!("map: {} overall {:.4}", row.model, row.overall);
            }
            Ok(EXIT_OK)
        }
        Command::Correlate { summary, maps } => {
            let summary = or_default(summary, &out, "qindex", "summary.csv");
            let maps = if maps.is_empty() {
                vec![out.join("map").join("map.csv")]
            } else {
                maps
            };
            let dest = out.join("correlate");
            commands::run_correlate(&summary, &maps, &dest)?;
            eprintln!("correlate: wrote {}", dest.display());
            Ok(EXIT_OK)
        }
        Command::Audit {
            inputs,
            conf_min,
            iou_max,
            cluster_iou,
        } => {
            let mut audit = cfg.audit;
            audit.conf_min = conf_min.unwrap_or(audit.conf_min);
            audit.iou_max = iou_max.unwrap_or(audit.iou_max);
            audit.cluster_iou = cluster_iou.unwrap_or(audit.cluster_iou);
            let (gt, dets) = inputs.load()?;
            let dest = out.join("audit");
            let file = commands::run_audit(&gt, &dets, &audit, &dest)?;
            eprintln!(
                "audit: {} candidates in {}",
                file.candidates.len(),
                dest.join(CANDIDATES_FILE).display()
            );
            Ok(EXIT_OK)
        }
        Command::Serve {
            layout,
            gt,
            box_format,
            candidates,
            verdicts,
            bind,
            static_dir,
        } => {
            let layout = DatasetLayout::open(&layout)?;
            let gt_path = gt.unwrap_or_else(|| layout.ground_truth_path());
            let gt = commands::load_ground_truth(&gt_path, box_format)?;
            let cand_path = or_default(candidates, &out, "audit", CANDIDATES_FILE);
            let text = std::fs::read_to_string(&cand_path)
                .with_context(|| format!("reading {}", cand_path.display()))?;
            let candidates = CandidateFile::from_json(&text)
                .with_context(|| format!("parsing {}", cand_path.display()))?;
            let log_path = or_default(verdicts, &out, "audit", "verdicts.jsonl");
            if let Some(dir) = log_path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            let app = Arc::new(AppState::open(layout, gt, candidates, &log_path)?);
            let progress = app.snapshot().progress();
            eprintln!(
                "serve: {} candidates ({} pending), verdicts in {}",
                progress.total,
                progress.counts.pending,
                log_path.display()
            );
            let rt = tokio::runtime::Runtime::new().context("starting runtime")?;
            rt.block_on(service::serve(app, static_dir, &bind))?;
            Ok(EXIT_OK)
        }
    }
}
