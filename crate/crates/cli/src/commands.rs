//! The batch subcommands. Each one reads its inputs, writes into a
//! destination directory and returns a summary for the caller to print.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::mpsc;

use anyhow::{bail, Context};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use uwqa_core::deteval::{
    map_50_95, mine_audit_candidates, AuditConfig, BoxFormat, CandidateFile, ClassInfo, Detection,
    DetectionSet, EvalResult, EvalTable, GroundTruth,
};
use uwqa_core::qindex::{
    compute_qindex_with, delta_qindex, distribution_summary, sample_bins, ExtremaOrder,
    MetricRow, QIndexOptions, BIN_COUNT, METRIC_TABLE_HEADER, ORIGINAL_MODEL,
};
use uwqa_core::report::format::{fmt_sig6, write_csv};
use uwqa_core::report::{
    build_scatter, export_report, sha256_hex, summaries_from_csv, summarize_models, Manifest,
    ManifestEntry, ReportArtifacts, MANIFEST_FILE,
};
use uwqa_core::{decode_image, metric_vector, Error, MetricConfig, MetricTable, MetricVector};

use crate::layout::DatasetLayout;

pub const PROGRESS_FILE: &str = "metrics.progress.jsonl";
pub const FAILURES_FILE: &str = "failures.csv";
pub const CANDIDATES_FILE: &str = "candidates.json";

fn read_text(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn create_dir(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// Adds extra files to an existing export manifest and rewrites it.
fn extend_manifest(dest: &Path, manifest: &mut Manifest, files: &[(&str, usize, String)]) -> anyhow::Result<()> {
    for (name, rows, contents) in files {
        write_text(&dest.join(name), contents)?;
        manifest.entries.push(ManifestEntry {
            file: name.to_string(),
            rows: *rows,
            sha256: sha256_hex(contents.as_bytes()),
        });
    }
    write_text(&dest.join(MANIFEST_FILE), &manifest.to_json())
}

// ---------------------------------------------------------------- metrics

/// One line of the resume manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProgressRecord {
    pub model: String,
    pub image_id: String,
    /// Hash of the metric configuration the row was scored with.
    pub config: String,
    #[serde(flatten)]
    pub outcome: Outcome,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum Outcome {
    Ok { metrics: MetricVector },
    Failed { error: String },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Failure {
    pub model: String,
    pub image_id: String,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MetricsSummary {
    /// Rows scored in this run.
    pub scored: usize,
    /// Rows taken from the resume manifest.
    pub reused: usize,
    /// Rows written to `metrics.csv`.
    pub rows: usize,
    pub failures: Vec<Failure>,
}

pub fn config_hash(cfg: &MetricConfig) -> String {
    let text = serde_json::to_string(cfg).expect("config serializes");
    sha256_hex(text.as_bytes())[..16].to_string()
}

/// Reads the completed rows of a resume manifest. Unparseable lines (a run
/// killed mid-write) are skipped; later records win over earlier ones.
fn read_progress(path: &Path, hash: &str) -> anyhow::Result<HashMap<(String, String), MetricVector>> {
    let mut done = HashMap::new();
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(done),
        Err(e) => return Err(e).with_context(|| format!("reading {}", path.display())),
    };
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.with_context(|| format!("reading {}", path.display()))?;
        if line.trim().is_empty() {
            continue;
        }
        let Ok(rec) = serde_json::from_str::<ProgressRecord>(&line) else {
            log::warn!("{}:{}: skipping unreadable progress record", path.display(), i + 1);
            continue;
        };
        if rec.config != hash {
            continue;
        }
        let key = (rec.model, rec.image_id);
        match rec.outcome {
            Outcome::Ok { metrics } => {
                done.insert(key, metrics);
            }
            Outcome::Failed { .. } => {
                done.remove(&key);
            }
        }
    }
    Ok(done)
}

fn open_progress(path: &Path) -> anyhow::Result<File> {
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .read(true)
        .open(path)
        .with_context(|| format!("opening {}", path.display()))?;
    // Terminate a torn last line so the next record starts cleanly.
    let len = file.metadata()?.len();
    if len > 0 {
        use std::io::{Read, Seek, SeekFrom};
        let mut last = [0u8; 1];
        file.seek(SeekFrom::Start(len - 1))?;
        file.read_exact(&mut last)?;
        if last[0] != b'\n' {
            file.write_all(b"\n")?;
        }
    }
    Ok(file)
}

fn score_file(path: &Path, cfg: &MetricConfig) -> Result<MetricVector, String> {
    let bytes = std::fs::read(path).map_err(|e| format!("reading {}: {e}", path.display()))?;
    let img = decode_image(&bytes).map_err(|e| e.to_string())?;
    metric_vector(&img, cfg).map_err(|e| e.to_string())
}

/// Scores every (model, image) of the layout into `dest/metrics.csv`.
///
/// Work is spread over `jobs` threads (all cores when `None`); results flow
/// through one writer thread that appends them to the resume manifest.
/// Rows already present in the manifest under the same configuration are
/// not recomputed. A failed image is logged and left out of the table.
pub fn run_metrics(
    layout: &DatasetLayout,
    cfg: &MetricConfig,
    jobs: Option<usize>,
    dest: &Path,
) -> anyhow::Result<MetricsSummary> {
    create_dir(dest)?;
    let hash = config_hash(cfg);
    let progress_path = dest.join(PROGRESS_FILE);
    let mut done = read_progress(&progress_path, &hash)?;
    let reused = done.len();

    let todo: Vec<(String, String, PathBuf)> = layout
        .models
        .iter()
        .flat_map(|m| layout.image_ids.iter().map(move |id| (m, id)))
        .filter(|(m, id)| !done.contains_key(&((*m).clone(), (*id).clone())))
        .map(|(m, id)| {
            let path = layout.image_path(m, id).expect("layout lists every pair").to_path_buf();
            (m.clone(), id.clone(), path)
        })
        .collect();

    let mut file = open_progress(&progress_path)?;
    let (tx, rx) = mpsc::channel::<ProgressRecord>();
    let writer = std::thread::spawn(move || -> std::io::Result<Vec<ProgressRecord>> {
        let mut records = Vec::new();
        for rec in rx {
            let line = serde_json::to_string(&rec).expect("record serializes");
            writeln!(file, "{line}")?;
            file.flush()?;
            records.push(rec);
        }
        file.sync_all()?;
        Ok(records)
    });

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder.build().context("starting worker pool")?;
    pool.install(|| {
        todo.par_iter().for_each_with(tx, |tx, (model, id, path)| {
            let outcome = match score_file(path, cfg) {
                Ok(metrics) => Outcome::Ok { metrics },
                Err(error) => Outcome::Failed { error },
            };
            // The receiver only goes away if the writer failed; that error
            // is reported by join below.
            let _ = tx.send(ProgressRecord {
                model: model.clone(),
                image_id: id.clone(),
                config: hash.clone(),
                outcome,
            });
        })
    });
    let records = writer
        .join()
        .expect("writer thread does not panic")
        .with_context(|| format!("writing {}", progress_path.display()))?;

    let mut failures = Vec::new();
    for rec in records {
        match rec.outcome {
            Outcome::Ok { metrics } => {
                done.insert((rec.model, rec.image_id), metrics);
            }
            Outcome::Failed { error } => {
                log::warn!("{}/{}: {error}", rec.model, rec.image_id);
                failures.push(Failure {
                    model: rec.model,
                    image_id: rec.image_id,
                    error,
                });
            }
        }
    }
    failures.sort_by(|a, b| (&a.model, &a.image_id).cmp(&(&b.model, &b.image_id)));

    let mut rows = Vec::new();
    for model in &layout.models {
        for id in &layout.image_ids {
            if let Some(m) = done.get(&(model.clone(), id.clone())) {
                rows.push(MetricRow {
                    model: model.clone(),
                    image_id: id.clone(),
                    metrics: *m,
                });
            }
        }
    }
    let n_rows = rows.len();
    let failures_path = dest.join(FAILURES_FILE);
    if failures.is_empty() {
        let table = MetricTable::from_rows(rows)?;
        export_report(
            &ReportArtifacts {
                metrics: Some(table),
                ..Default::default()
            },
            dest,
        )?;
        if failures_path.exists() {
            std::fs::remove_file(&failures_path)
                .with_context(|| format!("removing {}", failures_path.display()))?;
        }
    } else {
        // A partial table cannot form a full model x image grid, so only
        // the CSV rows are written.
        let csv = write_csv(
            &METRIC_TABLE_HEADER,
            rows.into_iter().map(|r| {
                let mut cells = vec![r.model, r.image_id];
                cells.extend(r.metrics.to_array().map(fmt_sig6));
                cells
            }),
        );
        write_text(&dest.join("metrics.csv"), &csv)?;
        let failed = write_csv(
            &["model", "image_id", "error"],
            failures
                .iter()
                .map(|f| [f.model.clone(), f.image_id.clone(), f.error.clone()]),
        );
        write_text(&failures_path, &failed)?;
    }
    Ok(MetricsSummary {
        scored: todo.len(),
        reused,
        rows: n_rows,
        failures,
    })
}

// ----------------------------------------------------------------- qindex

pub const BINS_FILE: &str = "bins.csv";
pub const DISTRIBUTION_FILE: &str = "distribution.json";

/// Q-index, Δ Q-index, per-model summaries, quality bins and distributions
/// for a metric table, written under `dest`.
pub fn run_qindex(
    metrics_csv: &Path,
    order: ExtremaOrder,
    seed: u64,
    dest: &Path,
) -> anyhow::Result<Manifest> {
    let table = MetricTable::from_csv(&read_text(metrics_csv)?)
        .with_context(|| format!("parsing {}", metrics_csv.display()))?;
    if table.is_empty() {
        return Err(Error::EmptyInput.into());
    }
    if table.model_index(ORIGINAL_MODEL).is_none() {
        return Err(Error::UnknownModel(ORIGINAL_MODEL.into()).into());
    }
    let qt = compute_qindex_with(&table, QIndexOptions { extrema_order: order })?;
    let deltas = delta_qindex(&qt, ORIGINAL_MODEL)?;
    let summaries = summarize_models(&table)?;

    let mut bin_rows = Vec::new();
    let mut distributions = BTreeMap::new();
    for model in &qt.models {
        for b in sample_bins(&qt, model, seed)? {
            bin_rows.push([
                model.clone(),
                b.bin.to_string(),
                fmt_sig6(b.lower),
                fmt_sig6(b.upper),
                b.count.to_string(),
                b.image_id.unwrap_or_default(),
            ]);
        }
        distributions.insert(model.clone(), distribution_summary(qt.model_q(model)?, BIN_COUNT)?);
    }
    let n_bins = bin_rows.len();
    let bins_csv = write_csv(&["model", "bin", "lower", "upper", "count", "image_id"], bin_rows);
    let dist_json = serde_json::to_string_pretty(&distributions)? + "\n";

    create_dir(dest)?;
    let mut manifest = export_report(
        &ReportArtifacts {
            metrics: Some(table),
            summaries: Some(summaries),
            qindex: Some(qt),
            deltas: Some(deltas),
            ..Default::default()
        },
        dest,
    )?;
    let n_models = distributions.len();
    extend_manifest(
        dest,
        &mut manifest,
        &[(BINS_FILE, n_bins, bins_csv), (DISTRIBUTION_FILE, n_models, dist_json)],
    )?;
    Ok(manifest)
}

// ------------------------------------------------------------ detections

/// Parses `model=path`.
pub fn parse_model_path(spec: &str) -> Result<(String, PathBuf), String> {
    match spec.split_once('=') {
        Some((model, path)) if !model.is_empty() && !path.is_empty() => {
            Ok((model.to_string(), PathBuf::from(path)))
        }
        _ => Err(format!("expected MODEL=PATH, got `{spec}`")),
    }
}

pub fn load_ground_truth(path: &Path, format: BoxFormat) -> anyhow::Result<GroundTruth> {
    GroundTruth::from_json(&read_text(path)?, format)
        .with_context(|| format!("parsing {}", path.display()))
}

/// Loads one detection file per model, rejecting repeated model ids.
pub fn load_detections(
    specs: &[(String, PathBuf)],
    format: BoxFormat,
    gt: &GroundTruth,
) -> anyhow::Result<Vec<(String, Vec<Detection>)>> {
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(specs.len());
    for (model, path) in specs {
        if !seen.insert(model.as_str()) {
            bail!("model `{model}` is given more than once");
        }
        let set = DetectionSet::from_json(&read_text(path)?, format, gt)
            .with_context(|| format!("parsing {}", path.display()))?;
        out.push((model.clone(), set.detections));
    }
    Ok(out)
}

/// Class list used for evaluation: explicit, else declared in the ground
/// truth, else every class id seen in the annotations.
pub fn resolve_classes(gt: &GroundTruth, explicit: Option<Vec<ClassInfo>>) -> Vec<ClassInfo> {
    if let Some(c) = explicit {
        return c;
    }
    if !gt.classes.is_empty() {
        return gt.classes.clone();
    }
    let ids: std::collections::BTreeSet<u32> = gt.annotations.iter().map(|a| a.class_id).collect();
    ids.into_iter()
        .map(|id| ClassInfo {
            id,
            name: id.to_string(),
        })
        .collect()
}

pub fn load_classes(path: &Path) -> anyhow::Result<Vec<ClassInfo>> {
    serde_json::from_str(&read_text(path)?).with_context(|| format!("parsing {}", path.display()))
}

#[derive(Serialize)]
struct ModelResult<'a> {
    model: &'a str,
    result: &'a EvalResult,
}

pub const MAP_DETAIL_FILE: &str = "map_detail.json";

/// mAP50:95 per class and overall for each model's detections.
pub fn run_map(
    gt: &GroundTruth,
    detections: &[(String, Vec<Detection>)],
    classes: &[ClassInfo],
    dest: &Path,
) -> anyhow::Result<EvalTable> {
    if detections.is_empty() {
        bail!("no detection files given");
    }
    let mut results = Vec::with_capacity(detections.len());
    for (model, dets) in detections {
        let r = map_50_95(dets, &gt.annotations, classes).with_context(|| format!("evaluating `{model}`"))?;
        results.push((model.clone(), r));
    }
    let table = EvalTable::from_results(&results)?;
    create_dir(dest)?;
    let mut manifest = export_report(
        &ReportArtifacts {
            evaluation: Some(table.clone()),
            ..Default::default()
        },
        dest,
    )?;
    let detail: Vec<ModelResult> = results
        .iter()
        .map(|(model, result)| ModelResult { model, result })
        .collect();
    let detail_json = serde_json::to_string_pretty(&detail)? + "\n";
    extend_manifest(dest, &mut manifest, &[(MAP_DETAIL_FILE, detail.len(), detail_json)])?;
    Ok(table)
}

// -------------------------------------------------------------- correlate

/// Correlates per-model metric means with overall mAP. Several evaluation
/// tables may be given as long as no model appears twice.
pub fn run_correlate(summary_csv: &Path, map_csvs: &[PathBuf], dest: &Path) -> anyhow::Result<Manifest> {
    let summaries = summaries_from_csv(&read_text(summary_csv)?)
        .with_context(|| format!("parsing {}", summary_csv.display()))?;
    let mut overall = BTreeMap::new();
    for path in map_csvs {
        let table = EvalTable::from_csv(&read_text(path)?).with_context(|| format!("parsing {}", path.display()))?;
        for row in table.rows {
            if overall.insert(row.model.clone(), row.overall).is_some() {
                return Err(Error::Schema(format!("duplicate model `{}` across evaluation tables", row.model)).into());
            }
        }
    }
    let scatter = build_scatter(&summaries, &overall)?;
    create_dir(dest)?;
    Ok(export_report(
        &ReportArtifacts {
            scatter: Some(scatter),
            ..Default::default()
        },
        dest,
    )?)
}

// ------------------------------------------------------------------ audit

/// Mines audit candidates and writes them to `dest/candidates.json`.
pub fn run_audit(
    gt: &GroundTruth,
    detections: &[(String, Vec<Detection>)],
    cfg: &AuditConfig,
    dest: &Path,
) -> anyhow::Result<CandidateFile> {
    let candidates = mine_audit_candidates(detections, &gt.annotations, cfg)?;
    let file = CandidateFile {
        config: *cfg,
        candidates,
    };
    create_dir(dest)?;
    write_text(&dest.join(CANDIDATES_FILE), &(file.to_json() + "\n"))?;
    Ok(file)
}
