//! Dataset-level statistics and artifact export: per-model metric summaries,
//! metric-vs-mAP correlation and a hashed manifest of everything written.

pub mod format;

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::deteval::EvalTable;
use crate::error::{Error, Result};
use crate::metrics::{MetricKind, MetricVector};
use crate::qindex::{deltas_to_csv, DeltaRecord, MetricTable, QIndexTable};
use crate::stats::{mean, std_population};
use format::{fmt_sig6, parse_f64, write_csv, CsvDoc};

/// Mean and population standard deviation of every metric for one model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub model: String,
    /// Number of images summarized; unknown for transcribed tables.
    pub count: Option<usize>,
    pub mean: MetricVector,
    pub std: MetricVector,
}

pub const SUMMARY_HEADER: [&str; 10] = [
    "model",
    "count",
    "uiqm_mean",
    "uiqm_std",
    "uciqe_mean",
    "uciqe_std",
    "ccf_mean",
    "ccf_std",
    "entropy_mean",
    "entropy_std",
];

pub fn summarize_models(table: &MetricTable) -> Result<Vec<ModelSummary>> {
    if table.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut out = Vec::with_capacity(table.models().len());
    for (m, model) in table.models().iter().enumerate() {
        let mut mu = MetricVector::default();
        let mut sd = MetricVector::default();
        for kind in MetricKind::ALL {
            let col = table.column(m, kind);
            mu.set(kind, mean(&col)?);
            sd.set(kind, std_population(&col)?);
        }
        out.push(ModelSummary {
            model: model.clone(),
            count: Some(table.image_ids().len()),
            mean: mu,
            std: sd,
        });
    }
    Ok(out)
}

pub fn summaries_to_csv(summaries: &[ModelSummary]) -> String {
    write_csv(
        &SUMMARY_HEADER,
        summaries.iter().map(|s| {
            let mut cells = vec![
                s.model.clone(),
                s.count.map(|c| c.to_string()).unwrap_or_default(),
            ];
            for kind in MetricKind::ALL {
                cells.push(fmt_sig6(s.mean.get(kind)));
                cells.push(fmt_sig6(s.std.get(kind)));
            }
            cells
        }),
    )
}

pub fn summaries_from_csv(text: &str) -> Result<Vec<ModelSummary>> {
    let doc = CsvDoc::parse(text)?;
    doc.expect_header(&SUMMARY_HEADER)?;
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(doc.records.len());
    for (line, rec) in &doc.records {
        if !seen.insert(rec[0].clone()) {
            return Err(Error::Schema(format!(
                "line {line}: duplicate model id `{}`",
                rec[0]
            )));
        }
        let count = match rec[1].trim() {
            "" => None,
            c => Some(c.parse::<usize>().map_err(|_| {
                Error::Schema(format!("line {line}: `{c}` is not an image count"))
            })?),
        };
        let mut mu = MetricVector::default();
        let mut sd = MetricVector::default();
        for (k, kind) in MetricKind::ALL.iter().enumerate() {
            mu.set(*kind, parse_f64(&rec[2 + 2 * k], SUMMARY_HEADER[2 + 2 * k], *line)?);
            let s = parse_f64(&rec[3 + 2 * k], SUMMARY_HEADER[3 + 2 * k], *line)?;
            if s < 0.0 {
                return Err(Error::Schema(format!("line {line}: negative standard deviation")));
            }
            sd.set(*kind, s);
        }
        out.push(ModelSummary {
            model: rec[0].clone(),
            count,
            mean: mu,
            std: sd,
        });
    }
    Ok(out)
}

/// Pearson and Spearman coefficients of paired samples.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub pearson_r: f64,
    pub spearman_rho: f64,
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    check_pairs(xs, ys)?;
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ConstantInput);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based ranks; tied values share the average of their ranks.
pub fn fractional_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    check_pairs(xs, ys)?;
    pearson(&fractional_ranks(xs), &fractional_ranks(ys))
}

pub fn correlate(xs: &[f64], ys: &[f64]) -> Result<Correlation> {
    Ok(Correlation {
        pearson_r: pearson(xs, ys)?,
        spearman_rho: spearman(xs, ys)?,
    })
}

fn check_pairs(xs: &[f64], ys: &[f64]) -> Result<()> {
    if xs.len() != ys.len() {
        return Err(Error::Table(format!(
            "paired samples differ in length ({} vs {})",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 3 {
        return Err(Error::TooFewSamples {
            needed: 3,
            got: xs.len(),
        });
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::Table("non-finite value in paired samples".into()));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatterPoint {
    pub model: String,
    pub metric_mean: f64,
    pub map: f64,
}

/// Scatter data and correlation of one metric against overall mAP. When the
/// coefficients cannot be computed, `error` says why and both are `None`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub metric: MetricKind,
    pub n: usize,
    pub pearson_r: Option<f64>,
    pub spearman_rho: Option<f64>,
    pub error: Option<String>,
    pub scatter: Vec<ScatterPoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatterReport {
    pub metrics: Vec<CorrelationResult>,
    /// Models that have a summary but no evaluation, or the reverse.
    pub excluded: Vec<String>,
}

pub const CORRELATION_HEADER: [&str; 5] = ["metric", "n", "pearson_r", "spearman_rho", "error"];
pub const SCATTER_HEADER: [&str; 4] = ["metric", "model", "metric_mean", "map"];

/// Pairs each model's mean metric with its overall mAP, in summary order.
pub fn build_scatter(summaries: &[ModelSummary], evals: &BTreeMap<String, f64>) -> Result<ScatterReport> {
    let mut seen = HashSet::new();
    for s in summaries {
        if !seen.insert(s.model.as_str()) {
            return Err(Error::Schema(format!("duplicate model id `{}`", s.model)));
        }
    }
    let shared: Vec<&ModelSummary> = summaries
        .iter()
        .filter(|s| evals.contains_key(&s.model))
        .collect();
    if shared.is_empty() {
        return Err(Error::NoOverlap);
    }
    let mut excluded: Vec<String> = summaries
        .iter()
        .filter(|s| !evals.contains_key(&s.model))
        .map(|s| s.model.clone())
        .collect();
    excluded.extend(evals.keys().filter(|m| !seen.contains(m.as_str())).cloned());

    let metrics = MetricKind::ALL
        .iter()
        .map(|&kind| {
            let scatter: Vec<ScatterPoint> = shared
                .iter()
                .map(|s| ScatterPoint {
                    model: s.model.clone(),
                    metric_mean: s.mean.get(kind),
                    map: evals[&s.model],
                })
                .collect();
            let xs: Vec<f64> = scatter.iter().map(|p| p.metric_mean).collect();
            let ys: Vec<f64> = scatter.iter().map(|p| p.map).collect();
            let (pearson_r, spearman_rho, error) = match correlate(&xs, &ys) {
                Ok(c) => (Some(c.pearson_r), Some(c.spearman_rho), None),
                Err(e) => (None, None, Some(e.to_string())),
            };
            CorrelationResult {
                metric: kind,
                n: scatter.len(),
                pearson_r,
                spearman_rho,
                error,
                scatter,
            }
        })
        .collect();
    Ok(ScatterReport { metrics, excluded })
}

impl ScatterReport {
    pub fn correlations_csv(&self) -> String {
        write_csv(
            &CORRELATION_HEADER,
            self.metrics.iter().map(|c| {
                vec![
                    c.metric.name().to_string(),
                    c.n.to_string(),
                    format::fmt_opt(c.pearson_r),
                    format::fmt_opt(c.spearman_rho),
                    c.error.clone().unwrap_or_default(),
                ]
            }),
        )
    }

    pub fn scatter_csv(&self) -> String {
        write_csv(
            &SCATTER_HEADER,
            self.metrics.iter().flat_map(|c| {
                c.scatter.iter().map(move |p| {
                    vec![
                        c.metric.name().to_string(),
                        p.model.clone(),
                        fmt_sig6(p.metric_mean),
                        fmt_sig6(p.map),
                    ]
                })
            }),
        )
    }
}

/// Everything [`export_report`] can write; absent artifacts are skipped.
#[derive(Clone, Debug, Default)]
pub struct ReportArtifacts {
    pub metrics: Option<MetricTable>,
    pub summaries: Option<Vec<ModelSummary>>,
    pub qindex: Option<QIndexTable>,
    pub deltas: Option<Vec<DeltaRecord>>,
    pub evaluation: Option<EvalTable>,
    pub scatter: Option<ScatterReport>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub rows: usize,
    pub sha256: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

pub const MANIFEST_FILE: &str = "report.manifest.json";

impl Manifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))
    }
}

fn json<T: Serialize + ?Sized>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("artifact serializes") + "\n"
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Renders the artifacts as `(file name, row count, contents)` in a fixed order.
pub fn render_artifacts(a: &ReportArtifacts) -> Vec<(String, usize, String)> {
    let mut files = Vec::new();
    let mut add = |name: &str, rows: usize, csv: String, json_text: String| {
        files.push((format!("{name}.csv"), rows, csv));
        files.push((format!("{name}.json"), rows, json_text));
    };
    if let Some(t) = &a.metrics {
        add("metrics", t.models().len() * t.image_ids().len(), t.to_csv(), t.to_json() + "\n");
    }
    if let Some(s) = &a.summaries {
        add("summary", s.len(), summaries_to_csv(s), json(s));
    }
    if let Some(q) = &a.qindex {
        add("qindex", q.models.len() * q.image_ids.len(), q.to_csv(), q.to_json() + "\n");
        add(
            "qindex_extrema",
            q.global_extrema.len(),
            q.extrema_csv(),
            json(&q.global_extrema),
        );
    }
    if let Some(d) = &a.deltas {
        add("delta_qindex", d.len(), deltas_to_csv(d), json(d));
    }
    if let Some(e) = &a.evaluation {
        add("map", e.rows.len(), e.to_csv(), json(e));
    }
    if let Some(s) = &a.scatter {
        add("correlation", s.metrics.len(), s.correlations_csv(), json(s));
        let points = s.metrics.iter().map(|m| m.scatter.len()).sum();
        files.push(("scatter.csv".to_string(), points, s.scatter_csv()));
    }
    files
}

/// Writes every artifact as CSV and JSON into `dest` plus a manifest with row
/// counts and SHA-256 hashes. Output is byte-identical for identical input.
pub fn export_report(artifacts: &ReportArtifacts, dest: &Path) -> Result<Manifest> {
    std::fs::create_dir_all(dest).map_err(|e| Error::io(dest, e))?;
    let mut manifest = Manifest::default();
    for (name, rows, contents) in render_artifacts(artifacts) {
        let path = dest.join(&name);
        std::fs::write(&path, &contents).map_err(|e| Error::io(&path, e))?;
        manifest.entries.push(ManifestEntry {
            file: name,
            rows,
            sha256: sha256_hex(contents.as_bytes()),
        });
    }
    let path = dest.join(MANIFEST_FILE);
    std::fs::write(&path, manifest.to_json()).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}
