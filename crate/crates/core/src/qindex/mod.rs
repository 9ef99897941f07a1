//! Q-index: per-model outlier replacement, pooled min-max rescaling and
//! averaging of the four metrics into one score in [0, 1].

mod robust;
mod table;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use robust::{flag_outliers, mad, mad_scale, replace_outliers};
pub use table::{Extrema, MetricRow, MetricTable, QIndexTable, METRIC_TABLE_HEADER, QINDEX_HEADER};

use crate::error::{Error, Result};
use crate::metrics::MetricKind;
use crate::report::format::{fmt_sig6, write_csv};
use crate::stats::quantile_sorted;

/// Reserved model id of the unenhanced image set.
pub const ORIGINAL_MODEL: &str = "original";

/// Number of quality bins.
pub const BIN_COUNT: usize = 10;

/// When the pooled rescaling range is taken relative to outlier replacement.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExtremaOrder {
    /// Range over the outlier-replaced values (default).
    #[default]
    AfterReplacement,
    /// Range over the raw values, before any replacement.
    BeforeReplacement,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct QIndexOptions {
    pub extrema_order: ExtremaOrder,
}

/// [`compute_qindex_with`] using the default options.
pub fn compute_qindex(table: &MetricTable) -> Result<QIndexTable> {
    compute_qindex_with(table, QIndexOptions::default())
}

pub fn compute_qindex_with(table: &MetricTable, opts: QIndexOptions) -> Result<QIndexTable> {
    if table.is_empty() {
        return Err(Error::EmptyInput);
    }
    let models = table.models();
    let n_img = table.image_ids().len();

    // cleaned[metric][model][image]
    let mut cleaned: Vec<Vec<Vec<f64>>> = Vec::with_capacity(MetricKind::ALL.len());
    let mut replaced: BTreeMap<String, BTreeMap<MetricKind, usize>> = BTreeMap::new();
    let mut global_extrema = BTreeMap::new();
    for kind in MetricKind::ALL {
        let mut per_model = Vec::with_capacity(models.len());
        let (mut raw_lo, mut raw_hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (m, model) in models.iter().enumerate() {
            let col = table.column(m, kind);
            for &v in &col {
                raw_lo = raw_lo.min(v);
                raw_hi = raw_hi.max(v);
            }
            let mask = flag_outliers(&col)?;
            replaced
                .entry(model.clone())
                .or_default()
                .insert(kind, mask.iter().filter(|&&f| f).count());
            per_model.push(replace_outliers(&col, &mask)?);
        }
        let (lo, hi) = match opts.extrema_order {
            ExtremaOrder::BeforeReplacement => (raw_lo, raw_hi),
            ExtremaOrder::AfterReplacement => per_model
                .iter()
                .flatten()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                    (lo.min(v), hi.max(v))
                }),
        };
        if !(lo < hi) {
            return Err(Error::DegenerateMetric(kind.name().to_string()));
        }
        global_extrema.insert(kind, Extrema { min: lo, max: hi });
        cleaned.push(per_model);
    }

    let mut q = vec![vec![0.0; n_img]; models.len()];
    for (k, kind) in MetricKind::ALL.iter().enumerate() {
        let Extrema { min, max } = global_extrema[kind];
        for (m, row) in q.iter_mut().enumerate() {
            for (i, acc) in row.iter_mut().enumerate() {
                *acc += ((cleaned[k][m][i] - min) / (max - min)).clamp(0.0, 1.0);
            }
        }
    }
    let n_metrics = MetricKind::ALL.len() as f64;
    for row in &mut q {
        for v in row {
            *v = (*v / n_metrics).clamp(0.0, 1.0);
        }
    }
    Ok(QIndexTable {
        models: models.to_vec(),
        image_ids: table.image_ids().to_vec(),
        q,
        global_extrema,
        replaced,
    })
}

/// Change in Q-index of one enhanced image relative to its original.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaRecord {
    pub model: String,
    pub image_id: String,
    pub delta: f64,
}

pub const DELTA_HEADER: [&str; 3] = ["model", "image_id", "delta"];

/// `q(model, image) - q(original, image)` for every non-original model.
pub fn delta_qindex(qt: &QIndexTable, original_model: &str) -> Result<Vec<DeltaRecord>> {
    let base = qt.model_q(original_model)?;
    let mut out = Vec::new();
    for (m, model) in qt.models.iter().enumerate() {
        if model == original_model {
            continue;
        }
        for (i, id) in qt.image_ids.iter().enumerate() {
            out.push(DeltaRecord {
                model: model.clone(),
                image_id: id.clone(),
                delta: qt.q[m][i] - base[i],
            });
        }
    }
    Ok(out)
}

pub fn deltas_to_csv(deltas: &[DeltaRecord]) -> String {
    write_csv(
        &DELTA_HEADER,
        deltas
            .iter()
            .map(|d| vec![d.model.clone(), d.image_id.clone(), fmt_sig6(d.delta)]),
    )
}

/// Quality bin of `q`: `floor(10 q)`, with 1.0 closing the last bin.
pub fn assign_bins(q: f64) -> Result<usize> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::OutOfRange(q));
    }
    Ok(((q * BIN_COUNT as f64).floor() as usize).min(BIN_COUNT - 1))
}

/// Representative image drawn for one quality bin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinSample {
    pub bin: usize,
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    pub image_id: Option<String>,
}

/// Draws one image per non-empty bin with a seeded generator. Bin members
/// are kept in table order, so the draw depends only on the table and seed.
pub fn sample_bins(qt: &QIndexTable, model: &str, seed: u64) -> Result<Vec<BinSample>> {
    let qs = qt.model_q(model)?;
    let mut members: Vec<Vec<&str>> = vec![Vec::new(); BIN_COUNT];
    for (id, &q) in qt.image_ids.iter().zip(qs) {
        members[assign_bins(q)?].push(id);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(members
        .iter()
        .enumerate()
        .map(|(bin, ids)| BinSample {
            bin,
            lower: bin as f64 / BIN_COUNT as f64,
            upper: (bin + 1) as f64 / BIN_COUNT as f64,
            count: ids.len(),
            image_id: (!ids.is_empty()).then(|| ids[rng.random_range(0..ids.len())].to_string()),
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
}

/// Histogram plus five-number summary of a sample; the data behind a violin
/// plot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistributionSummary {
    pub count: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub histogram: Vec<HistogramBin>,
}

/// Equal-width histogram over `[min, max]` (a single bin when the sample is
/// constant) and linearly interpolated quartiles.
pub fn distribution_summary(values: &[f64], bins: usize) -> Result<DistributionSummary> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if bins == 0 {
        return Err(Error::Table("histogram needs at least one bin".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (min, max) = (sorted[0], sorted[sorted.len() - 1]);
    let histogram = if min == max {
        vec![HistogramBin {
            lower: min,
            upper: max,
            count: values.len(),
        }]
    } else {
        let width = (max - min) / bins as f64;
        let mut counts = vec![0usize; bins];
        for v in &sorted {
            let b = (((v - min) / (max - min)) * bins as f64).floor() as usize;
            counts[b.min(bins - 1)] += 1;
        }
        counts
            .into_iter()
            .enumerate()
            .map(|(b, count)| HistogramBin {
                lower: min + b as f64 * width,
                upper: if b + 1 == bins { max } else { min + (b + 1) as f64 * width },
                count,
            })
            .collect()
    };
    Ok(DistributionSummary {
        count: values.len(),
        min,
        q1: quantile_sorted(&sorted, 0.25),
        median: quantile_sorted(&sorted, 0.5),
        q3: quantile_sorted(&sorted, 0.75),
        max,
        histogram,
    })
}
