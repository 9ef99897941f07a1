use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{MetricKind, MetricVector};
use crate::report::format::{fmt_sig6, parse_f64, write_csv, CsvDoc};

/// Raw metric scores for every (model, image) pair. Every model covers the
/// same image ids, stored in a shared order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MetricTableRows", into = "MetricTableRows")]
pub struct MetricTable {
    models: Vec<String>,
    image_ids: Vec<String>,
    // values[model][image]
    values: Vec<Vec<MetricVector>>,
}

/// One row of a [`MetricTable`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub model: String,
    pub image_id: String,
    #[serde(flatten)]
    pub metrics: MetricVector,
}

#[derive(Serialize, Deserialize)]
struct MetricTableRows {
    rows: Vec<MetricRow>,
}

impl TryFrom<MetricTableRows> for MetricTable {
    type Error = Error;

    fn try_from(value: MetricTableRows) -> Result<Self> {
        MetricTable::from_rows(value.rows)
    }
}

impl From<MetricTable> for MetricTableRows {
    fn from(t: MetricTable) -> Self {
        MetricTableRows { rows: t.rows() }
    }
}

pub const METRIC_TABLE_HEADER: [&str; 6] = ["model", "image_id", "uiqm", "uciqe", "ccf", "entropy"];

impl MetricTable {
    pub fn new(
        models: Vec<String>,
        image_ids: Vec<String>,
        values: Vec<Vec<MetricVector>>,
    ) -> Result<Self> {
        if values.len() != models.len() || values.iter().any(|r| r.len() != image_ids.len()) {
            return Err(Error::Table("value grid does not match model/image lists".into()));
        }
        check_unique(&models, "model")?;
        check_unique(&image_ids, "image id")?;
        if let Some((m, i)) = values.iter().enumerate().find_map(|(m, row)| {
            row.iter().position(|v| !v.is_finite()).map(|i| (m, i))
        }) {
            return Err(Error::Table(format!(
                "non-finite metric for model `{}`, image `{}`",
                models[m], image_ids[i]
            )));
        }
        Ok(Self {
            models,
            image_ids,
            values,
        })
    }

    /// Groups rows by model (first-appearance order). The first model fixes
    /// the image order; every other model must cover exactly the same ids.
    pub fn from_rows(rows: Vec<MetricRow>) -> Result<Self> {
        let mut models: Vec<String> = Vec::new();
        let mut per_model: HashMap<String, Vec<(String, MetricVector)>> = HashMap::new();
        for row in rows {
            if !per_model.contains_key(&row.model) {
                models.push(row.model.clone());
            }
            per_model
                .entry(row.model)
                .or_default()
                .push((row.image_id, row.metrics));
        }
        let Some(first) = models.first() else {
            return Ok(Self {
                models: vec![],
                image_ids: vec![],
                values: vec![],
            });
        };
        let image_ids: Vec<String> = per_model[first].iter().map(|(id, _)| id.clone()).collect();
        check_unique(&image_ids, "image id")?;
        let position: HashMap<&str, usize> = image_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        let mut values = Vec::with_capacity(models.len());
        for model in &models {
            let entries = &per_model[model];
            let mut row: Vec<Option<MetricVector>> = vec![None; image_ids.len()];
            for (id, v) in entries {
                let i = *position.get(id.as_str()).ok_or_else(|| {
                    Error::Table(format!("model `{model}` has image `{id}` missing from `{first}`"))
                })?;
                if row[i].replace(*v).is_some() {
                    return Err(Error::Table(format!(
                        "duplicate row for model `{model}`, image `{id}`"
                    )));
                }
            }
            let row: Option<Vec<MetricVector>> = row.into_iter().collect();
            values.push(row.ok_or_else(|| {
                Error::Table(format!("model `{model}` does not cover every image of `{first}`"))
            })?);
        }
        Self::new(models, image_ids, values)
    }

    pub fn models(&self) -> &[String] {
        &self.models
    }

    pub fn image_ids(&self) -> &[String] {
        &self.image_ids
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty() || self.image_ids.is_empty()
    }

    pub fn model_index(&self, model: &str) -> Option<usize> {
        self.models.iter().position(|m| m == model)
    }

    pub fn model_values(&self, model_index: usize) -> &[MetricVector] {
        &self.values[model_index]
    }

    pub fn get(&self, model_index: usize, image_index: usize) -> MetricVector {
        self.values[model_index][image_index]
    }

    /// Column of one metric for one model, in image order.
    pub fn column(&self, model_index: usize, kind: MetricKind) -> Vec<f64> {
        self.values[model_index].iter().map(|v| v.get(kind)).collect()
    }

    /// Applies `f` to one metric across every model.
    pub fn map_metric(&self, kind: MetricKind, f: impl Fn(f64) -> f64) -> Self {
        let mut out = self.clone();
        for row in &mut out.values {
            for v in row {
                v.set(kind, f(v.get(kind)));
            }
        }
        out
    }

    pub fn rows(&self) -> Vec<MetricRow> {
        let mut rows = Vec::with_capacity(self.models.len() * self.image_ids.len());
        for (m, model) in self.models.iter().enumerate() {
            for (i, id) in self.image_ids.iter().enumerate() {
                rows.push(MetricRow {
                    model: model.clone(),
                    image_id: id.clone(),
                    metrics: self.values[m][i],
                });
            }
        }
        rows
    }

    pub fn to_csv(&self) -> String {
        write_csv(
            &METRIC_TABLE_HEADER,
            self.rows().into_iter().map(|r| {
                let mut cells = vec![r.model, r.image_id];
                cells.extend(r.metrics.to_array().map(fmt_sig6));
                cells
            }),
        )
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let doc = CsvDoc::parse(text)?;
        doc.expect_header(&METRIC_TABLE_HEADER)?;
        let mut rows = Vec::with_capacity(doc.records.len());
        for (line, rec) in &doc.records {
            let mut v = [0.0; 4];
            for (k, kind) in MetricKind::ALL.iter().enumerate() {
                v[k] = parse_f64(&rec[2 + k], kind.name(), *line)?;
            }
            rows.push(MetricRow {
                model: rec[0].clone(),
                image_id: rec[1].clone(),
                metrics: MetricVector::from_array(v),
            });
        }
        Self::from_rows(rows)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))
    }
}

fn check_unique(items: &[String], what: &str) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for it in items {
        if !seen.insert(it) {
            return Err(Error::Table(format!("duplicate {what} `{it}`")));
        }
    }
    Ok(())
}

/// Rescaling range used for one metric.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Extrema {
    pub min: f64,
    pub max: f64,
}

/// Fused Q-index per (model, image) plus the constants used to produce it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QIndexTable {
    pub models: Vec<String>,
    pub image_ids: Vec<String>,
    /// q[model][image], every value in [0, 1].
    pub q: Vec<Vec<f64>>,
    pub global_extrema: BTreeMap<MetricKind, Extrema>,
    /// Outliers replaced per model and metric.
    pub replaced: BTreeMap<String, BTreeMap<MetricKind, usize>>,
}

pub const QINDEX_HEADER: [&str; 3] = ["model", "image_id", "q"];

impl QIndexTable {
    pub fn model_index(&self, model: &str) -> Result<usize> {
        self.models
            .iter()
            .position(|m| m == model)
            .ok_or_else(|| Error::UnknownModel(model.to_string()))
    }

    pub fn get(&self, model: &str, image_id: &str) -> Option<f64> {
        let m = self.models.iter().position(|x| x == model)?;
        let i = self.image_ids.iter().position(|x| x == image_id)?;
        Some(self.q[m][i])
    }

    pub fn model_q(&self, model: &str) -> Result<&[f64]> {
        Ok(&self.q[self.model_index(model)?])
    }

    pub fn rows(&self) -> impl Iterator<Item = (&str, &str, f64)> + '_ {
        self.models.iter().enumerate().flat_map(move |(m, model)| {
            self.image_ids
                .iter()
                .enumerate()
                .map(move |(i, id)| (model.as_str(), id.as_str(), self.q[m][i]))
        })
    }

    pub fn to_csv(&self) -> String {
        write_csv(
            &QINDEX_HEADER,
            self.rows()
                .map(|(m, i, q)| vec![m.to_string(), i.to_string(), fmt_sig6(q)]),
        )
    }

    /// CSV of the rescaling ranges, one row per metric.
    pub fn extrema_csv(&self) -> String {
        write_csv(
            &["metric", "min", "max"],
            self.global_extrema
                .iter()
                .map(|(k, e)| vec![k.name().to_string(), fmt_sig6(e.min), fmt_sig6(e.max)]),
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))
    }
}
