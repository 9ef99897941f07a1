//! Mining of annotation-audit candidates: confident detections that match no
//! ground-truth box and may therefore be objects the annotator missed.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{iou, Annotation, Detection};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditConfig {
    /// Detections below this confidence never qualify as candidates.
    pub conf_min: f64,
    /// A detection overlapping a same-class GT box with IoU at or above this
    /// value counts as matched.
    pub iou_max: f64,
    /// Single-link IoU used to group detections from different models.
    pub cluster_iou: f64,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            conf_min: 0.5,
            iou_max: 0.5,
            cluster_iou: 0.5,
        }
    }
}

impl AuditConfig {
    /// IoU thresholds must lie in [0, 1]. `conf_min` only has to be a
    /// non-negative number; values above 1 simply select nothing.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("iou_max", self.iou_max), ("cluster_iou", self.cluster_iou)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} = {v} is outside [0, 1]")));
            }
        }
        if !(self.conf_min.is_finite() && self.conf_min >= 0.0) {
            return Err(Error::Config(format!("conf_min = {} must be >= 0", self.conf_min)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CandidateStatus {
    #[default]
    Pending,
    Accepted,
    Rejected,
}

impl CandidateStatus {
    pub const ALL: [CandidateStatus; 3] = [Self::Pending, Self::Accepted, Self::Rejected];

    pub fn name(self) -> &'static str {
        match self {
            Self::Pending => "pending",
            Self::Accepted => "accepted",
            Self::Rejected => "rejected",
        }
    }
}

impl fmt::Display for CandidateStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CandidateStatus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Schema(format!("unknown status `{s}`")))
    }
}

/// One qualifying detection inside a candidate cluster.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateMember {
    pub model: String,
    pub detection: Detection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditCandidate {
    pub id: String,
    pub image_id: u64,
    /// Model of the most confident member.
    pub model: String,
    /// Most confident member detection.
    pub detection: Detection,
    /// Best IoU of the representative detection against same-class GT boxes.
    pub best_iou_vs_gt: f64,
    /// Number of distinct models with a qualifying member.
    pub agreement: usize,
    pub models: Vec<String>,
    pub members: Vec<CandidateMember>,
    #[serde(default)]
    pub status: CandidateStatus,
}

/// Serialized candidate list together with the thresholds that produced it.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CandidateFile {
    pub config: AuditConfig,
    pub candidates: Vec<AuditCandidate>,
}

impl CandidateFile {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("candidates serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: Self = serde_json::from_str(text)
            .map_err(|e| Error::Schema(format!("line {} column {}: {e}", e.line(), e.column())))?;
        let mut ids = BTreeSet::new();
        for c in &file.candidates {
            if !ids.insert(c.id.as_str()) {
                return Err(Error::Schema(format!("duplicate candidate id `{}`", c.id)));
            }
        }
        Ok(file)
    }

    pub fn get(&self, id: &str) -> Option<&AuditCandidate> {
        self.candidates.iter().find(|c| c.id == id)
    }
}

fn best_iou(det: &Detection, gts: &[&Annotation]) -> f64 {
    gts.iter()
        .filter(|g| g.class_id == det.class_id)
        .map(|g| iou(&det.bbox, &g.bbox))
        .fold(0.0, f64::max)
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Finds unmatched detections across enhancer models and groups them.
///
/// Every detection whose IoU with all same-class GT boxes on its image stays
/// below `iou_max` is unmatched. Unmatched detections of the same image and
/// class are grouped by single-link IoU ≥ `cluster_iou`, independently of
/// confidence, so that raising `conf_min` can only drop clusters. A cluster
/// becomes a candidate when at least one member reaches `conf_min`; only
/// such members are listed and counted toward the agreement.
///
/// Candidates are ordered by agreement, then confidence (both descending),
/// then image id, and numbered in that order.
pub fn mine_audit_candidates(
    dets_by_model: &[(String, Vec<Detection>)],
    gts: &[Annotation],
    cfg: &AuditConfig,
) -> Result<Vec<AuditCandidate>> {
    cfg.validate()?;
    let mut gt_by_image: BTreeMap<u64, Vec<&Annotation>> = BTreeMap::new();
    for g in gts {
        gt_by_image.entry(g.image_id).or_default().push(g);
    }

    // Unmatched detections keyed by (image, class).
    let mut pool: BTreeMap<(u64, u32), Vec<(&str, &Detection, f64)>> = BTreeMap::new();
    for (model, dets) in dets_by_model {
        for d in dets {
            let image_gts = gt_by_image.get(&d.image_id).map(Vec::as_slice).unwrap_or(&[]);
            let best = best_iou(d, image_gts);
            if best < cfg.iou_max {
                pool.entry((d.image_id, d.class_id))
                    .or_default()
                    .push((model.as_str(), d, best));
            }
        }
    }

    let mut out = Vec::new();
    for ((image_id, _), entries) in &pool {
        let n = entries.len();
        let mut parent: Vec<usize> = (0..n).collect();
        for i in 0..n {
            for j in i + 1..n {
                if iou(&entries[i].1.bbox, &entries[j].1.bbox) >= cfg.cluster_iou {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
        let mut clusters: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for i in 0..n {
            let root = find(&mut parent, i);
            clusters.entry(root).or_default().push(i);
        }
        for members in clusters.values() {
            let mut qualifying: Vec<usize> = members
                .iter()
                .copied()
                .filter(|&i| entries[i].1.confidence >= cfg.conf_min)
                .collect();
            if qualifying.is_empty() {
                continue;
            }
            // Most confident first; ties keep input order.
            qualifying.sort_by(|&a, &b| {
                entries[b].1.confidence.total_cmp(&entries[a].1.confidence)
            });
            let (model, det, best) = entries[qualifying[0]];
            let models: BTreeSet<&str> = qualifying.iter().map(|&i| entries[i].0).collect();
            out.push(AuditCandidate {
                id: String::new(),
                image_id: *image_id,
                model: model.to_string(),
                detection: det.clone(),
                best_iou_vs_gt: best,
                agreement: models.len(),
                models: models.into_iter().map(str::to_string).collect(),
                members: qualifying
                    .iter()
                    .map(|&i| CandidateMember {
                        model: entries[i].0.to_string(),
                        detection: entries[i].1.clone(),
                    })
                    .collect(),
                status: CandidateStatus::Pending,
            });
        }
    }

    // Stable sort keeps the (image, class, cluster) order for full ties.
    out.sort_by(|a, b| {
        b.agreement
            .cmp(&a.agreement)
            .then(b.detection.confidence.total_cmp(&a.detection.confidence))
            .then(a.image_id.cmp(&b.image_id))
    });
    for (i, c) in out.iter_mut().enumerate() {
        c.id = format!("c{:05}", i + 1);
    }
    Ok(out)
}
