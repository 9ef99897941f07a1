//! Detection evaluation: IoU, greedy matching, 101-point AP, mAP over the
//! 0.50:0.05:0.95 IoU grid, and mining of annotation-audit candidates.

mod audit;
mod schema;

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

pub use audit::{
    mine_audit_candidates, AuditCandidate, AuditConfig, CandidateFile, CandidateMember,
    CandidateStatus,
};
pub use schema::{
    Annotation, BoundingBox, BoxFormat, ClassInfo, Detection, DetectionSet, GroundTruth, ImageInfo,
};

use crate::error::{Error, Result};
use crate::report::format::{fmt_opt, fmt_sig6, write_csv};

/// The ten COCO IoU thresholds 0.50, 0.55, ..., 0.95.
pub fn iou_thresholds() -> Vec<f64> {
    (0..10).map(|i| (50 + 5 * i) as f64 / 100.0).collect()
}

/// Number of recall sample points used by [`average_precision`].
pub const RECALL_POINTS: usize = 101;

/// Intersection over union; 0 for disjoint boxes.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let iw = a.x_max.min(b.x_max) - a.x_min.max(b.x_min);
    let ih = a.y_max.min(b.y_max) - a.y_min.max(b.y_min);
    if iw <= 0.0 || ih <= 0.0 {
        return 0.0;
    }
    let inter = iw * ih;
    (inter / (a.area() + b.area() - inter)).clamp(0.0, 1.0)
}

/// Result of matching one image's detections against its ground truth.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MatchOutcome {
    /// TP flag per detection, in input order.
    pub is_tp: Vec<bool>,
    /// Matched ground-truth index per detection, in input order.
    pub matched_gt: Vec<Option<usize>>,
    pub false_negatives: usize,
}

impl MatchOutcome {
    pub fn true_positives(&self) -> usize {
        self.is_tp.iter().filter(|&&t| t).count()
    }

    pub fn false_positives(&self) -> usize {
        self.is_tp.len() - self.true_positives()
    }
}

/// Indices of `dets` by descending confidence; ties keep input order.
fn confidence_order(dets: &[Detection]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].confidence.total_cmp(&dets[a].confidence));
    order
}

/// Greedy matching: in confidence order, each detection takes the unmatched
/// same-class ground truth with the highest IoU, provided it is at least `t`.
pub fn match_detections(dets: &[Detection], gts: &[Annotation], t: f64) -> Result<MatchOutcome> {
    let mut ids = dets
        .iter()
        .map(|d| d.image_id)
        .chain(gts.iter().map(|g| g.image_id));
    if let Some(first) = ids.next() {
        if let Some(other) = ids.find(|&id| id != first) {
            return Err(Error::MixedImage(first, other));
        }
    }
    let ious: Vec<Vec<f64>> = dets
        .iter()
        .map(|d| gts.iter().map(|g| iou(&d.bbox, &g.bbox)).collect())
        .collect();
    Ok(greedy_match(dets, gts, &ious, &confidence_order(dets), t))
}

fn greedy_match(
    dets: &[Detection],
    gts: &[Annotation],
    ious: &[Vec<f64>],
    order: &[usize],
    t: f64,
) -> MatchOutcome {
    let mut taken = vec![false; gts.len()];
    let mut matched_gt = vec![None; dets.len()];
    for &d in order {
        let mut best: Option<(usize, f64)> = None;
        for (g, gt) in gts.iter().enumerate() {
            if taken[g] || gt.class_id != dets[d].class_id {
                continue;
            }
            let v = ious[d][g];
            if v >= t && best.is_none_or(|(_, b)| v > b) {
                best = Some((g, v));
            }
        }
        if let Some((g, _)) = best {
            taken[g] = true;
            matched_gt[d] = Some(g);
        }
    }
    MatchOutcome {
        is_tp: matched_gt.iter().map(Option::is_some).collect(),
        matched_gt,
        false_negatives: taken.iter().filter(|&&t| !t).count(),
    }
}

/// 101-point interpolated average precision of confidence-ordered TP/FP
/// labels. Returns `None` when the class has neither ground truth nor
/// detections; with detections but no ground truth the AP is 0.
pub fn average_precision(labels: &[bool], gt_count: usize) -> Option<f64> {
    if gt_count == 0 {
        return if labels.is_empty() { None } else { Some(0.0) };
    }
    let mut precision = Vec::with_capacity(labels.len());
    let mut recall = Vec::with_capacity(labels.len());
    let mut tp = 0usize;
    for (k, &is_tp) in labels.iter().enumerate() {
        tp += usize::from(is_tp);
        precision.push(tp as f64 / (k + 1) as f64);
        recall.push(tp as f64 / gt_count as f64);
    }
    // Monotone envelope, right to left.
    for k in (0..precision.len().saturating_sub(1)).rev() {
        precision[k] = precision[k].max(precision[k + 1]);
    }
    let mut sum = 0.0;
    let mut k = 0;
    for i in 0..RECALL_POINTS {
        let r = i as f64 / (RECALL_POINTS - 1) as f64;
        while k < recall.len() && recall[k] < r {
            k += 1;
        }
        if k < recall.len() {
            sum += precision[k];
        }
    }
    Some(sum / RECALL_POINTS as f64)
}

/// Evaluation of one class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassEval {
    pub class_id: u32,
    pub name: String,
    pub gt_count: usize,
    pub det_count: usize,
    /// AP per IoU threshold; empty when the class was skipped.
    pub ap: Vec<f64>,
    /// Mean AP over the thresholds; `None` when skipped.
    pub map: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub iou_thresholds: Vec<f64>,
    pub classes: Vec<ClassEval>,
    /// Mean of the per-class mAP over every class that was not skipped.
    pub overall: f64,
    pub tp_at_50: usize,
    pub fp_at_50: usize,
    pub fn_at_50: usize,
}

impl EvalResult {
    pub fn class(&self, class_id: u32) -> Option<&ClassEval> {
        self.classes.iter().find(|c| c.class_id == class_id)
    }
}

/// COCO-style mAP@[.50:.95] per class and overall.
pub fn map_50_95(dets: &[Detection], gts: &[Annotation], classes: &[ClassInfo]) -> Result<EvalResult> {
    let declared: HashSet<u32> = classes.iter().map(|c| c.id).collect();
    if let Some(bad) = dets
        .iter()
        .map(|d| d.class_id)
        .chain(gts.iter().map(|g| g.class_id))
        .find(|c| !declared.contains(c))
    {
        return Err(Error::UnknownClass(bad));
    }
    let thresholds = iou_thresholds();

    // Group record indices by image.
    let mut by_image: BTreeMap<u64, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    for (i, d) in dets.iter().enumerate() {
        by_image.entry(d.image_id).or_default().0.push(i);
    }
    for (i, g) in gts.iter().enumerate() {
        by_image.entry(g.image_id).or_default().1.push(i);
    }

    // tp[threshold][det]
    let mut tp = vec![vec![false; dets.len()]; thresholds.len()];
    let (mut tp50, mut fn50) = (0usize, 0usize);
    for (det_idx, gt_idx) in by_image.values() {
        let img_dets: Vec<Detection> = det_idx.iter().map(|&i| dets[i].clone()).collect();
        let img_gts: Vec<Annotation> = gt_idx.iter().map(|&i| gts[i].clone()).collect();
        let ious: Vec<Vec<f64>> = img_dets
            .iter()
            .map(|d| img_gts.iter().map(|g| iou(&d.bbox, &g.bbox)).collect())
            .collect();
        let order = confidence_order(&img_dets);
        for (ti, &t) in thresholds.iter().enumerate() {
            let m = greedy_match(&img_dets, &img_gts, &ious, &order, t);
            for (local, &global) in det_idx.iter().enumerate() {
                tp[ti][global] = m.is_tp[local];
            }
            if ti == 0 {
                tp50 += m.true_positives();
                fn50 += m.false_negatives;
            }
        }
    }

    let global_order = confidence_order(dets);
    let mut class_evals = Vec::with_capacity(classes.len());
    for class in classes {
        let gt_count = gts.iter().filter(|g| g.class_id == class.id).count();
        let ordered: Vec<usize> = global_order
            .iter()
            .copied()
            .filter(|&i| dets[i].class_id == class.id)
            .collect();
        let mut ap = Vec::with_capacity(thresholds.len());
        for tp_t in &tp {
            let labels: Vec<bool> = ordered.iter().map(|&i| tp_t[i]).collect();
            if let Some(v) = average_precision(&labels, gt_count) {
                ap.push(v);
            }
        }
        let map = (!ap.is_empty()).then(|| ap.iter().sum::<f64>() / ap.len() as f64);
        class_evals.push(ClassEval {
            class_id: class.id,
            name: class.name.clone(),
            gt_count,
            det_count: ordered.len(),
            ap,
            map,
        });
    }
    let scored: Vec<f64> = class_evals.iter().filter_map(|c| c.map).collect();
    let overall = if scored.is_empty() {
        0.0
    } else {
        scored.iter().sum::<f64>() / scored.len() as f64
    };
    Ok(EvalResult {
        iou_thresholds: thresholds,
        classes: class_evals,
        overall,
        tp_at_50: tp50,
        fp_at_50: dets.len() - tp50,
        fn_at_50: fn50,
    })
}

/// Per-model evaluation results in the shape of a per-class mAP table:
/// one row per model, one column per class, plus the overall score.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalTable {
    pub classes: Vec<String>,
    pub rows: Vec<EvalRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub model: String,
    /// Per-class mAP, aligned with [`EvalTable::classes`].
    pub per_class: Vec<Option<f64>>,
    pub overall: f64,
}

impl EvalTable {
    pub fn from_results(results: &[(String, EvalResult)]) -> Result<Self> {
        let classes: Vec<String> = results
            .first()
            .map(|(_, r)| r.classes.iter().map(|c| c.name.clone()).collect())
            .unwrap_or_default();
        let mut seen = HashSet::new();
        let mut rows = Vec::with_capacity(results.len());
        for (model, r) in results {
            if !seen.insert(model.as_str()) {
                return Err(Error::Schema(format!("duplicate model id `{model}`")));
            }
            rows.push(EvalRow {
                model: model.clone(),
                per_class: r.classes.iter().map(|c| c.map).collect(),
                overall: r.overall,
            });
        }
        Ok(Self { classes, rows })
    }

    pub fn overall_by_model(&self) -> HashMap<&str, f64> {
        self.rows.iter().map(|r| (r.model.as_str(), r.overall)).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut header: Vec<&str> = vec!["model"];
        header.extend(self.classes.iter().map(String::as_str));
        header.push("overall");
        write_csv(
            &header,
            self.rows.iter().map(|r| {
                let mut cells = vec![r.model.clone()];
                cells.extend(r.per_class.iter().map(|v| fmt_opt(*v)));
                cells.push(fmt_sig6(r.overall));
                cells
            }),
        )
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        use crate::report::format::{parse_f64, parse_opt_f64, CsvDoc};
        let doc = CsvDoc::parse(text)?;
        let n = doc.header.len();
        if n < 2 || doc.header[0] != "model" || doc.header[n - 1] != "overall" {
            return Err(Error::Schema(
                "evaluation csv must have `model`, class columns, then `overall`".into(),
            ));
        }
        let classes = doc.header[1..n - 1].to_vec();
        let mut seen = HashSet::new();
        let mut rows = Vec::with_capacity(doc.records.len());
        for (line, rec) in &doc.records {
            if !seen.insert(rec[0].clone()) {
                return Err(Error::Schema(format!(
                    "line {line}: duplicate model id `{}`",
                    rec[0]
                )));
            }
            let per_class = rec[1..n - 1]
                .iter()
                .zip(&classes)
                .map(|(v, c)| parse_opt_f64(v, c, *line))
                .collect::<Result<_>>()?;
            rows.push(EvalRow {
                model: rec[0].clone(),
                per_class,
                overall: parse_f64(&rec[n - 1], "overall", *line)?,
            });
        }
        Ok(Self { classes, rows })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bx(x0: f64, y0: f64, x1: f64, y1: f64) -> BoundingBox {
        BoundingBox::new(x0, y0, x1, y1).unwrap()
    }

    fn det(class_id: u32, b: BoundingBox, confidence: f64) -> Detection {
        Detection {
            image_id: 1,
            class_id,
            bbox: b,
            confidence,
        }
    }

    fn gt(class_id: u32, b: BoundingBox) -> Annotation {
        Annotation {
            image_id: 1,
            class_id,
            bbox: b,
        }
    }

    #[test]
    fn iou_examples() {
        let a = bx(0.0, 0.0, 2.0, 2.0);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &bx(5.0, 5.0, 6.0, 6.0)), 0.0);
        assert_eq!(iou(&a, &bx(2.0, 0.0, 3.0, 2.0)), 0.0);
        assert!((iou(&a, &bx(1.0, 0.0, 3.0, 2.0)) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn matching_examples() {
        let g = bx(0.0, 0.0, 10.0, 10.0);
        let m = match_detections(&[det(0, g, 0.9)], &[gt(0, g)], 0.5).unwrap();
        assert_eq!((m.true_positives(), m.false_positives(), m.false_negatives), (1, 0, 0));

        let m = match_detections(&[det(1, g, 0.9)], &[gt(0, g)], 0.5).unwrap();
        assert_eq!((m.true_positives(), m.false_positives(), m.false_negatives), (0, 1, 1));

        // conf 0.9 at IoU 0.6, conf 0.8 at IoU 0.7
        let d1 = det(0, bx(0.0, 0.0, 10.0, 6.0), 0.9);
        let d2 = det(0, bx(0.0, 0.0, 10.0, 7.0), 0.8);
        let m = match_detections(&[d2, d1], &[gt(0, g)], 0.5).unwrap();
        assert_eq!(m.is_tp, vec![false, true]);
    }

    #[test]
    fn matching_rejects_mixed_images() {
        let g = bx(0.0, 0.0, 1.0, 1.0);
        let mut other = gt(0, g);
        other.image_id = 2;
        assert!(matches!(
            match_detections(&[det(0, g, 0.5)], &[other], 0.5),
            Err(Error::MixedImage(1, 2))
        ));
    }

    #[test]
    fn ap_examples() {
        assert_eq!(average_precision(&[true, true], 2), Some(1.0));
        assert_eq!(average_precision(&[], 3), Some(0.0));
        assert_eq!(average_precision(&[], 0), None);
        assert_eq!(average_precision(&[false], 0), Some(0.0));
        // TP, FP, TP over 2 GT: recall 0.5 @ p=1, recall 1 @ p=2/3
        let ap = average_precision(&[true, false, true], 2).unwrap();
        let expected = (51.0 * 1.0 + 50.0 * (2.0 / 3.0)) / 101.0;
        assert!((ap - expected).abs() < 1e-12);
    }

    #[test]
    fn map_single_gt_iou_062() {
        let classes = [ClassInfo {
            id: 0,
            name: "fish".into(),
        }];
        // IoU 0.62: a TP for thresholds 0.50, 0.55, 0.60 only.
        let r = map_50_95(
            &[det(0, bx(0.0, 0.0, 10.0, 6.2), 0.9)],
            &[gt(0, bx(0.0, 0.0, 10.0, 10.0))],
            &classes,
        )
        .unwrap();
        assert!((r.overall - 0.3).abs() < 1e-12);
        assert_eq!(&r.classes[0].ap[..4], &[1.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn map_perfect_and_empty() {
        let classes = [
            ClassInfo { id: 0, name: "a".into() },
            ClassInfo { id: 1, name: "b".into() },
            ClassInfo { id: 2, name: "unused".into() },
        ];
        let gts = vec![gt(0, bx(0.0, 0.0, 5.0, 5.0)), gt(1, bx(6.0, 6.0, 9.0, 9.0))];
        let dets: Vec<Detection> = gts.iter().map(|g| det(g.class_id, g.bbox, 1.0)).collect();
        let r = map_50_95(&dets, &gts, &classes).unwrap();
        assert_eq!(r.overall, 1.0);
        assert_eq!(r.classes[2].map, None);
        let r = map_50_95(&[], &gts, &classes).unwrap();
        assert_eq!(r.overall, 0.0);
        assert_eq!(r.fn_at_50, 2);
    }

    #[test]
    fn map_unknown_class() {
        let classes = [ClassInfo { id: 0, name: "a".into() }];
        let err = map_50_95(&[det(3, bx(0.0, 0.0, 1.0, 1.0), 0.5)], &[], &classes).unwrap_err();
        assert!(matches!(err, Error::UnknownClass(3)));
    }

    #[test]
    fn eval_table_csv_round_trip() {
        let t = EvalTable {
            classes: vec!["bushy".into(), "leafy".into()],
            rows: vec![
                EvalRow {
                    model: "original".into(),
                    per_class: vec![Some(0.46), None],
                    overall: 0.38,
                },
                EvalRow {
                    model: "acdc".into(),
                    per_class: vec![Some(0.42), Some(0.22)],
                    overall: 0.34,
                },
            ],
        };
        let csv = t.to_csv();
        assert_eq!(csv, "model,bushy,leafy,overall\noriginal,0.46,,0.38\nacdc,0.42,0.22,0.34\n");
        assert_eq!(EvalTable::from_csv(&csv).unwrap(), t);
        let dup = "model,a,overall\nx,0.1,0.1\nx,0.2,0.2\n";
        assert!(EvalTable::from_csv(dup).is_err());
    }
}
