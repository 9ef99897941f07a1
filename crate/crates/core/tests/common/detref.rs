//! Independent reference evaluator for mAP50:95 and the seeded micro-scenes
//! it is checked on.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uwqa_core::deteval::{iou, Annotation, BoundingBox, ClassInfo, Detection};

pub struct Scene {
    pub dets: Vec<Detection>,
    pub gts: Vec<Annotation>,
}

pub fn bx(x: f64, y: f64, w: f64, h: f64) -> BoundingBox {
    BoundingBox::from_xywh(x, y, w, h).unwrap()
}

pub fn random_box(rng: &mut ChaCha8Rng) -> BoundingBox {
    bx(
        rng.random_range(0..6) as f64 * 2.0,
        rng.random_range(0..6) as f64 * 2.0,
        rng.random_range(2..10) as f64,
        rng.random_range(2..10) as f64,
    )
}

pub fn scene(seed: u64) -> Scene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gts: Vec<Annotation> = (0..rng.random_range(0..=3))
        .map(|_| Annotation {
            image_id: 1,
            class_id: rng.random_range(0..2),
            bbox: random_box(&mut rng),
        })
        .collect();
    let dets = (0..rng.random_range(0..=4))
        .map(|_| {
            // Half of the detections jitter an existing GT box.
            let bbox = match gts.get(rng.random_range(0..4usize)) {
                Some(g) if rng.random_bool(0.5) => g
                    .bbox
                    .translated(rng.random_range(-2..=2) as f64, rng.random_range(-2..=2) as f64)
                    .unwrap(),
                _ => random_box(&mut rng),
            };
            Detection {
                image_id: 1,
                class_id: rng.random_range(0..2),
                bbox,
                confidence: [0.3, 0.5, 0.7, 0.9][rng.random_range(0..4)],
            }
        })
        .collect();
    Scene { dets, gts }
}

/// Reference evaluator: explicit per-class, per-threshold enumeration.
pub fn reference_map(s: &Scene, classes: &[u32]) -> f64 {
    let mut per_class = Vec::new();
    for &c in classes {
        let mut order: Vec<usize> = (0..s.dets.len()).filter(|&i| s.dets[i].class_id == c).collect();
        // Stable sort: equal confidences keep input order.
        order.sort_by(|&a, &b| s.dets[b].confidence.partial_cmp(&s.dets[a].confidence).unwrap());
        let gts: Vec<&Annotation> = s.gts.iter().filter(|g| g.class_id == c).collect();
        if gts.is_empty() && order.is_empty() {
            continue;
        }
        let mut aps = Vec::new();
        for step in 0..10 {
            let t = (50 + 5 * step) as f64 / 100.0;
            let mut used = vec![false; gts.len()];
            let mut tps = Vec::new();
            for &d in &order {
                let mut pick: Option<usize> = None;
                let mut pick_iou = -1.0;
                for (g, gt) in gts.iter().enumerate() {
                    let v = iou(&s.dets[d].bbox, &gt.bbox);
                    if !used[g] && v >= t && v > pick_iou {
                        pick = Some(g);
                        pick_iou = v;
                    }
                }
                if let Some(g) = pick {
                    used[g] = true;
                }
                tps.push(pick.is_some());
            }
            if gts.is_empty() {
                aps.push(0.0);
                continue;
            }
            // Precision/recall points, then envelope and 101-point sampling.
            let mut prec = Vec::new();
            let mut rec = Vec::new();
            let mut tp = 0.0;
            for (k, &hit) in tps.iter().enumerate() {
                if hit {
                    tp += 1.0;
                }
                prec.push(tp / (k + 1) as f64);
                rec.push(tp / gts.len() as f64);
            }
            let mut ap = 0.0;
            for i in 0..=100 {
                let r = i as f64 / 100.0;
                let best = (0..prec.len())
                    .filter(|&k| rec[k] >= r)
                    .map(|k| prec[k])
                    .fold(0.0, f64::max);
                ap += best;
            }
            aps.push(ap / 101.0);
        }
        per_class.push(aps.iter().sum::<f64>() / 10.0);
    }
    if per_class.is_empty() {
        0.0
    } else {
        per_class.iter().sum::<f64>() / per_class.len() as f64
    }
}

pub fn class_list() -> Vec<ClassInfo> {
    vec![
        ClassInfo { id: 0, name: "a".into() },
        ClassInfo { id: 1, name: "b".into() },
    ]
}
