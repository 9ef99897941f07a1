use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uwqa_core::deteval::{map_50_95, mine_audit_candidates, Annotation, AuditConfig, BoundingBox, ClassInfo, Detection};
use uwqa_core::metrics::{ccf, entropy, uciqe, uiqm};
use uwqa_core::qindex::{compute_qindex, MetricRow};
use uwqa_core::{metric_vector, ImageBuffer, MetricConfig, MetricTable, MetricVector};

fn scene(width: usize, height: usize, seed: u64) -> ImageBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ImageBuffer::from_fn(width, height, |x, y| {
        let n: i32 = rng.random_range(-12..=12);
        let c = |base: i32| (base + n).clamp(0, 255) as u8;
        [c(20 + (x % 40) as i32), c(90 + (x * 100 / width) as i32), c(120 + (y * 80 / height) as i32)]
    })
    .unwrap()
}

fn metrics(c: &mut Criterion) {
    let cfg = MetricConfig::default();
    let mut group = c.benchmark_group("metrics");
    for (w, h) in [(320, 240), (640, 480)] {
        let img = scene(w, h, 1);
        let id = format!("{w}x{h}");
        group.bench_with_input(BenchmarkId::new("uiqm", &id), &img, |b, img| b.iter(|| uiqm(black_box(img), &cfg)));
        group.bench_with_input(BenchmarkId::new("uciqe", &id), &img, |b, img| b.iter(|| uciqe(black_box(img), &cfg)));
        group.bench_with_input(BenchmarkId::new("ccf", &id), &img, |b, img| b.iter(|| ccf(black_box(img), &cfg)));
        group.bench_with_input(BenchmarkId::new("entropy", &id), &img, |b, img| b.iter(|| entropy(black_box(img))));
        group.bench_with_input(BenchmarkId::new("all", &id), &img, |b, img| {
            b.iter(|| metric_vector(black_box(img), &cfg))
        });
    }
    group.finish();
}

fn metric_table(models: usize, images: usize) -> MetricTable {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut rows = Vec::with_capacity(models * images);
    for m in 0..models {
        let model = if m == 0 { "original".to_string() } else { format!("m{m}") };
        for i in 0..images {
            rows.push(MetricRow {
                model: model.clone(),
                image_id: format!("img{i:05}"),
                metrics: MetricVector::from_array([
                    rng.random_range(0.5..4.5),
                    rng.random_range(0.3..0.7),
                    rng.random_range(5.0..35.0),
                    rng.random_range(4.0..8.0),
                ]),
            });
        }
    }
    MetricTable::from_rows(rows).unwrap()
}

fn qindex(c: &mut Criterion) {
    let mut group = c.benchmark_group("qindex");
    for images in [100, 1000] {
        let table = metric_table(10, images);
        group.bench_with_input(BenchmarkId::new("10_models", images), &table, |b, t| {
            b.iter(|| compute_qindex(black_box(t)))
        });
    }
    group.finish();
}

fn detections(images: u64, seed: u64) -> (Vec<Annotation>, Vec<Detection>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gts = Vec::new();
    let mut dets = Vec::new();
    for image_id in 1..=images {
        for _ in 0..rng.random_range(1..8) {
            let (x, y) = (rng.random_range(0.0..500.0), rng.random_range(0.0..400.0));
            let (w, h) = (rng.random_range(10.0..80.0), rng.random_range(10.0..80.0));
            let class_id = rng.random_range(0..5);
            gts.push(Annotation { image_id, class_id, bbox: BoundingBox::from_xywh(x, y, w, h).unwrap() });
            if rng.random_bool(0.8) {
                let j = rng.random_range(-4.0..4.0);
                dets.push(Detection {
                    image_id,
                    class_id,
                    bbox: BoundingBox::from_xywh(x + j, y - j, w, h).unwrap(),
                    confidence: rng.random_range(0.05..1.0),
                });
            }
        }
        for _ in 0..rng.random_range(0..4) {
            dets.push(Detection {
                image_id,
                class_id: rng.random_range(0..5),
                bbox: BoundingBox::from_xywh(rng.random_range(0.0..500.0), rng.random_range(0.0..400.0), 30.0, 30.0)
                    .unwrap(),
                confidence: rng.random_range(0.05..1.0),
            });
        }
    }
    (gts, dets)
}

fn deteval(c: &mut Criterion) {
    let classes: Vec<ClassInfo> = (0..5).map(|id| ClassInfo { id, name: format!("c{id}") }).collect();
    let mut group = c.benchmark_group("deteval");
    for images in [100, 1000] {
        let (gts, dets) = detections(images, 3);
        group.bench_with_input(BenchmarkId::new("map_50_95", images), &(gts, dets), |b, (g, d)| {
            b.iter(|| map_50_95(black_box(d), black_box(g), &classes))
        });
    }
    // Three detectors that see the same scenes, each shifted a little.
    let (gts, base) = detections(500, 4);
    let per_model: Vec<(String, Vec<Detection>)> = (0..3)
        .map(|m| {
            let shift = m as f64;
            let dets = base
                .iter()
                .map(|d| Detection { bbox: d.bbox.translated(shift, -shift).unwrap(), ..d.clone() })
                .collect();
            (format!("m{m}"), dets)
        })
        .collect();
    group.bench_function("audit_3_models_500", |b| {
        b.iter(|| mine_audit_candidates(black_box(&per_model), black_box(&gts), &AuditConfig::default()))
    });
    group.finish();
}

criterion_group!(benches, metrics, qindex, deteval);
criterion_main!(benches);
